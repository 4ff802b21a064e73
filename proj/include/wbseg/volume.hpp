#pragma once

// Geometric volume model: grids with a voxel-to-world affine, scalar image
// volumes, label volumes and binary masks.
//
// Voxel buffers are linearised with the first axis varying fastest:
//   linear = i + dims[0] * (j + dims[1] * k)
// which is also the on-disk order of NIfTI-1.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wbseg {

class ClassTaxonomy;

using Index3 = std::array<std::int64_t, 3>;
using Dims3 = std::array<std::int64_t, 3>;
using Vec3 = std::array<double, 3>;

// Row-major 4x4 matrix. Only affine transforms (last row 0 0 0 1) are used.
struct Mat4 {
  std::array<double, 16> m{};

  static Mat4 identity();
  static Mat4 diagonal(const Vec3& scale, const Vec3& translation = {0, 0, 0});

  double& operator()(int row, int col) { return m[static_cast<std::size_t>(row * 4 + col)]; }
  double operator()(int row, int col) const { return m[static_cast<std::size_t>(row * 4 + col)]; }

  Vec3 apply(const Vec3& p) const;
  // Applies only the linear 3x3 part.
  Vec3 apply_linear(const Vec3& v) const;
  Vec3 translation() const { return {m[3], m[7], m[11]}; }
  Vec3 column(int col) const { return {(*this)(0, col), (*this)(1, col), (*this)(2, col)}; }

  friend Mat4 operator*(const Mat4& a, const Mat4& b);
  friend bool operator==(const Mat4&, const Mat4&) = default;
};

// Inverse of an affine matrix; throws GeometryError if the 3x3 part is singular.
Mat4 affine_inverse(const Mat4& a);

double norm(const Vec3& v);

// Immutable sampling grid. Invariants (checked on construction):
//  - every dim >= 1, every spacing > 0
//  - the 3x3 part of the affine is invertible and its column norms match
//    spacing within 1e-3 relative tolerance
class Grid {
 public:
  Grid(const Dims3& dims, const Vec3& spacing, const Mat4& affine);

  // Axis-aligned grid with the given spacing and world position of voxel 0.
  static Grid axis_aligned(const Dims3& dims, const Vec3& spacing, const Vec3& origin = {0, 0, 0});
  // Spacing taken from the affine's column norms.
  static Grid from_affine(const Dims3& dims, const Mat4& affine);

  const Dims3& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Mat4& affine() const { return affine_; }
  const Mat4& inverse_affine() const { return inverse_; }
  // Unit direction cosines (affine columns divided by spacing), row-major 3x3.
  std::array<double, 9> direction() const;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  }
  bool contains(const Index3& idx) const {
    return idx[0] >= 0 && idx[1] >= 0 && idx[2] >= 0 && idx[0] < dims_[0] && idx[1] < dims_[1] &&
           idx[2] < dims_[2];
  }
  std::size_t linear(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k));
  }
  std::size_t linear(const Index3& idx) const { return linear(idx[0], idx[1], idx[2]); }
  Index3 index_of(std::size_t linear) const;

 private:
  Dims3 dims_;
  Vec3 spacing_;
  Mat4 affine_;
  Mat4 inverse_;
};

// World position (mm) of an integer voxel index. Throws BoundsError outside dims.
Vec3 voxel_to_world(const Grid& grid, const Index3& index);
// Continuous variant, no bounds check.
Vec3 voxel_to_world(const Grid& grid, const Vec3& index);
// Continuous voxel coordinates of a world point.
Vec3 world_to_voxel(const Grid& grid, const Vec3& world);

// Largest world distance between corresponding corner voxels of two grids.
// Grids with differing dims compare their own corners index-wise.
double max_corner_distance(const Grid& a, const Grid& b);
// Same dims and every corner within tolerance_mm.
bool same_geometry(const Grid& a, const Grid& b, double tolerance_mm = 1e-4);

// World-space axis-aligned bounding box of a grid's voxel extents (centers
// +/- half a voxel).
struct WorldBox {
  Vec3 lo;
  Vec3 hi;
  double volume() const;
};
WorldBox world_bounds(const Grid& grid);
WorldBox intersect(const WorldBox& a, const WorldBox& b);

enum class DataKind { UInt8, Int16, Int32, Float32, Float64, UInt16 };

std::string_view to_string(DataKind kind);
bool is_integer(DataKind kind);
// Whether `value` survives a cast to the storage type unchanged.
bool representable(DataKind kind, double value);

// Scalar volume. Samples are held as double regardless of `kind`; every
// sample is representable in `kind`, so writing back is lossless.
class ImageVolume {
 public:
  ImageVolume(Grid grid, DataKind kind, std::vector<double> data);

  const Grid& grid() const { return grid_; }
  DataKind kind() const { return kind_; }
  std::span<const double> data() const { return data_; }
  double at(const Index3& idx) const { return data_[grid_.linear(idx)]; }
  double min() const;
  double max() const;

  friend bool operator==(const ImageVolume& a, const ImageVolume& b);

 private:
  Grid grid_;
  DataKind kind_;
  std::vector<double> data_;
};

// Integer label volume. 0 is background.
class LabelVolume {
 public:
  // `storage` is the preferred on-disk width; the writer widens it when a
  // label does not fit.
  LabelVolume(Grid grid, std::vector<std::uint32_t> labels, DataKind storage = DataKind::UInt8);

  const Grid& grid() const { return grid_; }
  std::span<const std::uint32_t> labels() const { return labels_; }
  std::uint32_t at(const Index3& idx) const { return labels_[grid_.linear(idx)]; }
  DataKind storage() const { return storage_; }
  std::uint32_t max_label() const;

  // Name of the taxonomy every nonzero label belongs to; empty when the
  // volume is untaxonomized.
  const std::string& taxonomy() const { return taxonomy_; }
  bool untaxonomized() const { return taxonomy_.empty(); }
  // Copy tagged with `taxonomy` if every nonzero label is a member of it,
  // otherwise an untaxonomized copy.
  LabelVolume with_taxonomy(const ClassTaxonomy& taxonomy) const;

  friend bool operator==(const LabelVolume& a, const LabelVolume& b);

 private:
  Grid grid_;
  std::vector<std::uint32_t> labels_;
  DataKind storage_;
  std::string taxonomy_;
};

// One byte per voxel, nonzero = foreground.
class BinaryMask {
 public:
  BinaryMask(Grid grid, std::vector<std::uint8_t> bits);

  const Grid& grid() const { return grid_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  bool at(const Index3& idx) const { return bits_[grid_.linear(idx)] != 0; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }

 private:
  Grid grid_;
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
};

BinaryMask extract_binary_mask(const LabelVolume& labels, std::uint32_t class_id);

// Foreground voxels with at least one face neighbour (6-connectivity) that is
// background or outside the grid, in increasing linear order.
std::vector<Index3> surface_voxels(const BinaryMask& mask);

}  // namespace wbseg
