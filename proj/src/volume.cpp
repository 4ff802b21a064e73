#include "wbseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "wbseg/error.hpp"
#include "wbseg/taxonomy.hpp"

namespace wbseg {

Mat4 Mat4::identity() { return diagonal({1, 1, 1}); }

Mat4 Mat4::diagonal(const Vec3& scale, const Vec3& translation) {
  Mat4 a;
  a(0, 0) = scale[0];
  a(1, 1) = scale[1];
  a(2, 2) = scale[2];
  a(0, 3) = translation[0];
  a(1, 3) = translation[1];
  a(2, 3) = translation[2];
  a(3, 3) = 1.0;
  return a;
}

Vec3 Mat4::apply(const Vec3& p) const {
  Vec3 out = apply_linear(p);
  out[0] += m[3];
  out[1] += m[7];
  out[2] += m[11];
  return out;
}

Vec3 Mat4::apply_linear(const Vec3& v) const {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[4] * v[0] + m[5] * v[1] + m[6] * v[2],
          m[8] * v[0] + m[9] * v[1] + m[10] * v[2]};
}

Mat4 operator*(const Mat4& a, const Mat4& b) {
  Mat4 c;
  for (int r = 0; r < 4; ++r) {
    for (int col = 0; col < 4; ++col) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a(r, k) * b(k, col);
      c(r, col) = s;
    }
  }
  return c;
}

namespace {

double det3(const Mat4& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

}  // namespace

Mat4 affine_inverse(const Mat4& a) {
  const double det = det3(a);
  double scale = 0.0;
  for (int c = 0; c < 3; ++c) scale = std::max(scale, norm(a.column(c)));
  if (!std::isfinite(det) || scale == 0.0 || std::abs(det) <= 1e-12 * scale * scale * scale) {
    throw GeometryError("affine 3x3 part is singular");
  }
  Mat4 inv;
  inv(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) / det;
  inv(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) / det;
  inv(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) / det;
  inv(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) / det;
  inv(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) / det;
  inv(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) / det;
  inv(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) / det;
  inv(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) / det;
  inv(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) / det;
  const Vec3 t = inv.apply_linear(a.translation());
  inv(0, 3) = -t[0];
  inv(1, 3) = -t[1];
  inv(2, 3) = -t[2];
  inv(3, 3) = 1.0;
  return inv;
}

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Grid::Grid(const Dims3& dims, const Vec3& spacing, const Mat4& affine)
    : dims_(dims), spacing_(spacing), affine_(affine) {
  for (int k = 0; k < 3; ++k) {
    if (dims[k] < 1) throw GeometryError(fmt::format("grid dim {} must be >= 1, got {}", k, dims[k]));
    if (!(spacing[k] > 0.0) || !std::isfinite(spacing[k])) {
      throw GeometryError(fmt::format("grid spacing {} must be > 0, got {}", k, spacing[k]));
    }
  }
  for (double v : affine.m) {
    if (!std::isfinite(v)) throw GeometryError("affine has non-finite entries");
  }
  if (affine(3, 0) != 0.0 || affine(3, 1) != 0.0 || affine(3, 2) != 0.0 || affine(3, 3) != 1.0) {
    throw GeometryError("affine last row must be 0 0 0 1");
  }
  for (int k = 0; k < 3; ++k) {
    const double col = norm(affine.column(k));
    if (std::abs(col - spacing[k]) > 1e-3 * spacing[k]) {
      throw GeometryError(fmt::format(
          "affine column {} has norm {} but spacing is {}", k, col, spacing[k]));
    }
  }
  inverse_ = affine_inverse(affine);
}

Grid Grid::axis_aligned(const Dims3& dims, const Vec3& spacing, const Vec3& origin) {
  return Grid(dims, spacing, Mat4::diagonal(spacing, origin));
}

Grid Grid::from_affine(const Dims3& dims, const Mat4& affine) {
  return Grid(dims, {norm(affine.column(0)), norm(affine.column(1)), norm(affine.column(2))}, affine);
}

std::array<double, 9> Grid::direction() const {
  std::array<double, 9> d{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) d[static_cast<std::size_t>(r * 3 + c)] = affine_(r, c) / spacing_[c];
  }
  return d;
}

Index3 Grid::index_of(std::size_t linear) const {
  const auto l = static_cast<std::int64_t>(linear);
  const std::int64_t i = l % dims_[0];
  const std::int64_t rest = l / dims_[0];
  return {i, rest % dims_[1], rest / dims_[1]};
}

Vec3 voxel_to_world(const Grid& grid, const Index3& index) {
  if (!grid.contains(index)) {
    throw BoundsError(fmt::format("voxel ({}, {}, {}) outside grid {}x{}x{}", index[0], index[1],
                                  index[2], grid.dims()[0], grid.dims()[1], grid.dims()[2]));
  }
  return grid.affine().apply(
      {static_cast<double>(index[0]), static_cast<double>(index[1]), static_cast<double>(index[2])});
}

Vec3 voxel_to_world(const Grid& grid, const Vec3& index) { return grid.affine().apply(index); }

Vec3 world_to_voxel(const Grid& grid, const Vec3& world) { return grid.inverse_affine().apply(world); }

namespace {

std::array<Vec3, 8> corner_indices(const Grid& g) {
  std::array<Vec3, 8> out{};
  for (int c = 0; c < 8; ++c) {
    for (int k = 0; k < 3; ++k) {
      out[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] =
          ((c >> k) & 1) ? static_cast<double>(g.dims()[k] - 1) : 0.0;
    }
  }
  return out;
}

}  // namespace

double max_corner_distance(const Grid& a, const Grid& b) {
  const auto ca = corner_indices(a);
  const auto cb = corner_indices(b);
  double worst = 0.0;
  for (std::size_t c = 0; c < 8; ++c) {
    const Vec3 pa = a.affine().apply(ca[c]);
    const Vec3 pb = b.affine().apply(cb[c]);
    worst = std::max(worst, norm({pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]}));
  }
  return worst;
}

bool same_geometry(const Grid& a, const Grid& b, double tolerance_mm) {
  return a.dims() == b.dims() && max_corner_distance(a, b) <= tolerance_mm;
}

double WorldBox::volume() const {
  double v = 1.0;
  for (int k = 0; k < 3; ++k) v *= std::max(0.0, hi[k] - lo[k]);
  return v;
}

WorldBox world_bounds(const Grid& grid) {
  WorldBox box{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()},
               {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity()}};
  for (int c = 0; c < 8; ++c) {
    Vec3 idx{};
    for (int k = 0; k < 3; ++k) {
      idx[k] = ((c >> k) & 1) ? static_cast<double>(grid.dims()[k]) - 0.5 : -0.5;
    }
    const Vec3 w = grid.affine().apply(idx);
    for (int k = 0; k < 3; ++k) {
      box.lo[k] = std::min(box.lo[k], w[k]);
      box.hi[k] = std::max(box.hi[k], w[k]);
    }
  }
  return box;
}

WorldBox intersect(const WorldBox& a, const WorldBox& b) {
  WorldBox out{};
  for (int k = 0; k < 3; ++k) {
    out.lo[k] = std::max(a.lo[k], b.lo[k]);
    out.hi[k] = std::max(out.lo[k], std::min(a.hi[k], b.hi[k]));
  }
  return out;
}

std::string_view to_string(DataKind kind) {
  switch (kind) {
    case DataKind::UInt8: return "uint8";
    case DataKind::Int16: return "int16";
    case DataKind::Int32: return "int32";
    case DataKind::Float32: return "float32";
    case DataKind::Float64: return "float64";
    case DataKind::UInt16: return "uint16";
  }
  return "unknown";
}

bool is_integer(DataKind kind) {
  return kind == DataKind::UInt8 || kind == DataKind::Int16 || kind == DataKind::Int32 ||
         kind == DataKind::UInt16;
}

bool representable(DataKind kind, double v) {
  if (std::isnan(v)) return false;
  if (std::isinf(v)) return kind == DataKind::Float64 || kind == DataKind::Float32;
  switch (kind) {
    case DataKind::UInt8: return v == std::floor(v) && v >= 0 && v <= 255;
    case DataKind::Int16: return v == std::floor(v) && v >= -32768 && v <= 32767;
    case DataKind::UInt16: return v == std::floor(v) && v >= 0 && v <= 65535;
    case DataKind::Int32: return v == std::floor(v) && v >= -2147483648.0 && v <= 2147483647.0;
    case DataKind::Float32: return static_cast<double>(static_cast<float>(v)) == v;
    case DataKind::Float64: return true;
  }
  return false;
}

ImageVolume::ImageVolume(Grid grid, DataKind kind, std::vector<double> data)
    : grid_(std::move(grid)), kind_(kind), data_(std::move(data)) {
  if (data_.size() != grid_.voxel_count()) {
    throw DataError(fmt::format("image has {} samples, grid needs {}", data_.size(), grid_.voxel_count()));
  }
  for (double v : data_) {
    if (std::isnan(v)) throw DataError("image contains NaN samples");
    if (!representable(kind_, v)) {
      throw DataError(fmt::format("sample {} is not representable as {}", v, to_string(kind_)));
    }
  }
}

double ImageVolume::min() const { return *std::min_element(data_.begin(), data_.end()); }
double ImageVolume::max() const { return *std::max_element(data_.begin(), data_.end()); }

bool operator==(const ImageVolume& a, const ImageVolume& b) {
  return a.kind_ == b.kind_ && a.grid_.dims() == b.grid_.dims() &&
         a.grid_.affine() == b.grid_.affine() && a.data_ == b.data_;
}

LabelVolume::LabelVolume(Grid grid, std::vector<std::uint32_t> labels, DataKind storage)
    : grid_(std::move(grid)), labels_(std::move(labels)), storage_(storage) {
  if (labels_.size() != grid_.voxel_count()) {
    throw DataError(fmt::format("label volume has {} voxels, grid needs {}", labels_.size(), grid_.voxel_count()));
  }
}

std::uint32_t LabelVolume::max_label() const {
  return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
}

LabelVolume LabelVolume::with_taxonomy(const ClassTaxonomy& taxonomy) const {
  LabelVolume out = *this;
  out.taxonomy_.clear();
  const bool all_known = std::all_of(labels_.begin(), labels_.end(), [&](std::uint32_t l) {
    return l == 0 || taxonomy.contains(l);
  });
  if (all_known) out.taxonomy_ = taxonomy.name();
  return out;
}

bool operator==(const LabelVolume& a, const LabelVolume& b) {
  return a.grid_.dims() == b.grid_.dims() && a.grid_.affine() == b.grid_.affine() &&
         a.labels_ == b.labels_;
}

BinaryMask::BinaryMask(Grid grid, std::vector<std::uint8_t> bits)
    : grid_(std::move(grid)), bits_(std::move(bits)) {
  if (bits_.size() != grid_.voxel_count()) {
    throw DataError(fmt::format("mask has {} voxels, grid needs {}", bits_.size(), grid_.voxel_count()));
  }
  for (auto& b : bits_) {
    b = b ? 1 : 0;
    count_ += b;
  }
}

BinaryMask extract_binary_mask(const LabelVolume& labels, std::uint32_t class_id) {
  if (class_id == 0) throw ArgumentError("class id must be > 0");
  const auto src = labels.labels();
  std::vector<std::uint8_t> bits(src.size());
  std::transform(src.begin(), src.end(), bits.begin(),
                 [class_id](std::uint32_t l) { return static_cast<std::uint8_t>(l == class_id); });
  return BinaryMask(labels.grid(), std::move(bits));
}

std::vector<Index3> surface_voxels(const BinaryMask& mask) {
  const auto& g = mask.grid();
  const auto [nx, ny, nz] = g.dims();
  const auto bits = mask.bits();
  std::vector<Index3> out;
  const auto fg = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz && bits[g.linear(i, j, k)];
  };
  for (std::int64_t k = 0; k < nz; ++k) {
    for (std::int64_t j = 0; j < ny; ++j) {
      for (std::int64_t i = 0; i < nx; ++i) {
        if (!bits[g.linear(i, j, k)]) continue;
        if (!fg(i - 1, j, k) || !fg(i + 1, j, k) || !fg(i, j - 1, k) || !fg(i, j + 1, k) ||
            !fg(i, j, k - 1) || !fg(i, j, k + 1)) {
          out.push_back({i, j, k});
        }
      }
    }
  }
  return out;
}

}  // namespace wbseg
