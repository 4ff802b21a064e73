#pragma once

// Image and label preprocessing: isotropic resampling, intensity inversion,
// histogram equalisation, label propagation between co-acquired sequences
// and class remapping.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "wbseg/volume.hpp"

namespace wbseg {

enum class Interpolation { Trilinear, Nearest };

struct ResamplePolicy {
  Vec3 target_spacing{1.0, 1.0, 1.0};
  Interpolation interpolation = Interpolation::Trilinear;
};

// Output dims are round-half-up(dims * spacing / target), at least 1. The
// output keeps the world position of voxel 0 and the axis directions.
Grid resampled_grid(const Grid& grid, const Vec3& target_spacing);

// Trilinear output is float64; nearest keeps the input kind.
ImageVolume resample(const ImageVolume& volume, const ResamplePolicy& policy);
// Throws PolicyError for trilinear interpolation.
LabelVolume resample(const LabelVolume& volume, const ResamplePolicy& policy);

// Samples at a continuous voxel position, clamped to the grid edge.
// Coordinates within 1e-6 of an integer snap to it, so aligned lookups
// return stored samples exactly.
double sample_trilinear(const ImageVolume& volume, const Vec3& index);

// v' = (max + min) - v.
ImageVolume invert_intensity(const ImageVolume& volume);

// Maps each sample through the empirical CDF over `bins` equal-width bins:
//   m(v) = (CDF(v) - CDF_min) / (1 - CDF_min),  m = 0 when CDF_min = 1.
// Output is float64 in [0, 1].
ImageVolume equalize_histogram(const ImageVolume& volume, int bins = 256);

inline constexpr double kDefaultPropagationToleranceMm = 0.5;

// Fraction of the target grid's world box covered by the source grid's box.
double overlap_fraction(const Grid& source, const Grid& target);

// Nearest-neighbour lookup of every target voxel in the source grid (world
// space). Target voxels outside the source become background.
LabelVolume resample_labels_onto(const LabelVolume& source, const Grid& target);

// Copies labels verbatim onto `target` when the grids agree within
// tolerance_mm at every corner, otherwise resamples them. Throws
// GeometryError when less than half of the target is covered by the source.
LabelVolume propagate_labels(const LabelVolume& source, const Grid& target,
                             double tolerance_mm = kDefaultPropagationToleranceMm);

enum class UnmappedPolicy { Error, ToBackground };

// Source class -> target class. Background always maps to background.
//
// Text form, one entry per line, '#' starts a comment:
//   12 = 11              mapping
//   unmapped = error     or to-background
//   source = body40      declared source taxonomy (optional)
//   target = body40      target taxonomy (optional)
//   flagged = 23, 24     sources whose destination is a judgement call
class RemapTable {
 public:
  RemapTable(std::map<std::uint32_t, std::uint32_t> mapping, UnmappedPolicy policy,
             std::string source_taxonomy = {}, std::string target_taxonomy = {},
             std::set<std::uint32_t> flagged = {});

  static RemapTable parse(std::string_view text);
  static RemapTable load(const std::filesystem::path& path);
  // "totalseg117_to_40", "full40", "subset24_t2", "subset13_amos".
  static RemapTable preset(std::string_view name);
  static std::vector<std::string> preset_names();
  static std::string_view preset_text(std::string_view name);

  const std::map<std::uint32_t, std::uint32_t>& mapping() const { return mapping_; }
  UnmappedPolicy policy() const { return policy_; }
  const std::string& source_taxonomy() const { return source_taxonomy_; }
  const std::string& target_taxonomy() const { return target_taxonomy_; }
  const std::set<std::uint32_t>& flagged() const { return flagged_; }

  // Throws RemapError for an unmapped class under the error policy.
  std::uint32_t map(std::uint32_t source) const;

 private:
  std::map<std::uint32_t, std::uint32_t> mapping_;
  UnmappedPolicy policy_;
  std::string source_taxonomy_;
  std::string target_taxonomy_;
  std::set<std::uint32_t> flagged_;
};

LabelVolume remap_labels(const LabelVolume& labels, const RemapTable& table);

}  // namespace wbseg
