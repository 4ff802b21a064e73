#pragma once

// 3D connected-component labelling and vessel consistency.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wbseg/volume.hpp"

namespace wbseg {

enum class Connectivity { Face6 = 6, Full26 = 26 };

// Throws ArgumentError for anything but 6 or 26.
Connectivity connectivity_from_int(int n);

struct ComponentLabeling {
  // Per voxel, 0 = background, components numbered 1..count in order of
  // their first voxel in linear scan order.
  std::vector<std::uint32_t> ids;
  std::size_t count = 0;
  // sizes[c - 1] is the voxel count of component c.
  std::vector<std::size_t> sizes;
};

// Two-pass union-find labelling.
ComponentLabeling label_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::Full26);

// Share of segmentations of one class that form a single component.
struct VesselConsistencyReport {
  std::uint32_t class_id = 0;
  // Samples with at least one component.
  std::size_t n = 0;
  // Samples with zero components: missing segmentations, excluded from n.
  std::size_t missing = 0;
  double vc = 0.0;
  double multi_fraction = 0.0;
  // Over samples with more than one component; std uses n - 1.
  std::optional<double> mean_multi;
  std::optional<double> std_multi;

  bool missing_flag() const { return missing > 0; }
};

// Throws ArgumentError for an empty list, negative counts, or when every
// count is zero.
VesselConsistencyReport vessel_consistency(std::span<const std::int64_t> component_counts,
                                           std::uint32_t class_id = 0);

}  // namespace wbseg
