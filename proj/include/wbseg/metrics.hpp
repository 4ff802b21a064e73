#pragma once

// Overlap and surface-distance metrics between a prediction and a reference
// mask on the same grid.

#include <optional>
#include <vector>

#include "wbseg/volume.hpp"

namespace wbseg {

// 2|A n B| / (|A| + |B|). Undefined when both masks are empty, 0 when exactly
// one is. Throws GeometryError if the masks are on different grids.
std::optional<double> dice(const BinaryMask& a, const BinaryMask& b);

// Directed nearest-surface distances (mm) in both directions. Surfaces are
// the 6-connected boundary voxels; distances are Euclidean with per-axis
// spacing weights. Entries follow the linear order of the surface voxels.
struct SurfaceDistanceSet {
  std::vector<double> a_to_b;
  std::vector<double> b_to_a;
};

// nullopt when either mask is empty.
std::optional<SurfaceDistanceSet> surface_distances(const BinaryMask& a, const BinaryMask& b);

// 95th percentile of the pooled a->b and b->a distances. nullopt when
// either directed set is empty.
std::optional<double> hd95(const SurfaceDistanceSet& distances);

// Convenience: surface_distances then hd95.
std::optional<double> hd95(const BinaryMask& a, const BinaryMask& b);

}  // namespace wbseg
