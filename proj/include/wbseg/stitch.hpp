#pragma once

// Whole-body station stitching: per-station sub-volumes are placed on the
// grid spanning all of them.

#include <cstddef>
#include <span>
#include <vector>

#include "wbseg/volume.hpp"

namespace wbseg {

enum class Blend {
  Average,   // arithmetic mean of all covering stations
  LastWins,  // highest station index wins
};

// Grid covering every station's extent at the shared spacing and orientation;
// voxel 0 sits at the minimum corner in the stations' voxel frame. Needs at
// least two stations with equal spacing and parallel axes (direction cosines
// within 1e-3), otherwise GeometryError / ArgumentError.
Grid compute_union_grid(std::span<const Grid> stations);

struct StitchedImage {
  ImageVolume volume;
  // Output voxels no station covers; they hold 0.
  std::size_t uncovered_voxels = 0;
};

struct StitchedLabels {
  LabelVolume volume;
  std::size_t uncovered_voxels = 0;
};

// Intensities are sampled trilinearly (exact for aligned grids). The output
// keeps the stations' data kind when every stitched value fits it.
StitchedImage stitch_stations(std::span<const ImageVolume> stations, Blend blend = Blend::Average,
                              unsigned workers = 1);

// Labels are looked up nearest-neighbour and always use last-wins.
StitchedLabels stitch_stations(std::span<const LabelVolume> stations, unsigned workers = 1);

}  // namespace wbseg
