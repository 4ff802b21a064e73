#include "wbseg/stitch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "wbseg/error.hpp"
#include "wbseg/preprocess.hpp"

namespace wbseg {

namespace {

constexpr double kCoverageEps = 1e-6;

void check_station_set(std::span<const Grid> stations) {
  if (stations.size() < 2) {
    throw ArgumentError(fmt::format("stitching needs at least 2 stations, got {}", stations.size()));
  }
  const Grid& ref = stations.front();
  const auto ref_dir = ref.direction();
  for (std::size_t s = 1; s < stations.size(); ++s) {
    const Grid& g = stations[s];
    for (int k = 0; k < 3; ++k) {
      if (std::abs(g.spacing()[k] - ref.spacing()[k]) > 1e-6 * ref.spacing()[k]) {
        throw GeometryError(fmt::format(
            "station {} spacing {} differs from station 0 spacing {} on axis {}; resample first", s,
            g.spacing()[k], ref.spacing()[k], k));
      }
    }
    const auto dir = g.direction();
    for (std::size_t i = 0; i < 9; ++i) {
      if (std::abs(dir[i] - ref_dir[i]) >= 1e-3) {
        throw GeometryError(fmt::format("station {} is not parallel to station 0", s));
      }
    }
  }
}

// Output-voxel -> station-voxel maps.
std::vector<Mat4> station_maps(std::span<const Grid> stations, const Grid& out) {
  std::vector<Mat4> maps;
  maps.reserve(stations.size());
  for (const Grid& g : stations) maps.push_back(g.inverse_affine() * out.affine());
  return maps;
}

bool covers(const Grid& g, const Vec3& p) {
  for (int k = 0; k < 3; ++k) {
    if (p[k] < -kCoverageEps || p[k] > static_cast<double>(g.dims()[k] - 1) + kCoverageEps) return false;
  }
  return true;
}

// Runs fn(k_begin, k_end, slab_index) over disjoint z-slabs.
template <typename Fn>
void for_each_slab(std::int64_t nz, unsigned workers, Fn&& fn) {
  const auto n = static_cast<std::int64_t>(std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(nz)));
  if (n == 1) {
    fn(0, nz, 0);
    return;
  }
  std::vector<std::thread> threads;
  for (std::int64_t t = 0; t < n; ++t) {
    threads.emplace_back([&, t] { fn(nz * t / n, nz * (t + 1) / n, static_cast<std::size_t>(t)); });
  }
  for (auto& th : threads) th.join();
}

template <typename Volume>
std::vector<Grid> grids_of(std::span<const Volume> stations) {
  std::vector<Grid> grids;
  grids.reserve(stations.size());
  for (const auto& s : stations) grids.push_back(s.grid());
  return grids;
}

}  // namespace

Grid compute_union_grid(std::span<const Grid> stations) {
  check_station_set(stations);
  const Grid& ref = stations.front();
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  for (const Grid& g : stations) {
    const Mat4 to_ref = ref.inverse_affine() * g.affine();
    for (int c = 0; c < 8; ++c) {
      Vec3 corner{};
      for (int k = 0; k < 3; ++k) corner[k] = ((c >> k) & 1) ? static_cast<double>(g.dims()[k] - 1) : 0.0;
      const Vec3 p = to_ref.apply(corner);
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
  }
  Dims3 dims{};
  for (int k = 0; k < 3; ++k) {
    dims[k] = static_cast<std::int64_t>(std::ceil(hi[k] - lo[k] - kCoverageEps)) + 1;
  }
  Mat4 affine = ref.affine();
  const Vec3 origin = ref.affine().apply(lo);
  affine(0, 3) = origin[0];
  affine(1, 3) = origin[1];
  affine(2, 3) = origin[2];
  return Grid(dims, ref.spacing(), affine);
}

StitchedImage stitch_stations(std::span<const ImageVolume> stations, Blend blend, unsigned workers) {
  const auto grids = grids_of(stations);
  Grid out = compute_union_grid(grids);
  const auto maps = station_maps(grids, out);
  const auto [nx, ny, nz] = out.dims();
  std::vector<double> data(out.voxel_count(), 0.0);
  std::vector<std::size_t> uncovered(std::max(1u, workers), 0);

  for_each_slab(nz, workers, [&](std::int64_t k0, std::int64_t k1, std::size_t slab) {
    for (std::int64_t k = k0; k < k1; ++k) {
      for (std::int64_t j = 0; j < ny; ++j) {
        for (std::int64_t i = 0; i < nx; ++i) {
          const Vec3 o{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
          double sum = 0.0;
          int hits = 0;
          double last = 0.0;
          for (std::size_t s = 0; s < stations.size(); ++s) {
            const Vec3 p = maps[s].apply(o);
            if (!covers(grids[s], p)) continue;
            const double v = sample_trilinear(stations[s], p);
            sum += v;
            last = v;
            ++hits;
          }
          double& dst = data[out.linear(i, j, k)];
          if (hits == 0) {
            ++uncovered[slab];
          } else if (blend == Blend::LastWins || hits == 1) {
            dst = last;
          } else {
            dst = sum / hits;
          }
        }
      }
    }
  });

  DataKind kind = stations.front().kind();
  const bool same_kind = std::all_of(stations.begin(), stations.end(),
                                     [kind](const ImageVolume& v) { return v.kind() == kind; });
  if (!same_kind || !std::all_of(data.begin(), data.end(), [kind](double v) { return representable(kind, v); })) {
    kind = DataKind::Float64;
  }
  std::size_t total_uncovered = 0;
  for (auto u : uncovered) total_uncovered += u;
  return {ImageVolume(std::move(out), kind, std::move(data)), total_uncovered};
}

StitchedLabels stitch_stations(std::span<const LabelVolume> stations, unsigned workers) {
  const auto grids = grids_of(stations);
  Grid out = compute_union_grid(grids);
  const auto maps = station_maps(grids, out);
  const auto [nx, ny, nz] = out.dims();
  std::vector<std::uint32_t> labels(out.voxel_count(), 0);
  std::vector<std::size_t> uncovered(std::max(1u, workers), 0);

  for_each_slab(nz, workers, [&](std::int64_t k0, std::int64_t k1, std::size_t slab) {
    for (std::int64_t k = k0; k < k1; ++k) {
      for (std::int64_t j = 0; j < ny; ++j) {
        for (std::int64_t i = 0; i < nx; ++i) {
          const Vec3 o{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
          bool hit = false;
          for (std::size_t s = stations.size(); s-- > 0;) {
            const Vec3 p = maps[s].apply(o);
            if (!covers(grids[s], p)) continue;
            Index3 idx{};
            for (int a = 0; a < 3; ++a) {
              idx[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(p[a] + 0.5)), 0,
                                                grids[s].dims()[a] - 1);
            }
            labels[out.linear(i, j, k)] = stations[s].at(idx);
            hit = true;
            break;
          }
          if (!hit) ++uncovered[slab];
        }
      }
    }
  });

  std::size_t total_uncovered = 0;
  for (auto u : uncovered) total_uncovered += u;
  return {LabelVolume(std::move(out), std::move(labels), stations.front().storage()), total_uncovered};
}

}  // namespace wbseg
