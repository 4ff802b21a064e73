#include "wbseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "wbseg/error.hpp"
#include "wbseg/stats.hpp"

namespace wbseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_grid(const BinaryMask& a, const BinaryMask& b) {
  if (!same_geometry(a.grid(), b.grid())) throw GeometryError("masks are not on the same grid");
}

struct Box {
  Index3 lo;
  Index3 hi;  // inclusive
  std::int64_t extent(int k) const { return hi[k] - lo[k] + 1; }
};

Box foreground_box(const BinaryMask& a, const BinaryMask& b) {
  const Grid& g = a.grid();
  Box box{{g.dims()[0], g.dims()[1], g.dims()[2]}, {-1, -1, -1}};
  const auto [nx, ny, nz] = g.dims();
  const auto ba = a.bits();
  const auto bb = b.bits();
  std::size_t l = 0;
  for (std::int64_t k = 0; k < nz; ++k) {
    for (std::int64_t j = 0; j < ny; ++j) {
      for (std::int64_t i = 0; i < nx; ++i, ++l) {
        if (!ba[l] && !bb[l]) continue;
        box.lo = {std::min(box.lo[0], i), std::min(box.lo[1], j), std::min(box.lo[2], k)};
        box.hi = {std::max(box.hi[0], i), std::max(box.hi[1], j), std::max(box.hi[2], k)};
      }
    }
  }
  return box;
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line:
// out[q] = min_p (spacing * (q - p))^2 + f[p]. f may hold +inf.
class LineTransform {
 public:
  explicit LineTransform(std::size_t n) : f_(n), d_(n), v_(n), z_(n + 1) {}

  std::vector<double>& input() { return f_; }
  const std::vector<double>& output() const { return d_; }

  void run(std::size_t n, double spacing) {
    const double s2 = spacing * spacing;
    const auto pos2 = [s2](std::size_t q) { return s2 * static_cast<double>(q) * static_cast<double>(q); };
    std::ptrdiff_t k = -1;
    for (std::size_t q = 0; q < n; ++q) {
      if (f_[q] == kInf) continue;
      double sect = -kInf;
      while (k >= 0) {
        const std::size_t p = v_[static_cast<std::size_t>(k)];
        sect = ((f_[q] + pos2(q)) - (f_[p] + pos2(p))) / (2.0 * s2 * static_cast<double>(q - p));
        if (sect <= z_[static_cast<std::size_t>(k)]) {
          --k;
        } else {
          break;
        }
      }
      ++k;
      v_[static_cast<std::size_t>(k)] = q;
      z_[static_cast<std::size_t>(k)] = k == 0 ? -kInf : sect;
      z_[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
      std::fill(d_.begin(), d_.begin() + static_cast<std::ptrdiff_t>(n), kInf);
      return;
    }
    std::size_t j = 0;
    for (std::size_t q = 0; q < n; ++q) {
      while (z_[j + 1] < static_cast<double>(q)) ++j;
      const std::size_t p = v_[j];
      const double dq = (static_cast<double>(q) - static_cast<double>(p)) * spacing;
      d_[q] = dq * dq + f_[p];
    }
  }

 private:
  std::vector<double> f_;
  std::vector<double> d_;
  std::vector<std::size_t> v_;
  std::vector<double> z_;
};

// Exact squared Euclidean distance to the nearest feature voxel inside a box,
// separable over x, then y, then z.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& features, const Dims3& dims,
                                               const Vec3& spacing) {
  const auto nx = static_cast<std::size_t>(dims[0]);
  const auto ny = static_cast<std::size_t>(dims[1]);
  const auto nz = static_cast<std::size_t>(dims[2]);
  std::vector<double> dist(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) dist[i] = features[i] ? 0.0 : kInf;

  LineTransform line(std::max({nx, ny, nz}));
  const auto pass = [&](std::size_t n, std::size_t stride, std::size_t lines, auto base_of, double spacing_k) {
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t base = base_of(l);
      for (std::size_t q = 0; q < n; ++q) line.input()[q] = dist[base + q * stride];
      line.run(n, spacing_k);
      for (std::size_t q = 0; q < n; ++q) dist[base + q * stride] = line.output()[q];
    }
  };
  pass(nx, 1, ny * nz, [&](std::size_t l) { return l * nx; }, spacing[0]);
  pass(ny, nx, nx * nz, [&](std::size_t l) { return (l / nx) * nx * ny + (l % nx); }, spacing[1]);
  pass(nz, nx * ny, nx * ny, [&](std::size_t l) { return l; }, spacing[2]);
  return dist;
}

// Distances from every surface voxel of `from` to the surface of `to`,
// evaluated inside `box`.
std::vector<double> directed(const std::vector<Index3>& from, const std::vector<Index3>& to, const Box& box,
                             const Vec3& spacing) {
  const Dims3 dims{box.extent(0), box.extent(1), box.extent(2)};
  const auto local = [&](const Index3& v) {
    return static_cast<std::size_t>((v[0] - box.lo[0]) + dims[0] * ((v[1] - box.lo[1]) + dims[1] * (v[2] - box.lo[2])));
  };
  std::vector<std::uint8_t> features(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), 0);
  for (const auto& v : to) features[local(v)] = 1;
  const auto dist = squared_distance_transform(features, dims, spacing);
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& v : from) out.push_back(std::sqrt(dist[local(v)]));
  return out;
}

}  // namespace

std::optional<double> dice(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a, b);
  const std::size_t total = a.count() + b.count();
  if (total == 0) return std::nullopt;
  const auto ba = a.bits();
  const auto bb = b.bits();
  std::size_t overlap = 0;
  for (std::size_t i = 0; i < ba.size(); ++i) overlap += static_cast<std::size_t>(ba[i] & bb[i]);
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(total);
}

std::optional<SurfaceDistanceSet> surface_distances(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a, b);
  if (a.empty() || b.empty()) return std::nullopt;
  const Box box = foreground_box(a, b);
  const auto sa = surface_voxels(a);
  const auto sb = surface_voxels(b);
  const Vec3& spacing = a.grid().spacing();
  return SurfaceDistanceSet{directed(sa, sb, box, spacing), directed(sb, sa, box, spacing)};
}

std::optional<double> hd95(const SurfaceDistanceSet& distances) {
  if (distances.a_to_b.empty() || distances.b_to_a.empty()) return std::nullopt;
  std::vector<double> pooled;
  pooled.reserve(distances.a_to_b.size() + distances.b_to_a.size());
  pooled.insert(pooled.end(), distances.a_to_b.begin(), distances.a_to_b.end());
  pooled.insert(pooled.end(), distances.b_to_a.begin(), distances.b_to_a.end());
  return percentile(std::move(pooled), 95.0);
}

std::optional<double> hd95(const BinaryMask& a, const BinaryMask& b) {
  const auto d = surface_distances(a, b);
  if (!d) return std::nullopt;
  return hd95(*d);
}

}  // namespace wbseg
