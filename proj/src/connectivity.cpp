#include "wbseg/connectivity.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "wbseg/error.hpp"
#include "wbseg/stats.hpp"

namespace wbseg {

Connectivity connectivity_from_int(int n) {
  if (n == 6) return Connectivity::Face6;
  if (n == 26) return Connectivity::Full26;
  throw ArgumentError(fmt::format("connectivity must be 6 or 26, got {}", n));
}

namespace {

class DisjointSet {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

struct Offset {
  std::int64_t di, dj, dk;
};

// Neighbours already visited in a forward linear scan.
std::vector<Offset> backward_neighbours(Connectivity c) {
  std::vector<Offset> out;
  for (std::int64_t dk = -1; dk <= 0; ++dk) {
    for (std::int64_t dj = -1; dj <= 1; ++dj) {
      for (std::int64_t di = -1; di <= 1; ++di) {
        if (dk == 0 && (dj > 0 || (dj == 0 && di >= 0))) continue;
        const int nonzero = (di != 0) + (dj != 0) + (dk != 0);
        if (c == Connectivity::Face6 && nonzero != 1) continue;
        out.push_back({di, dj, dk});
      }
    }
  }
  return out;
}

}  // namespace

ComponentLabeling label_components(const BinaryMask& mask, Connectivity connectivity) {
  const Grid& g = mask.grid();
  const auto [nx, ny, nz] = g.dims();
  const auto bits = mask.bits();
  const auto offsets = backward_neighbours(connectivity);

  ComponentLabeling out;
  out.ids.assign(bits.size(), 0);
  // Provisional labels are stored +1 so that 0 stays background.
  DisjointSet sets;
  std::size_t l = 0;
  for (std::int64_t k = 0; k < nz; ++k) {
    for (std::int64_t j = 0; j < ny; ++j) {
      for (std::int64_t i = 0; i < nx; ++i, ++l) {
        if (!bits[l]) continue;
        std::uint32_t label = 0;
        for (const auto& o : offsets) {
          const std::int64_t ni = i + o.di;
          const std::int64_t nj = j + o.dj;
          const std::int64_t nk = k + o.dk;
          if (ni < 0 || nj < 0 || nk < 0 || ni >= nx || nj >= ny) continue;
          const std::uint32_t n = out.ids[g.linear(ni, nj, nk)];
          if (n == 0) continue;
          if (label == 0) {
            label = n;
          } else if (n != label) {
            sets.unite(label - 1, n - 1);
          }
        }
        out.ids[l] = label != 0 ? label : sets.make() + 1;
      }
    }
  }

  std::vector<std::uint32_t> final_id(sets.size(), 0);
  for (auto& id : out.ids) {
    if (id == 0) continue;
    const std::uint32_t root = sets.find(id - 1);
    if (final_id[root] == 0) {
      final_id[root] = static_cast<std::uint32_t>(++out.count);
      out.sizes.push_back(0);
    }
    id = final_id[root];
    ++out.sizes[id - 1];
  }
  return out;
}

VesselConsistencyReport vessel_consistency(std::span<const std::int64_t> counts, std::uint32_t class_id) {
  if (counts.empty()) throw ArgumentError("vessel consistency of an empty sample");
  VesselConsistencyReport r;
  r.class_id = class_id;
  std::size_t singles = 0;
  std::vector<double> multi;
  for (const auto c : counts) {
    if (c < 0) throw ArgumentError(fmt::format("negative component count {}", c));
    if (c == 0) {
      ++r.missing;
    } else if (c == 1) {
      ++singles;
    } else {
      multi.push_back(static_cast<double>(c));
    }
  }
  r.n = counts.size() - r.missing;
  if (r.n == 0) throw ArgumentError("every sample is a missing segmentation");
  const auto n = static_cast<double>(r.n);
  r.vc = static_cast<double>(singles) / n;
  r.multi_fraction = static_cast<double>(multi.size()) / n;
  if (!multi.empty()) {
    const MeanStd ms = mean_std(multi);
    r.mean_multi = ms.mean;
    r.std_multi = ms.std;
  }
  return r;
}

}  // namespace wbseg
