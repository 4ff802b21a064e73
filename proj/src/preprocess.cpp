#include "wbseg/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "wbseg/error.hpp"
#include "wbseg/taxonomy.hpp"

namespace wbseg {

namespace {

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-6 ? r : x;
}

// Continuous input index of output voxel `o` for a spacing-only resample.
Vec3 source_index(const Index3& o, const Vec3& ratio) {
  return {static_cast<double>(o[0]) * ratio[0], static_cast<double>(o[1]) * ratio[1],
          static_cast<double>(o[2]) * ratio[2]};
}

Index3 nearest_clamped(const Vec3& p, const Dims3& dims) {
  Index3 out{};
  for (int k = 0; k < 3; ++k) out[k] = std::clamp<std::int64_t>(round_half_up(p[k]), 0, dims[k] - 1);
  return out;
}

template <typename Fn>
void for_each_voxel(const Grid& g, Fn&& fn) {
  const auto [nx, ny, nz] = g.dims();
  std::size_t linear = 0;
  for (std::int64_t k = 0; k < nz; ++k) {
    for (std::int64_t j = 0; j < ny; ++j) {
      for (std::int64_t i = 0; i < nx; ++i) fn(Index3{i, j, k}, linear++);
    }
  }
}

Vec3 spacing_ratio(const Grid& in, const Grid& out) {
  return {out.spacing()[0] / in.spacing()[0], out.spacing()[1] / in.spacing()[1],
          out.spacing()[2] / in.spacing()[2]};
}

}  // namespace

Grid resampled_grid(const Grid& grid, const Vec3& target) {
  Dims3 dims{};
  Mat4 affine = grid.affine();
  for (int k = 0; k < 3; ++k) {
    if (!(target[k] > 0.0)) throw PolicyError(fmt::format("target spacing {} must be > 0", target[k]));
    dims[k] = std::max<std::int64_t>(
        1, round_half_up(static_cast<double>(grid.dims()[k]) * grid.spacing()[k] / target[k]));
    const double scale = target[k] / grid.spacing()[k];
    for (int r = 0; r < 3; ++r) affine(r, k) *= scale;
  }
  return Grid(dims, target, affine);
}

double sample_trilinear(const ImageVolume& volume, const Vec3& index) {
  const Grid& g = volume.grid();
  std::array<std::int64_t, 3> lo{};
  std::array<std::int64_t, 3> hi{};
  std::array<double, 3> frac{};
  for (int k = 0; k < 3; ++k) {
    const double x = std::clamp(snap(index[k]), 0.0, static_cast<double>(g.dims()[k] - 1));
    lo[k] = static_cast<std::int64_t>(std::floor(x));
    frac[k] = x - static_cast<double>(lo[k]);
    hi[k] = frac[k] > 0.0 ? std::min(lo[k] + 1, g.dims()[k] - 1) : lo[k];
  }
  const auto data = volume.data();
  const auto v = [&](bool xi, bool yi, bool zi) {
    return data[g.linear(xi ? hi[0] : lo[0], yi ? hi[1] : lo[1], zi ? hi[2] : lo[2])];
  };
  const double c00 = v(false, false, false) * (1 - frac[0]) + v(true, false, false) * frac[0];
  const double c10 = v(false, true, false) * (1 - frac[0]) + v(true, true, false) * frac[0];
  const double c01 = v(false, false, true) * (1 - frac[0]) + v(true, false, true) * frac[0];
  const double c11 = v(false, true, true) * (1 - frac[0]) + v(true, true, true) * frac[0];
  const double c0 = c00 * (1 - frac[1]) + c10 * frac[1];
  const double c1 = c01 * (1 - frac[1]) + c11 * frac[1];
  return c0 * (1 - frac[2]) + c1 * frac[2];
}

ImageVolume resample(const ImageVolume& volume, const ResamplePolicy& policy) {
  Grid out = resampled_grid(volume.grid(), policy.target_spacing);
  const Vec3 ratio = spacing_ratio(volume.grid(), out);
  std::vector<double> data(out.voxel_count());
  if (policy.interpolation == Interpolation::Nearest) {
    const auto src = volume.data();
    for_each_voxel(out, [&](const Index3& o, std::size_t l) {
      data[l] = src[volume.grid().linear(nearest_clamped(source_index(o, ratio), volume.grid().dims()))];
    });
    return ImageVolume(std::move(out), volume.kind(), std::move(data));
  }
  for_each_voxel(out, [&](const Index3& o, std::size_t l) {
    data[l] = sample_trilinear(volume, source_index(o, ratio));
  });
  return ImageVolume(std::move(out), DataKind::Float64, std::move(data));
}

LabelVolume resample(const LabelVolume& volume, const ResamplePolicy& policy) {
  if (policy.interpolation != Interpolation::Nearest) {
    throw PolicyError("label volumes can only be resampled with nearest-neighbour interpolation");
  }
  Grid out = resampled_grid(volume.grid(), policy.target_spacing);
  const Vec3 ratio = spacing_ratio(volume.grid(), out);
  const auto src = volume.labels();
  std::vector<std::uint32_t> labels(out.voxel_count());
  for_each_voxel(out, [&](const Index3& o, std::size_t l) {
    labels[l] = src[volume.grid().linear(nearest_clamped(source_index(o, ratio), volume.grid().dims()))];
  });
  return LabelVolume(std::move(out), std::move(labels), volume.storage());
}

ImageVolume invert_intensity(const ImageVolume& volume) {
  const double lo = volume.min();
  const double hi = volume.max();
  std::vector<double> data(volume.data().begin(), volume.data().end());
  for (double& v : data) v = (hi + lo) - v;
  return ImageVolume(volume.grid(), volume.kind(), std::move(data));
}

ImageVolume equalize_histogram(const ImageVolume& volume, int bins) {
  if (bins < 2) throw ArgumentError(fmt::format("histogram needs at least 2 bins, got {}", bins));
  const auto src = volume.data();
  const double lo = volume.min();
  const double hi = volume.max();
  std::vector<double> out(src.size(), 0.0);
  if (!(hi > lo)) return ImageVolume(volume.grid(), DataKind::Float64, std::move(out));

  const auto nbins = static_cast<std::size_t>(bins);
  const double width = hi - lo;
  const auto bin_of = [&](double v) {
    const auto b = static_cast<std::size_t>(std::floor((v - lo) / width * static_cast<double>(bins)));
    return std::min(b, nbins - 1);
  };
  std::vector<std::size_t> cumulative(nbins, 0);
  for (double v : src) ++cumulative[bin_of(v)];
  for (std::size_t b = 1; b < nbins; ++b) cumulative[b] += cumulative[b - 1];

  const std::size_t total = src.size();
  const std::size_t first = cumulative[bin_of(lo)];
  if (first == total) return ImageVolume(volume.grid(), DataKind::Float64, std::move(out));
  const double denom = static_cast<double>(total - first);
  for (std::size_t i = 0; i < src.size(); ++i) {
    out[i] = static_cast<double>(cumulative[bin_of(src[i])] - first) / denom;
  }
  return ImageVolume(volume.grid(), DataKind::Float64, std::move(out));
}

double overlap_fraction(const Grid& source, const Grid& target) {
  const WorldBox t = world_bounds(target);
  return intersect(world_bounds(source), t).volume() / t.volume();
}

LabelVolume resample_labels_onto(const LabelVolume& source, const Grid& target) {
  const Grid& sg = source.grid();
  const Mat4 map = sg.inverse_affine() * target.affine();
  const auto src = source.labels();
  std::vector<std::uint32_t> labels(target.voxel_count(), 0);
  for_each_voxel(target, [&](const Index3& o, std::size_t l) {
    const Vec3 p = map.apply({static_cast<double>(o[0]), static_cast<double>(o[1]), static_cast<double>(o[2])});
    const Index3 idx{round_half_up(p[0]), round_half_up(p[1]), round_half_up(p[2])};
    if (sg.contains(idx)) labels[l] = src[sg.linear(idx)];
  });
  return LabelVolume(target, std::move(labels), source.storage());
}

LabelVolume propagate_labels(const LabelVolume& source, const Grid& target, double tolerance_mm) {
  if (tolerance_mm < 0) throw ArgumentError("propagation tolerance must be >= 0");
  if (same_geometry(source.grid(), target, tolerance_mm)) {
    return LabelVolume(target, std::vector<std::uint32_t>(source.labels().begin(), source.labels().end()),
                       source.storage());
  }
  const double overlap = overlap_fraction(source.grid(), target);
  if (overlap < 0.5) {
    throw GeometryError(fmt::format(
        "source labels cover {:.1f}% of the target field of view; refusing to propagate", 100.0 * overlap));
  }
  return resample_labels_onto(source, target);
}

RemapTable::RemapTable(std::map<std::uint32_t, std::uint32_t> mapping, UnmappedPolicy policy,
                       std::string source_taxonomy, std::string target_taxonomy,
                       std::set<std::uint32_t> flagged)
    : mapping_(std::move(mapping)),
      policy_(policy),
      source_taxonomy_(std::move(source_taxonomy)),
      target_taxonomy_(std::move(target_taxonomy)),
      flagged_(std::move(flagged)) {
  if (mapping_.count(0) != 0) throw ArgumentError("remap table must not map background (0)");
  if (!source_taxonomy_.empty()) {
    const ClassTaxonomy& src = taxonomy_by_name(source_taxonomy_);
    for (const auto& [from, _] : mapping_) {
      if (!src.contains(from)) {
        throw ArgumentError(fmt::format("remap source {} is not a class of {}", from, source_taxonomy_));
      }
    }
    if (policy_ == UnmappedPolicy::Error) {
      for (const auto& c : src.classes()) {
        if (mapping_.count(c.id) == 0) {
          throw ArgumentError(fmt::format("remap table does not cover {} class {} ({}) and unmapped classes are errors",
                                          source_taxonomy_, c.id, c.name));
        }
      }
    }
  }
  if (!target_taxonomy_.empty()) {
    const ClassTaxonomy& dst = taxonomy_by_name(target_taxonomy_);
    for (const auto& [from, to] : mapping_) {
      if (to != 0 && !dst.contains(to)) {
        throw ArgumentError(fmt::format("remap target {} (from {}) is not a class of {}", to, from, target_taxonomy_));
      }
    }
  }
}

std::uint32_t RemapTable::map(std::uint32_t source) const {
  if (source == 0) return 0;
  const auto it = mapping_.find(source);
  if (it != mapping_.end()) return it->second;
  if (policy_ == UnmappedPolicy::ToBackground) return 0;
  throw RemapError(fmt::format("class {} has no entry in the remap table", source));
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint32_t parse_id(std::string_view s, std::size_t line_no) {
  s = trim(s);
  std::uint32_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ArgumentError(fmt::format("remap table line {}: '{}' is not a class id", line_no, s));
  }
  return v;
}

}  // namespace

RemapTable RemapTable::parse(std::string_view text) {
  std::map<std::uint32_t, std::uint32_t> mapping;
  UnmappedPolicy policy = UnmappedPolicy::Error;
  std::string source;
  std::string target;
  std::set<std::uint32_t> flagged;

  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ArgumentError(fmt::format("remap table line {}: expected 'key = value'", line_no));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "unmapped") {
      if (value == "error") {
        policy = UnmappedPolicy::Error;
      } else if (value == "to-background") {
        policy = UnmappedPolicy::ToBackground;
      } else {
        throw ArgumentError(fmt::format("remap table line {}: unknown unmapped policy '{}'", line_no, value));
      }
    } else if (key == "source") {
      source = std::string(value);
    } else if (key == "target") {
      target = std::string(value);
    } else if (key == "flagged") {
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        flagged.insert(parse_id(rest.substr(0, comma), line_no));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
    } else {
      const std::uint32_t from = parse_id(key, line_no);
      if (!mapping.emplace(from, parse_id(value, line_no)).second) {
        throw ArgumentError(fmt::format("remap table line {}: class {} mapped twice", line_no, from));
      }
    }
  }
  return RemapTable(std::move(mapping), policy, std::move(source), std::move(target), std::move(flagged));
}

RemapTable RemapTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open remap table {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

RemapTable RemapTable::preset(std::string_view name) { return parse(preset_text(name)); }

LabelVolume remap_labels(const LabelVolume& labels, const RemapTable& table) {
  const auto src = labels.labels();
  std::vector<std::uint32_t> out(src.size());
  // Volumes hold few distinct classes; memoise the last lookup.
  std::uint32_t last_from = 0;
  std::uint32_t last_to = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != last_from) {
      last_from = src[i];
      last_to = table.map(src[i]);
    }
    out[i] = last_to;
  }
  LabelVolume result(labels.grid(), std::move(out), labels.storage());
  if (!table.target_taxonomy().empty()) return result.with_taxonomy(taxonomy_by_name(table.target_taxonomy()));
  return result;
}

}  // namespace wbseg
