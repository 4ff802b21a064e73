#include <doctest.h>

#include "oracles.hpp"
#include "wbseg/error.hpp"
#include "wbseg/stitch.hpp"

using namespace wbseg;

namespace {

ImageVolume filled(const Grid& g, DataKind kind, double value) {
  return ImageVolume(g, kind, std::vector<double>(g.voxel_count(), value));
}

ImageVolume random_station(oracle::Rng& rng, const Grid& g) {
  std::vector<double> data(g.voxel_count());
  for (auto& x : data) x = static_cast<double>(oracle::uniform_int(rng, 0, 200));
  return ImageVolume(g, DataKind::Int16, std::move(data));
}

}  // namespace

TEST_SUITE("stitch") {
  TEST_CASE("union grid examples") {
    const Grid a = Grid::axis_aligned({4, 4, 4}, {1, 1, 1});
    const Grid b = Grid::axis_aligned({4, 4, 4}, {1, 1, 1}, {0, 0, 3});
    const std::vector<Grid> ab{a, b};
    const Grid u = compute_union_grid(ab);
    CHECK(u.dims() == Dims3{4, 4, 7});
    CHECK(u.affine() == a.affine());

    const std::vector<Grid> twice{a, a};
    CHECK(same_geometry(compute_union_grid(twice), a, 0.0));

    // Second station starts 2 mm past the first one's last slice centre.
    const Grid c = Grid::axis_aligned({4, 4, 4}, {1, 1, 1}, {0, 0, 5});
    const std::vector<Grid> gap{a, c};
    CHECK(compute_union_grid(gap).dims() == Dims3{4, 4, 9});

    // Order does not matter for the extent; voxel 0 sits at the minimum corner.
    const std::vector<Grid> ba{b, a};
    const Grid u2 = compute_union_grid(ba);
    CHECK(u2.dims() == Dims3{4, 4, 7});
    CHECK(u2.affine().translation() == Vec3{0, 0, 0});
  }

  TEST_CASE("station set validation") {
    const Grid a = Grid::axis_aligned({4, 4, 4}, {1, 1, 1});
    const std::vector<Grid> one{a};
    CHECK_THROWS_AS(compute_union_grid(one), ArgumentError);
    CHECK_THROWS_AS(compute_union_grid(std::vector<Grid>{}), ArgumentError);
    const std::vector<Grid> spacing{a, Grid::axis_aligned({4, 4, 4}, {1, 1, 2})};
    CHECK_THROWS_AS(compute_union_grid(spacing), GeometryError);
    Mat4 flipped = Mat4::diagonal({1, 1, -1});
    const std::vector<Grid> dirs{a, Grid({4, 4, 4}, {1, 1, 1}, flipped)};
    CHECK_THROWS_AS(compute_union_grid(dirs), GeometryError);
  }

  TEST_CASE("overlap blending") {
    const Grid a = Grid::axis_aligned({2, 2, 4}, {1, 1, 1});
    const Grid b = Grid::axis_aligned({2, 2, 4}, {1, 1, 1}, {0, 0, 3});
    {
      const std::vector<ImageVolume> s{filled(a, DataKind::UInt8, 10), filled(b, DataKind::UInt8, 10)};
      for (const Blend blend : {Blend::Average, Blend::LastWins}) {
        const auto out = stitch_stations(s, blend);
        for (const double x : out.volume.data()) CHECK(x == 10);
        CHECK(out.uncovered_voxels == 0);
      }
    }
    const std::vector<ImageVolume> s{filled(a, DataKind::UInt8, 10), filled(b, DataKind::UInt8, 20)};
    const auto avg = stitch_stations(s, Blend::Average);
    const auto last = stitch_stations(s, Blend::LastWins);
    CHECK(avg.volume.grid().dims() == Dims3{2, 2, 7});
    for (std::int64_t k = 0; k < 7; ++k) {
      const double expect_avg = k < 3 ? 10 : (k == 3 ? 15 : 20);
      const double expect_last = k < 3 ? 10 : 20;
      CHECK(avg.volume.at({1, 1, k}) == expect_avg);
      CHECK(last.volume.at({0, 1, k}) == expect_last);
    }
    CHECK(last.volume.kind() == DataKind::UInt8);

    // 10 and 21 average to 10.5, which uint8 cannot hold.
    const std::vector<ImageVolume> odd{filled(a, DataKind::UInt8, 10), filled(b, DataKind::UInt8, 21)};
    const auto widened = stitch_stations(odd, Blend::Average);
    CHECK(widened.volume.kind() == DataKind::Float64);
    CHECK(widened.volume.at({0, 0, 3}) == 15.5);
  }

  TEST_CASE("gaps are zero and counted") {
    const Grid a = Grid::axis_aligned({2, 2, 4}, {1, 1, 1});
    const Grid c = Grid::axis_aligned({2, 2, 4}, {1, 1, 1}, {0, 0, 6});
    const std::vector<ImageVolume> s{filled(a, DataKind::Int16, 5), filled(c, DataKind::Int16, 7)};
    const auto out = stitch_stations(s);
    CHECK(out.volume.grid().dims() == Dims3{2, 2, 10});
    CHECK(out.uncovered_voxels == 8);
    CHECK(out.volume.at({0, 0, 4}) == 0);
    CHECK(out.volume.at({0, 0, 5}) == 0);
    CHECK(out.volume.at({0, 0, 6}) == 7);
  }

  TEST_CASE("labels use last-wins") {
    const Grid a = Grid::axis_aligned({2, 2, 4}, {1, 1, 1});
    const Grid b = Grid::axis_aligned({2, 2, 4}, {1, 1, 1}, {0, 0, 2});
    const std::vector<LabelVolume> s{LabelVolume(a, std::vector<std::uint32_t>(16, 3)),
                                     LabelVolume(b, std::vector<std::uint32_t>(16, 8))};
    const auto out = stitch_stations(std::span<const LabelVolume>(s));
    CHECK(out.volume.grid().dims() == Dims3{2, 2, 6});
    for (std::int64_t k = 0; k < 6; ++k) CHECK(out.volume.at({1, 0, k}) == (k < 2 ? 3u : 8u));
  }

  TEST_CASE("aligned stations are conserved outside overlaps") {
    oracle::Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
      const Vec3 sp{oracle::uniform_real(rng, 0.5, 3), oracle::uniform_real(rng, 0.5, 3),
                    oracle::uniform_real(rng, 0.5, 3)};
      const int n = static_cast<int>(oracle::uniform_int(rng, 2, 4));
      std::vector<ImageVolume> stations;
      std::vector<Index3> offsets;
      for (int s = 0; s < n; ++s) {
        const Index3 off{oracle::uniform_int(rng, -2, 2), oracle::uniform_int(rng, -2, 2),
                         oracle::uniform_int(rng, 0, 12)};
        offsets.push_back(off);
        const Grid g = Grid::axis_aligned(oracle::random_dims(rng, 6), sp,
                                          {static_cast<double>(off[0]) * sp[0] + 7, static_cast<double>(off[1]) * sp[1],
                                           static_cast<double>(off[2]) * sp[2] - 30});
        stations.push_back(random_station(rng, g));
      }
      const auto out = stitch_stations(stations, Blend::Average, static_cast<unsigned>(oracle::uniform_int(rng, 1, 4)));
      const Grid& u = out.volume.grid();
      // Union box within one voxel of the input boxes.
      WorldBox expected = world_bounds(stations[0].grid());
      for (const auto& st : stations) {
        const WorldBox b = world_bounds(st.grid());
        for (int k = 0; k < 3; ++k) {
          expected.lo[k] = std::min(expected.lo[k], b.lo[k]);
          expected.hi[k] = std::max(expected.hi[k], b.hi[k]);
        }
      }
      const WorldBox got = world_bounds(u);
      for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(got.lo[k] - expected.lo[k]) <= sp[k] + 1e-9);
        CHECK(std::abs(got.hi[k] - expected.hi[k]) <= sp[k] + 1e-9);
      }
      // Single-coverage voxels hold the station's value exactly.
      for (std::size_t l = 0; l < u.voxel_count(); ++l) {
        const Index3 p = u.index_of(l);
        const Vec3 w = voxel_to_world(u, Vec3{static_cast<double>(p[0]), static_cast<double>(p[1]),
                                              static_cast<double>(p[2])});
        int covering = -1, count = 0;
        Index3 local{};
        for (int s = 0; s < n; ++s) {
          const Vec3 v = world_to_voxel(stations[static_cast<std::size_t>(s)].grid(), w);
          const Index3 r{std::llround(v[0]), std::llround(v[1]), std::llround(v[2])};
          if (stations[static_cast<std::size_t>(s)].grid().contains(r)) {
            ++count;
            covering = s;
            local = r;
          }
        }
        if (count == 1) CHECK(out.volume.data()[l] == stations[static_cast<std::size_t>(covering)].at(local));
        if (count == 0) CHECK(out.volume.data()[l] == 0);
      }
    }
  }

  TEST_CASE("stitching is idempotent and worker-independent") {
    oracle::Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
      const Grid a = Grid::axis_aligned({5, 4, 6}, {1.5, 1.5, 3});
      const Grid b = Grid::axis_aligned({5, 4, 6}, {1.5, 1.5, 3}, {0, 0, 3.0 * oracle::uniform_int(rng, 1, 8)});
      const std::vector<ImageVolume> s{random_station(rng, a), random_station(rng, b)};
      const auto one = stitch_stations(s, Blend::Average, 1);
      const auto many = stitch_stations(s, Blend::Average, 4);
      CHECK(one.volume == many.volume);
      const std::vector<ImageVolume> self{one.volume, one.volume};
      CHECK(stitch_stations(self, Blend::LastWins).volume == one.volume);
    }
  }
}
