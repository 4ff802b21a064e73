#include <doctest.h>

#include "oracles.hpp"
#include "wbseg/connectivity.hpp"
#include "wbseg/error.hpp"

using namespace wbseg;

namespace {

// Mask with axes reversed: voxel (i, j, k) -> (nx-1-i, ny-1-j, nz-1-k).
std::vector<std::size_t> reversal(const Grid& g) {
  const auto d = g.dims();
  std::vector<std::size_t> to(g.voxel_count());
  for (std::size_t l = 0; l < to.size(); ++l) {
    const Index3 p = g.index_of(l);
    to[l] = g.linear(d[0] - 1 - p[0], d[1] - 1 - p[1], d[2] - 1 - p[2]);
  }
  return to;
}

}  // namespace

TEST_SUITE("connectivity") {
  TEST_CASE("examples") {
    const Grid g = Grid::axis_aligned({3, 3, 3}, {1, 1, 1});
    CHECK(label_components(BinaryMask(g, std::vector<std::uint8_t>(27, 0))).count == 0);
    const BinaryMask full(g, std::vector<std::uint8_t>(27, 1));
    CHECK(label_components(full, Connectivity::Face6).count == 1);
    CHECK(label_components(full, Connectivity::Full26).count == 1);
    CHECK(label_components(full).sizes == std::vector<std::size_t>{27});

    std::vector<std::uint8_t> bits(27, 0);
    bits[g.linear(0, 0, 0)] = 1;
    bits[g.linear(1, 1, 1)] = 1;
    const BinaryMask diag(g, bits);
    CHECK(label_components(diag, Connectivity::Face6).count == 2);
    CHECK(label_components(diag, Connectivity::Full26).count == 1);

    CHECK(connectivity_from_int(6) == Connectivity::Face6);
    CHECK_THROWS_AS(connectivity_from_int(18), ArgumentError);
  }

  TEST_CASE("ids follow first appearance and sizes add up") {
    const Grid g = Grid::axis_aligned({5, 1, 1}, {1, 1, 1});
    const auto c = label_components(BinaryMask(g, {1, 0, 1, 1, 0}), Connectivity::Face6);
    CHECK(c.ids == std::vector<std::uint32_t>{1, 0, 2, 2, 0});
    CHECK(c.sizes == std::vector<std::size_t>{1, 2});
  }

  TEST_CASE("matches flood fill on random masks") {
    oracle::Rng rng(61);
    for (int trial = 0; trial < 400; ++trial) {
      const Grid g = Grid::axis_aligned(oracle::random_dims(rng, 10), {1, 1, 1});
      const BinaryMask m = oracle::random_mask(rng, g, oracle::uniform_real(rng, 0.05, 0.7));
      for (const int conn : {6, 26}) {
        const auto got = label_components(m, connectivity_from_int(conn));
        const auto want = oracle::flood_fill(m, conn);
        CHECK(oracle::same_partition(got.ids, want));
        CHECK(got.count == *std::max_element(want.begin(), want.end()));
        std::size_t total = 0;
        for (const auto s : got.sizes) total += s;
        CHECK(total == m.count());
      }
      CHECK(label_components(m, Connectivity::Full26).count <= label_components(m, Connectivity::Face6).count);
    }
  }

  TEST_CASE("partition does not depend on scan order") {
    oracle::Rng rng(62);
    for (int trial = 0; trial < 200; ++trial) {
      const Grid g = Grid::axis_aligned(oracle::random_dims(rng, 10), {1, 1, 1});
      const BinaryMask m = oracle::random_mask(rng, g, 0.4);
      const auto rev = reversal(g);
      std::vector<std::uint8_t> flipped(g.voxel_count());
      for (std::size_t l = 0; l < flipped.size(); ++l) flipped[rev[l]] = m.bits()[l];
      for (const auto conn : {Connectivity::Face6, Connectivity::Full26}) {
        const auto a = label_components(m, conn);
        const auto b = label_components(BinaryMask(g, flipped), conn);
        std::vector<std::uint32_t> back(a.ids.size());
        for (std::size_t l = 0; l < back.size(); ++l) back[l] = b.ids[rev[l]];
        CHECK(oracle::same_partition(a.ids, back));
      }
    }
  }

  TEST_CASE("vessel consistency arithmetic") {
    const std::vector<std::int64_t> ones{1, 1, 1, 1, 1};
    const auto r1 = vessel_consistency(ones);
    CHECK(r1.vc == 1.0);
    CHECK(r1.multi_fraction == 0.0);
    CHECK_FALSE(r1.mean_multi.has_value());

    const std::vector<std::int64_t> mixed{1, 2, 3, 1, 3};
    const auto r2 = vessel_consistency(mixed, 15);
    CHECK(r2.class_id == 15);
    CHECK(r2.vc == 0.4);
    CHECK(r2.multi_fraction == 0.6);
    CHECK(*r2.mean_multi == doctest::Approx(8.0 / 3.0));
    CHECK(*r2.std_multi == doctest::Approx(std::sqrt(1.0 / 3.0)));

    const std::vector<std::int64_t> with_missing{0, 1, 2};
    const auto r3 = vessel_consistency(with_missing);
    CHECK(r3.missing == 1);
    CHECK(r3.missing_flag());
    CHECK(r3.n == 2);
    CHECK(r3.vc == 0.5);

    CHECK_THROWS_AS(vessel_consistency(std::vector<std::int64_t>{}), ArgumentError);
    CHECK_THROWS_AS(vessel_consistency(std::vector<std::int64_t>{0, 0}), ArgumentError);
    CHECK_THROWS_AS(vessel_consistency(std::vector<std::int64_t>{1, -1}), ArgumentError);

    oracle::Rng rng(63);
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<std::int64_t> counts(static_cast<std::size_t>(oracle::uniform_int(rng, 1, 300)));
      for (auto& c : counts) c = oracle::uniform_int(rng, 1, 6);
      const auto r = vessel_consistency(counts);
      CHECK(r.vc + r.multi_fraction == 1.0);
    }
  }
}
