#include <doctest.h>

#include "oracles.hpp"
#include "wbseg/error.hpp"
#include "wbseg/stats.hpp"

using namespace wbseg;

namespace {

std::vector<double> normal_sample(oracle::Rng& rng, std::size_t n, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

MetricRecord rec(std::string scan, std::uint32_t cls, std::optional<double> dsc, std::optional<double> hd,
                 std::string seq) {
  MetricRecord r;
  r.scan_id = std::move(scan);
  r.class_id = cls;
  r.dsc = dsc;
  r.hd95 = hd;
  r.strata["sequence"] = std::move(seq);
  return r;
}

}  // namespace

TEST_SUITE("stats") {
  TEST_CASE("mean and sample standard deviation") {
    const std::vector<double> one{5};
    CHECK(mean_std(one).mean == 5);
    CHECK_FALSE(mean_std(one).std.has_value());
    const std::vector<double> three{1, 2, 3};
    CHECK(mean_std(three).mean == 2);
    CHECK(*mean_std(three).std == 1);
    const std::vector<double> constant(7, 0.1);
    CHECK(*mean_std(constant).std == 0.0);
    CHECK_THROWS_AS(mean_std(std::vector<double>{}), ArgumentError);
  }

  TEST_CASE("percentile rule") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(percentile(v, 25) == 2.75);
    CHECK(percentile(v, 50) == 4.5);
    CHECK(percentile(v, 75) == 6.25);
    CHECK(percentile(v, 0) == 1);
    CHECK(percentile(v, 100) == 8);
    CHECK(percentile({3, 1, 2}, 50) == 2);
    oracle::Rng rng(71);
    for (int trial = 0; trial < 200; ++trial) {
      auto x = normal_sample(rng, static_cast<std::size_t>(oracle::uniform_int(rng, 1, 60)), 0, 1);
      const double p = oracle::uniform_real(rng, 0, 100);
      CHECK(percentile(x, p) == doctest::Approx(oracle::interpolated_percentile(x, p)).epsilon(1e-14));
    }
  }

  TEST_CASE("incomplete beta against frozen reference values") {
    // Reference values from an independent double-precision implementation.
    CHECK(regularized_incomplete_beta(0.5, 0.5, 0.3) == doctest::Approx(0.36901011956554536).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(2, 3, 0.4) == doctest::Approx(0.5248).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(10, 0.5, 0.9) == doctest::Approx(0.15164090963470994).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(24, 0.5, 0.97) == doctest::Approx(0.22902101624676827).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(3, 4, 0) == 0);
    CHECK(regularized_incomplete_beta(3, 4, 1) == 1);
  }

  TEST_CASE("t distribution") {
    CHECK(student_t_cdf(0, 5) == 0.5);
    CHECK(student_t_cdf(0.5, 1) == doctest::Approx(0.6475836176504333).epsilon(1e-12));
    CHECK(student_t_cdf(-2, 5) == doctest::Approx(0.05096973941492914).epsilon(1e-12));
    CHECK(student_t_cdf(1.7, 48) == doctest::Approx(0.9521984949465901).epsilon(1e-12));
    CHECK(student_t_cdf(3, 200) == doctest::Approx(0.998478476443047).epsilon(1e-12));
    CHECK(student_t_cdf(-10, 1) == doctest::Approx(0.03172551743055356).epsilon(1e-12));
    CHECK(student_t_cdf(10, 5) == doctest::Approx(0.9999145262121285).epsilon(1e-12));
    oracle::Rng rng(72);
    for (int trial = 0; trial < 500; ++trial) {
      const double t = oracle::uniform_real(rng, -12, 12);
      const double df = oracle::uniform_real(rng, 0.5, 300);
      CHECK(std::abs(student_t_cdf(-t, df) - (1 - student_t_cdf(t, df))) <= 1e-12);
    }
    // p decreases as |t| grows.
    for (const double df : {1.0, 3.5, 30.0}) {
      double prev = 1.0;
      for (double t = 0.0; t <= 20; t += 0.25) {
        const double p = student_t_two_sided_p(t, df);
        CHECK(p <= prev);
        prev = p;
      }
    }
  }

  TEST_CASE("t-tests") {
    const std::vector<double> a{0.91, 0.88, 0.93, 0.85, 0.90};
    const std::vector<double> b{0.80, 0.84, 0.79, 0.86};
    const TestResult w = t_test_two_sided(a, b);
    CHECK(w.kind == TestKind::WelchT);
    CHECK(w.statistic == doctest::Approx(3.3376371948835994).epsilon(1e-12));
    CHECK(w.df == doctest::Approx(6.2910517934837955).epsilon(1e-12));
    CHECK(w.p == doctest::Approx(0.014589348892698882).epsilon(1e-10));
    const TestResult pooled = t_test_two_sided(a, b, VarianceModel::Pooled);
    CHECK(pooled.kind == TestKind::PooledT);
    CHECK(pooled.statistic == doctest::Approx(3.371746734029736).epsilon(1e-12));
    CHECK(pooled.df == 7);
    CHECK(pooled.p == doctest::Approx(0.011891912338415236).epsilon(1e-10));

    const std::vector<double> same{1, 2, 3};
    const TestResult z = t_test_two_sided(same, same);
    CHECK(z.statistic == 0);
    CHECK(z.p == 1);
    const std::vector<double> zeros(4, 0.0), ones(4, 1.0);
    CHECK_THROWS_AS(t_test_two_sided(zeros, ones), DegenerateVarianceError);
    CHECK(t_test_two_sided(zeros, zeros).p == 1);
    CHECK_THROWS_AS(t_test_two_sided(std::vector<double>{1}, ones), ArgumentError);
  }

  TEST_CASE("t-test properties and quadrature agreement") {
    oracle::Rng rng(73);
    for (int trial = 0; trial < 100; ++trial) {
      const auto a = normal_sample(rng, static_cast<std::size_t>(oracle::uniform_int(rng, 2, 40)), 0.8, 0.1);
      const auto b = normal_sample(rng, static_cast<std::size_t>(oracle::uniform_int(rng, 2, 40)), 0.85, 0.05);
      const TestResult ab = t_test_two_sided(a, b);
      const TestResult ba = t_test_two_sided(b, a);
      CHECK(ab.statistic == -ba.statistic);
      CHECK(ab.p == ba.p);
      CHECK(std::abs(ab.p - oracle::t_two_sided_quadrature(ab.statistic, ab.df)) <= 1e-8);
    }
  }

  TEST_CASE("pearson") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    const std::vector<double> y{2, 1, 4, 3, 6, 5};
    const TestResult r = pearson(x, y);
    CHECK(r.kind == TestKind::Pearson);
    CHECK(r.statistic == doctest::Approx(0.8285714285714283).epsilon(1e-12));
    CHECK(r.df == 4);
    CHECK(r.p == doctest::Approx(0.04156268221574357).epsilon(1e-10));

    std::vector<double> line;
    for (const double v : x) line.push_back(2 * v + 1);
    const TestResult perfect = pearson(x, line);
    CHECK(perfect.statistic == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(perfect.p == doctest::Approx(0.0));

    CHECK_THROWS_AS(pearson(x, std::vector<double>(6, 1.0)), UndefinedCorrelationError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ArgumentError);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2, 3}), ArgumentError);

    oracle::Rng rng(74);
    for (int trial = 0; trial < 100; ++trial) {
      const auto u = normal_sample(rng, 30, 0, 1);
      auto v = normal_sample(rng, 30, 0, 1);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += 0.5 * u[i];
      const double base = pearson(u, v).statistic;
      const double a = oracle::uniform_real(rng, 0.1, 10), b = oracle::uniform_real(rng, -5, 5);
      std::vector<double> pos, neg;
      for (const double t : u) {
        pos.push_back(a * t + b);
        neg.push_back(-a * t + b);
      }
      CHECK(pearson(pos, v).statistic == doctest::Approx(base).epsilon(1e-12));
      CHECK(pearson(neg, v).statistic == doctest::Approx(-base).epsilon(1e-12));
    }
  }

  TEST_CASE("pearson p under the null is roughly uniform") {
    oracle::Rng rng(75);
    const int trials = 4000;
    std::array<int, 10> bins{};
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < trials; ++t) {
      std::vector<double> x(40), y(40);
      for (auto& v : x) v = u(rng);
      for (auto& v : y) v = u(rng);
      const double p = pearson(x, y).p;
      ++bins[static_cast<std::size_t>(std::min(9.0, p * 10))];
    }
    // Expected 400 per bin, sd about 19; allow 5 sd.
    for (const int b : bins) CHECK(std::abs(b - 400) < 95);
  }

  TEST_CASE("stratify") {
    const std::vector<MetricRecord> records{
        rec("a", 1, 0.9, 2.0, "in"),  rec("a", 2, 0.7, std::nullopt, "in"), rec("b", 1, 0.8, 4.0, "in"),
        rec("b", 2, std::nullopt, std::nullopt, "in"), rec("c", 1, 0.6, 1.0, "water"),
    };
    const std::vector<std::string> keys{"sequence"};
    const auto rows = stratify(records, keys);
    // in: pooled, class 1, class 2; water: pooled, class 1
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].values == std::vector<std::string>{"in"});
    CHECK_FALSE(rows[0].class_id.has_value());
    CHECK(rows[0].dsc.n == 3);
    CHECK(rows[0].dsc.excluded == 1);
    CHECK(*rows[0].dsc.mean == doctest::Approx(0.8));
    CHECK(*rows[1].class_id == 1);
    CHECK(*rows[1].dsc.mean == doctest::Approx(0.85));
    CHECK(*rows[1].hd95.mean == 3.0);
    CHECK(*rows[2].class_id == 2);
    CHECK(rows[2].dsc.n == 1);
    CHECK(*rows[2].dsc.mean == 0.7);
    CHECK_FALSE(rows[2].dsc.std.has_value());
    CHECK(rows[2].hd95.n == 0);
    CHECK(rows[2].hd95.excluded == 2);
    CHECK_FALSE(rows[2].hd95.mean.has_value());
    CHECK(rows[3].values == std::vector<std::string>{"water"});
    CHECK(*rows[4].dsc.mean == 0.6);

    // Every record lands in exactly one stratum per key.
    std::size_t pooled = 0;
    for (const auto& r : rows) {
      if (!r.class_id) pooled += r.dsc.n + r.dsc.excluded;
    }
    CHECK(pooled == records.size());

    const std::vector<std::string> missing{"sex"};
    CHECK_THROWS_AS(stratify(records, missing), ArgumentError);
  }
}
