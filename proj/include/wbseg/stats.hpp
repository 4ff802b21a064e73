#pragma once

// Descriptive statistics, the percentile rule shared by every report, and
// the two inferential tests used for demographic effects.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wbseg/record.hpp"

namespace wbseg {

struct Sample {
  std::string label;
  std::vector<double> values;
};

struct MeanStd {
  double mean = 0.0;
  // Sample standard deviation (n - 1); undefined for n = 1.
  std::optional<double> std;
};

// Throws ArgumentError on an empty sample.
MeanStd mean_std(std::span<const double> values);

// Linear interpolation between order statistics at rank p/100 * (n - 1).
// `sorted` must be ascending and nonempty; p in [0, 100].
double percentile_sorted(std::span<const double> sorted, double p);
double percentile(std::vector<double> values, double p);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Central Student t distribution.
double student_t_cdf(double t, double df);
double student_t_two_sided_p(double t, double df);

enum class TestKind { WelchT, PooledT, Pearson };

struct TestResult {
  // t for the t-tests, r for Pearson.
  double statistic = 0.0;
  double df = 0.0;
  double p = 1.0;
  TestKind kind = TestKind::WelchT;
};

enum class VarianceModel { Welch, Pooled };

// Independent two-sample two-sided t-test. Both samples need n >= 2. When
// both variances are zero: equal means give t = 0, p = 1; different means
// throw DegenerateVarianceError.
TestResult t_test_two_sided(std::span<const double> a, std::span<const double> b,
                            VarianceModel model = VarianceModel::Welch);

// Pearson correlation with a two-sided p from t = r sqrt((n-2)/(1-r^2)).
// Needs equal lengths, n >= 3, both inputs nonconstant.
TestResult pearson(std::span<const double> x, std::span<const double> y);

struct MetricSummary {
  std::size_t n = 0;         // defined values
  std::size_t excluded = 0;  // undefined values left out
  std::optional<double> mean;
  std::optional<double> std;
};

struct StratumRow {
  // One value per stratification key, in key order.
  std::vector<std::string> values;
  // Empty for the row pooling every class of the stratum.
  std::optional<std::uint32_t> class_id;
  MetricSummary dsc;
  MetricSummary hd95;
};

// Groups records by the given strata tags and class. Rows are ordered by
// stratum values, then the pooled row, then class id. Throws ArgumentError
// when a record lacks one of the keys.
std::vector<StratumRow> stratify(std::span<const MetricRecord> records, std::span<const std::string> keys);

}  // namespace wbseg
