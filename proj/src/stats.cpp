#include "wbseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "wbseg/error.hpp"

namespace wbseg {

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mean of an empty sample");
  const double first = values.front();
  if (std::all_of(values.begin(), values.end(), [first](double v) { return v == first; })) {
    return {first, values.size() > 1 ? std::optional<double>(0.0) : std::nullopt};
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  if (values.size() < 2) return {mean, std::nullopt};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ArgumentError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw ArgumentError(fmt::format("percentile {} outside [0, 100]", p));
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, p);
}

namespace {

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ArgumentError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError(fmt::format("incomplete beta argument {} outside [0, 1]", x));
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ArgumentError(fmt::format("degrees of freedom {} must be > 0", df));
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

namespace {

void require_n(std::span<const double> s, std::size_t n, const char* what) {
  if (s.size() < n) throw ArgumentError(fmt::format("{} needs at least {} values, got {}", what, n, s.size()));
}

}  // namespace

TestResult t_test_two_sided(std::span<const double> a, std::span<const double> b, VarianceModel model) {
  require_n(a, 2, "t-test");
  require_n(b, 2, "t-test");
  const MeanStd sa = mean_std(a);
  const MeanStd sb = mean_std(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = *sa.std * *sa.std;
  const double vb = *sb.std * *sb.std;
  const TestKind kind = model == VarianceModel::Welch ? TestKind::WelchT : TestKind::PooledT;

  if (va == 0.0 && vb == 0.0) {
    if (sa.mean == sb.mean) return {0.0, na + nb - 2.0, 1.0, kind};
    throw DegenerateVarianceError("both samples have zero variance and different means");
  }

  double se2 = 0.0;
  double df = 0.0;
  if (model == VarianceModel::Welch) {
    const double qa = va / na;
    const double qb = vb / nb;
    se2 = qa + qb;
    df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  } else {
    df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    se2 = pooled * (1.0 / na + 1.0 / nb);
  }
  const double t = (sa.mean - sb.mean) / std::sqrt(se2);
  return {t, df, student_t_two_sided_p(t, df), kind};
}

TestResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ArgumentError(fmt::format("pearson needs equal lengths, got {} and {}", x.size(), y.size()));
  }
  require_n(x, 3, "pearson");
  const double n = static_cast<double>(x.size());
  const MeanStd mx = mean_std(x);
  const MeanStd my = mean_std(y);
  if (*mx.std == 0.0 || *my.std == 0.0) throw UndefinedCorrelationError("correlation with a constant sample");
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx.mean;
    const double dy = y[i] - my.mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2.0;
  // x = df / (df + t^2) simplifies to 1 - r^2.
  const double p = std::abs(r) == 1.0 ? 0.0
                                      : std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, 1.0 - r * r), 0.0, 1.0);
  return {r, df, p, TestKind::Pearson};
}

namespace {

MetricSummary summarize(const std::vector<std::optional<double>>& values) {
  MetricSummary s;
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) {
      defined.push_back(*v);
    } else {
      ++s.excluded;
    }
  }
  s.n = defined.size();
  if (!defined.empty()) {
    const MeanStd ms = mean_std(defined);
    s.mean = ms.mean;
    s.std = ms.std;
  }
  return s;
}

struct Bucket {
  std::vector<std::optional<double>> dsc;
  std::vector<std::optional<double>> hd95;
};

}  // namespace

std::vector<StratumRow> stratify(std::span<const MetricRecord> records, std::span<const std::string> keys) {
  // Key 0 of the class dimension is the pooled "all classes" bucket.
  std::map<std::vector<std::string>, std::map<std::uint32_t, Bucket>> groups;
  for (const MetricRecord& r : records) {
    std::vector<std::string> values;
    values.reserve(keys.size());
    for (const auto& key : keys) {
      const auto it = r.strata.find(key);
      if (it == r.strata.end()) {
        throw ArgumentError(fmt::format("record {}/{} has no strata tag '{}'", r.scan_id, r.class_id, key));
      }
      values.push_back(it->second);
    }
    auto& by_class = groups[values];
    for (const std::uint32_t c : {0u, r.class_id}) {
      by_class[c].dsc.push_back(r.dsc);
      by_class[c].hd95.push_back(r.hd95);
    }
  }
  std::vector<StratumRow> rows;
  for (const auto& [values, by_class] : groups) {
    for (const auto& [class_id, bucket] : by_class) {
      StratumRow row;
      row.values = values;
      if (class_id != 0) row.class_id = class_id;
      row.dsc = summarize(bucket.dsc);
      row.hd95 = summarize(bucket.hd95);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace wbseg
