#include "wbseg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "wbseg/error.hpp"
#include "wbseg/metrics.hpp"
#include "wbseg/nifti.hpp"
#include "wbseg/preprocess.hpp"
#include "wbseg/taxonomy.hpp"

namespace wbseg {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- CSV ------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;  // current row has content
  const auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  const auto end_row = [&] {
    end_field();
    if (any) rows.push_back(std::move(row));
    row.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  end_row();
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string join_csv(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(fields[i]);
  }
  line += '\n';
  return line;
}

std::string num(double v) { return fmt::format("{}", v); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// "0.91 ± 0.05" for display columns.
std::string mean_pm_std(const std::optional<double>& mean, const std::optional<double>& std) {
  if (!mean) return "n/a";
  if (!std) return fmt::format("{:.2f}", *mean);
  return fmt::format("{:.2f} ± {:.2f}", *mean, *std);
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  const auto v = parse_number<double>(s);
  if (!v) throw FormatError(fmt::format("not a number: '{}'", s));
  return v;
}

std::string class_name(const ClassTaxonomy* tax, std::uint32_t id) {
  return tax && tax->contains(id) ? tax->name_of(id) : std::string();
}

const ClassTaxonomy* find_taxonomy(const std::string& name) {
  try {
    return &taxonomy_by_name(name);
  } catch (const ArgumentError&) {
    return nullptr;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  out.close();
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---- manifest -------------------------------------------------------------

std::vector<std::uint32_t> EvaluationManifest::classes() const {
  const ClassTaxonomy& tax = taxonomy_by_name(taxonomy);
  if (subset == "custom") {
    if (custom_classes.empty()) throw ArgumentError("custom subset needs at least one class");
    std::set<std::uint32_t> ids;
    for (const auto c : custom_classes) {
      if (!tax.contains(c)) throw ArgumentError(fmt::format("class {} is not in taxonomy {}", c, taxonomy));
      ids.insert(c);
    }
    return {ids.begin(), ids.end()};
  }
  if (!tax.has_subset(subset)) throw ArgumentError(fmt::format("taxonomy {} has no subset '{}'", taxonomy, subset));
  const auto s = tax.subset(subset);
  return {s.begin(), s.end()};
}

void EvaluationManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (row.scan_id.empty()) throw ArgumentError("empty scan_id in manifest");
    if (!seen.insert(row.scan_id).second) throw ArgumentError(fmt::format("duplicate scan_id '{}'", row.scan_id));
  }
  (void)classes();
}

EvaluationManifest parse_manifest(std::string_view csv_text, const fs::path& base_dir) {
  const auto table = parse_csv(csv_text);
  if (table.empty()) throw ArgumentError("manifest has no header row");
  const auto& header = table.front();
  std::vector<std::string> names;
  for (const auto& h : header) names.push_back(trim(h));
  const auto column = [&](std::string_view name) -> std::size_t {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ArgumentError(fmt::format("manifest lacks column '{}'", name));
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t c_id = column("scan_id");
  const std::size_t c_pred = column("prediction");
  const std::size_t c_ref = column("reference");

  EvaluationManifest m;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c == c_id || c == c_pred || c == c_ref) continue;
    if (names[c].empty()) throw ArgumentError(fmt::format("manifest column {} has no name", c + 1));
    m.strata_columns.push_back(names[c]);
  }
  const auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& fields = table[r];
    if (fields.size() != names.size()) {
      throw ArgumentError(fmt::format("manifest line {}: {} fields, header has {}", r + 1, fields.size(), names.size()));
    }
    ManifestRow row;
    row.scan_id = trim(fields[c_id]);
    row.prediction = resolve(trim(fields[c_pred]));
    row.reference = resolve(trim(fields[c_ref]));
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (c == c_id || c == c_pred || c == c_ref) continue;
      std::string value = trim(fields[c]);
      if (names[c] == "age" && !parse_number<long>(value)) {
        throw ArgumentError(fmt::format("manifest line {}: age '{}' is not an integer", r + 1, value));
      }
      row.strata[names[c]] = std::move(value);
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

EvaluationManifest load_manifest(const fs::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

unsigned default_worker_count() {
  if (const char* env = std::getenv("WBSEG_WORKERS"); env && *env) {
    const auto n = parse_number<unsigned>(env);
    if (!n || *n == 0) throw ArgumentError(fmt::format("WBSEG_WORKERS must be a positive integer, got '{}'", env));
    return *n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---- evaluation -----------------------------------------------------------

namespace {

struct RowOutcome {
  std::vector<MetricRecord> records;
  std::optional<std::string> error;
};

RowOutcome evaluate_row(const ManifestRow& row, const std::vector<std::uint32_t>& classes,
                        const std::set<std::uint32_t>& vessels, const EvaluationOptions& options) {
  RowOutcome out;
  try {
    const LabelVolume reference = read_labels(row.reference);
    LabelVolume prediction = read_labels(row.prediction);
    if (same_geometry(prediction.grid(), reference.grid(), kGridMatchToleranceMm)) {
      // Within tolerance: treat as the reference grid outright.
      std::vector<std::uint32_t> labels(prediction.labels().begin(), prediction.labels().end());
      prediction = LabelVolume(reference.grid(), std::move(labels), prediction.storage());
    } else if (options.auto_resample) {
      prediction = resample_labels_onto(prediction, reference.grid());
    } else {
      throw GeometryError(fmt::format("prediction grid {}x{}x{} does not match reference grid {}x{}x{}",
                                      prediction.grid().dims()[0], prediction.grid().dims()[1],
                                      prediction.grid().dims()[2], reference.grid().dims()[0],
                                      reference.grid().dims()[1], reference.grid().dims()[2]));
    }
    for (const auto c : classes) {
      const BinaryMask p = extract_binary_mask(prediction, c);
      const BinaryMask r = extract_binary_mask(reference, c);
      MetricRecord rec;
      rec.scan_id = row.scan_id;
      rec.class_id = c;
      rec.strata = row.strata;
      rec.dsc = dice(p, r);
      if (options.hd_enabled) rec.hd95 = hd95(p, r);
      if (vessels.count(c)) rec.components = static_cast<std::int64_t>(label_components(p, options.connectivity).count);
      out.records.push_back(std::move(rec));
    }
  } catch (const std::exception& e) {
    out.records.clear();
    out.error = e.what();
  }
  return out;
}

bool record_order(const MetricRecord& a, const MetricRecord& b) {
  return std::tie(a.scan_id, a.class_id) < std::tie(b.scan_id, b.class_id);
}

std::set<std::uint32_t> vessel_classes(const std::string& taxonomy) {
  const ClassTaxonomy* tax = find_taxonomy(taxonomy);
  if (!tax || !tax->has_subset("vessels")) return {};
  const auto v = tax->subset("vessels");
  return {v.begin(), v.end()};
}

}  // namespace

ReportBundle run_evaluation(const EvaluationManifest& manifest, const EvaluationOptions& options) {
  manifest.validate();
  const auto classes = manifest.classes();
  const auto vessels = vessel_classes(manifest.taxonomy);

  std::vector<RowOutcome> outcomes(manifest.rows.size());
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, options.workers), std::max<std::size_t>(1, outcomes.size())));
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < outcomes.size(); i = next++) {
      outcomes[i] = evaluate_row(manifest.rows[i], classes, vessels, options);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<MetricRecord> records;
  std::vector<RowError> errors;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    if (o.error) errors.push_back({manifest.rows[i].scan_id, *o.error});
    std::move(o.records.begin(), o.records.end(), std::back_inserter(records));
  }

  std::vector<std::string> keys = options.strata_keys;
  if (keys.empty()) {
    for (const auto& c : manifest.strata_columns) {
      if (c != "age") keys.push_back(c);
    }
  }
  return build_report(std::move(records), std::move(errors), manifest.taxonomy, classes, std::move(keys));
}

// ---- aggregation ----------------------------------------------------------

BoxPlot box_plot(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("box plot of an empty sample");
  std::sort(values.begin(), values.end());
  BoxPlot b;
  b.n = values.size();
  b.q1 = percentile_sorted(values, 25.0);
  b.median = percentile_sorted(values, 50.0);
  b.q3 = percentile_sorted(values, 75.0);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  bool first = true;
  for (const double v : values) {
    if (v < lo_fence || v > hi_fence) {
      b.outliers.push_back(v);
      continue;
    }
    if (first) b.lo_whisker = v;
    b.hi_whisker = v;
    first = false;
  }
  return b;
}

namespace {

std::vector<DemographicTest> demographic_tests(const std::vector<MetricRecord>& records) {
  // Per-scan mean DSC over defined values.
  struct Scan {
    double sum = 0;
    std::size_t n = 0;
    std::map<std::string, std::string> strata;
  };
  std::map<std::string, Scan> scans;
  for (const auto& r : records) {
    auto& s = scans[r.scan_id];
    s.strata = r.strata;
    if (r.dsc) {
      s.sum += *r.dsc;
      ++s.n;
    }
  }
  std::vector<DemographicTest> out;

  DemographicTest sex{"sex_t_test", "", 0, 0, std::nullopt, ""};
  std::map<std::string, std::vector<double>> groups;
  bool tagged = !scans.empty();
  for (const auto& [id, s] : scans) {
    const auto it = s.strata.find("sex");
    if (it == s.strata.end()) {
      tagged = false;
      break;
    }
    if (s.n) groups[it->second].push_back(s.sum / static_cast<double>(s.n));
  }
  if (!tagged) {
    sex.note = "no sex tag";
  } else if (groups.size() != 2) {
    sex.note = fmt::format("needs exactly 2 groups, found {}", groups.size());
  } else {
    const auto& [la, a] = *groups.begin();
    const auto& [lb, b] = *std::next(groups.begin());
    sex.detail = la + " vs " + lb;
    sex.n_a = a.size();
    sex.n_b = b.size();
    try {
      sex.result = t_test_two_sided(a, b);
    } catch (const Error& e) {
      sex.note = e.what();
    }
  }
  out.push_back(std::move(sex));

  DemographicTest age{"age_pearson", "mean_dsc vs age", 0, 0, std::nullopt, ""};
  std::vector<double> ages, means;
  tagged = !scans.empty();
  for (const auto& [id, s] : scans) {
    const auto it = s.strata.find("age");
    const auto years = it == s.strata.end() ? std::nullopt : parse_number<long>(it->second);
    if (!years) {
      tagged = false;
      break;
    }
    if (s.n) {
      ages.push_back(static_cast<double>(*years));
      means.push_back(s.sum / static_cast<double>(s.n));
    }
  }
  age.n_a = ages.size();
  if (!tagged) {
    age.note = "no integer age tag";
  } else {
    try {
      age.result = pearson(ages, means);
    } catch (const Error& e) {
      age.note = e.what();
    }
  }
  out.push_back(std::move(age));
  return out;
}

}  // namespace

ReportBundle build_report(std::vector<MetricRecord> records, std::vector<RowError> errors, const std::string& taxonomy,
                          std::vector<std::uint32_t> classes, std::vector<std::string> strata_keys) {
  std::sort(records.begin(), records.end(), record_order);
  std::stable_sort(errors.begin(), errors.end(),
                   [](const RowError& a, const RowError& b) { return a.scan_id < b.scan_id; });
  std::sort(classes.begin(), classes.end());
  const ClassTaxonomy* tax = find_taxonomy(taxonomy);

  ReportBundle b;
  b.taxonomy = taxonomy;
  b.classes = classes;
  b.strata_keys = strata_keys;

  b.summary.push_back({"all", stratify(records, {})});
  for (const auto& key : strata_keys) {
    const std::vector<std::string> one{key};
    b.summary.push_back({key, stratify(records, one)});
  }

  std::map<std::uint32_t, std::vector<std::int64_t>> counts;
  std::map<std::uint32_t, std::vector<double>> dsc, hd;
  for (const auto& r : records) {
    if (r.components) counts[r.class_id].push_back(*r.components);
    if (r.dsc) dsc[r.class_id].push_back(*r.dsc);
    if (r.hd95) hd[r.class_id].push_back(*r.hd95);
  }
  for (const auto& [id, c] : counts) {
    VesselRow row;
    row.class_id = id;
    row.class_name = class_name(tax, id);
    row.samples = c.size();
    if (std::any_of(c.begin(), c.end(), [](std::int64_t v) { return v > 0; })) row.report = vessel_consistency(c, id);
    b.vessels.push_back(std::move(row));
  }
  for (const auto c : classes) {
    for (const auto& [metric, values] : {std::pair{"dsc", &dsc}, std::pair{"hd95", &hd}}) {
      const auto it = values->find(c);
      if (it == values->end()) continue;
      b.boxplots.push_back({c, class_name(tax, c), metric, box_plot(it->second)});
    }
  }
  b.tests = demographic_tests(records);
  b.records = std::move(records);
  b.errors = std::move(errors);
  return b;
}

// ---- emission -------------------------------------------------------------

namespace {

std::vector<std::string> strata_columns(const std::vector<MetricRecord>& records) {
  std::set<std::string> keys;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.strata) keys.insert(k);
  }
  return {keys.begin(), keys.end()};
}

std::string records_csv(const ReportBundle& b, const ClassTaxonomy* tax) {
  const auto keys = strata_columns(b.records);
  std::vector<std::string> header{"scan_id", "class_id", "class_name", "dsc", "hd95", "components"};
  header.insert(header.end(), keys.begin(), keys.end());
  header.push_back("error");
  std::string out = join_csv(header);

  // Error rows slot in at their scan id.
  auto err = b.errors.begin();
  const auto flush_errors_before = [&](const std::string* scan) {
    for (; err != b.errors.end() && (!scan || err->scan_id < *scan); ++err) {
      std::vector<std::string> f{err->scan_id, "", "", "", "", ""};
      f.resize(f.size() + keys.size());
      f.push_back(err->message);
      out += join_csv(f);
    }
  };
  for (const auto& r : b.records) {
    flush_errors_before(&r.scan_id);
    std::vector<std::string> f{r.scan_id, std::to_string(r.class_id), class_name(tax, r.class_id), num(r.dsc),
                               num(r.hd95), r.components ? std::to_string(*r.components) : std::string()};
    for (const auto& k : keys) {
      const auto it = r.strata.find(k);
      f.push_back(it == r.strata.end() ? std::string() : it->second);
    }
    f.emplace_back();
    out += join_csv(f);
  }
  flush_errors_before(nullptr);
  return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string records_json(const ReportBundle& b, const ClassTaxonomy* tax) {
  json doc;
  doc["taxonomy"] = b.taxonomy;
  json recs = json::array();
  for (const auto& r : b.records) {
    json j;
    j["scan_id"] = r.scan_id;
    j["class_id"] = r.class_id;
    j["class_name"] = class_name(tax, r.class_id);
    j["dsc"] = opt_json(r.dsc);
    j["hd95"] = opt_json(r.hd95);
    j["components"] = r.components ? json(*r.components) : json(nullptr);
    j["strata"] = r.strata;
    recs.push_back(std::move(j));
  }
  doc["records"] = std::move(recs);
  json errs = json::array();
  for (const auto& e : b.errors) errs.push_back({{"scan_id", e.scan_id}, {"message", e.message}});
  doc["errors"] = std::move(errs);
  return doc.dump(2) + "\n";
}

std::string summary_csv(const ReportBundle& b, const ClassTaxonomy* tax) {
  std::string out = join_csv({"stratum_key", "stratum", "class_id", "class_name", "dsc", "hd95", "dsc_n",
                              "dsc_excluded", "dsc_mean", "dsc_std", "hd95_n", "hd95_excluded", "hd95_mean",
                              "hd95_std"});
  for (const auto& block : b.summary) {
    for (const auto& row : block.rows) {
      const std::string stratum = row.values.empty() ? "all" : row.values.front();
      out += join_csv({block.key, stratum, row.class_id ? std::to_string(*row.class_id) : "all",
                       row.class_id ? class_name(tax, *row.class_id) : "all", mean_pm_std(row.dsc.mean, row.dsc.std),
                       mean_pm_std(row.hd95.mean, row.hd95.std), std::to_string(row.dsc.n),
                       std::to_string(row.dsc.excluded), num(row.dsc.mean), num(row.dsc.std),
                       std::to_string(row.hd95.n), std::to_string(row.hd95.excluded), num(row.hd95.mean),
                       num(row.hd95.std)});
    }
  }
  return out;
}

std::string vessels_csv(const ReportBundle& b) {
  std::string out = join_csv({"class_id", "vessel", "vc", "multi_fraction", "average_components_if_multiple", "n",
                              "missing", "mean_components", "std_components"});
  for (const auto& v : b.vessels) {
    if (!v.report) {
      out += join_csv({std::to_string(v.class_id), v.class_name, "", "", "n/a", "0", std::to_string(v.samples), "", ""});
      continue;
    }
    const auto& r = *v.report;
    out += join_csv({std::to_string(v.class_id), fmt::format("{} (n={})", v.class_name, r.n),
                     fmt::format("{:.2f}", r.vc), fmt::format("{:.2f}", r.multi_fraction),
                     r.mean_multi ? mean_pm_std(r.mean_multi, r.std_multi) : std::string("-"), std::to_string(r.n),
                     std::to_string(r.missing), num(r.mean_multi), num(r.std_multi)});
  }
  return out;
}

std::string boxplot_csv(const ReportBundle& b) {
  std::string out =
      join_csv({"class_id", "class_name", "metric", "n", "q1", "median", "q3", "lo_whisker", "hi_whisker", "outliers"});
  for (const auto& row : b.boxplots) {
    const auto& x = row.box;
    std::string outliers;
    for (std::size_t i = 0; i < x.outliers.size(); ++i) outliers += (i ? ";" : "") + num(x.outliers[i]);
    out += join_csv({std::to_string(row.class_id), row.class_name, row.metric, std::to_string(x.n), num(x.q1),
                     num(x.median), num(x.q3), num(x.lo_whisker), num(x.hi_whisker), outliers});
  }
  return out;
}

std::string tests_csv(const ReportBundle& b) {
  std::string out = join_csv({"test", "detail", "n_a", "n_b", "statistic", "df", "p", "note"});
  for (const auto& t : b.tests) {
    out += join_csv({t.name, t.detail, std::to_string(t.n_a), std::to_string(t.n_b),
                     t.result ? num(t.result->statistic) : "", t.result ? num(t.result->df) : "",
                     t.result ? num(t.result->p) : "", t.note});
  }
  return out;
}

}  // namespace

void emit_report(const ReportBundle& bundle, ReportFormat format, const fs::path& out_dir) {
  if (bundle.records.empty() && bundle.errors.empty()) throw ArgumentError("nothing to report");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError(fmt::format("cannot create output directory {}: {}", out_dir.string(), ec.message()));
  }
  const ClassTaxonomy* tax = find_taxonomy(bundle.taxonomy);
  if (format == ReportFormat::Json) {
    write_text(out_dir / "records.json", records_json(bundle, tax));
  } else {
    write_text(out_dir / "records.csv", records_csv(bundle, tax));
  }
  write_text(out_dir / "summary.csv", summary_csv(bundle, tax));
  write_text(out_dir / "vessels.csv", vessels_csv(bundle));
  write_text(out_dir / "boxplot.csv", boxplot_csv(bundle));
  write_text(out_dir / "tests.csv", tests_csv(bundle));
}

// ---- reading records back -------------------------------------------------

namespace {

LoadedRecords load_records_json(const std::string& text) {
  LoadedRecords out;
  std::set<std::string> keys;
  try {
    const json doc = json::parse(text);
    for (const auto& j : doc.at("records")) {
      MetricRecord r;
      r.scan_id = j.at("scan_id").get<std::string>();
      r.class_id = j.at("class_id").get<std::uint32_t>();
      if (!j.at("dsc").is_null()) r.dsc = j.at("dsc").get<double>();
      if (!j.at("hd95").is_null()) r.hd95 = j.at("hd95").get<double>();
      if (!j.at("components").is_null()) r.components = j.at("components").get<std::int64_t>();
      r.strata = j.at("strata").get<std::map<std::string, std::string>>();
      for (const auto& [k, v] : r.strata) keys.insert(k);
      out.records.push_back(std::move(r));
    }
    for (const auto& e : doc.at("errors")) {
      out.errors.push_back({e.at("scan_id").get<std::string>(), e.at("message").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("bad records JSON: {}", e.what()));
  }
  out.strata_columns.assign(keys.begin(), keys.end());
  return out;
}

LoadedRecords load_records_csv(const std::string& text) {
  const auto table = parse_csv(text);
  if (table.empty()) throw FormatError("records CSV has no header");
  const auto& header = table.front();
  const auto find = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError(fmt::format("records CSV lacks column '{}'", name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_scan = find("scan_id"), c_class = find("class_id"), c_name = find("class_name"),
                    c_dsc = find("dsc"), c_hd = find("hd95"), c_comp = find("components"), c_err = find("error");
  LoadedRecords out;
  std::vector<std::size_t> strata;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != c_scan && c != c_class && c != c_name && c != c_dsc && c != c_hd && c != c_comp && c != c_err) {
      strata.push_back(c);
      out.strata_columns.push_back(header[c]);
    }
  }
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& f = table[i];
    if (f.size() != header.size()) throw FormatError(fmt::format("records CSV line {} has {} fields", i + 1, f.size()));
    if (!f[c_err].empty()) {
      out.errors.push_back({f[c_scan], f[c_err]});
      continue;
    }
    MetricRecord r;
    r.scan_id = f[c_scan];
    const auto id = parse_number<std::uint32_t>(f[c_class]);
    if (!id) throw FormatError(fmt::format("records CSV line {}: bad class_id '{}'", i + 1, f[c_class]));
    r.class_id = *id;
    r.dsc = parse_double(f[c_dsc]);
    r.hd95 = parse_double(f[c_hd]);
    if (!f[c_comp].empty()) {
      const auto n = parse_number<std::int64_t>(f[c_comp]);
      if (!n) throw FormatError(fmt::format("records CSV line {}: bad components '{}'", i + 1, f[c_comp]));
      r.components = *n;
    }
    for (const auto c : strata) r.strata[header[c]] = f[c];
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace

LoadedRecords load_records(const fs::path& path) {
  const std::string text = read_text(path);
  if (path.extension() == ".json") return load_records_json(text);
  return load_records_csv(text);
}

}  // namespace wbseg
