#pragma once

// Batch evaluation: a manifest of prediction/reference pairs goes in, a
// report bundle (per-record metrics, stratified summary, vessel consistency,
// box-plot statistics, demographic tests) comes out.
//
// Manifest CSV: header row with at least scan_id, prediction, reference.
// Every other column is a strata tag; "age" must hold integer years.
// Relative paths resolve against the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wbseg/connectivity.hpp"
#include "wbseg/record.hpp"
#include "wbseg/stats.hpp"

namespace wbseg {

// Prediction and reference grids count as equal within this corner distance.
inline constexpr double kGridMatchToleranceMm = 1e-3;

struct ManifestRow {
  std::string scan_id;
  std::filesystem::path prediction;
  std::filesystem::path reference;
  std::map<std::string, std::string> strata;
};

struct EvaluationManifest {
  std::vector<ManifestRow> rows;
  std::vector<std::string> strata_columns;  // header order
  std::string taxonomy = "body40";
  // full40 | subset24_t2 | subset13_amos | custom
  std::string subset = "full40";
  std::vector<std::uint32_t> custom_classes;

  // Class ids to evaluate, ascending. Throws ArgumentError for an unknown
  // subset or classes outside the taxonomy.
  std::vector<std::uint32_t> classes() const;
  // Throws ArgumentError on duplicate scan ids or a bad subset.
  void validate() const;
};

EvaluationManifest parse_manifest(std::string_view csv_text, const std::filesystem::path& base_dir = {});
EvaluationManifest load_manifest(const std::filesystem::path& path);

// WBSEG_WORKERS if set to a positive integer, else the hardware concurrency.
unsigned default_worker_count();

struct EvaluationOptions {
  Connectivity connectivity = Connectivity::Full26;
  bool hd_enabled = true;
  unsigned workers = 1;
  // Nearest-neighbour resample predictions onto the reference grid when the
  // grids differ; otherwise a mismatch is a row error.
  bool auto_resample = false;
  // Tags to stratify the summary by; empty means every manifest strata
  // column except age.
  std::vector<std::string> strata_keys;
};

struct RowError {
  std::string scan_id;
  std::string message;
};

struct SummaryBlock {
  // "all" for the unstratified block.
  std::string key;
  std::vector<StratumRow> rows;
};

struct VesselRow {
  std::uint32_t class_id = 0;
  std::string class_name;
  // Unset when every sample was missing.
  std::optional<VesselConsistencyReport> report;
  std::size_t samples = 0;
};

struct BoxPlot {
  std::size_t n = 0;
  double q1 = 0, median = 0, q3 = 0;
  // Most extreme data values within 1.5 IQR of the box.
  double lo_whisker = 0, hi_whisker = 0;
  std::vector<double> outliers;
};

// Quartiles use the repository-wide percentile rule. Throws ArgumentError on
// an empty sample.
BoxPlot box_plot(std::vector<double> values);

struct BoxPlotRow {
  std::uint32_t class_id = 0;
  std::string class_name;
  std::string metric;  // "dsc" or "hd95"
  BoxPlot box;
};

struct DemographicTest {
  std::string name;      // "sex_t_test" or "age_pearson"
  std::string detail;    // group labels or variable names
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::optional<TestResult> result;
  std::string note;      // why the test was not run
};

struct ReportBundle {
  std::string taxonomy;
  std::vector<std::uint32_t> classes;
  std::vector<std::string> strata_keys;
  // Sorted by (scan id, class id).
  std::vector<MetricRecord> records;
  // Sorted by scan id.
  std::vector<RowError> errors;
  std::vector<SummaryBlock> summary;
  std::vector<VesselRow> vessels;
  std::vector<BoxPlotRow> boxplots;
  std::vector<DemographicTest> tests;
};

ReportBundle run_evaluation(const EvaluationManifest& manifest, const EvaluationOptions& options);

// Aggregates records into the summary, vessel, box-plot and test tables.
// Records and errors are sorted in place into report order.
ReportBundle build_report(std::vector<MetricRecord> records, std::vector<RowError> errors,
                          const std::string& taxonomy, std::vector<std::uint32_t> classes,
                          std::vector<std::string> strata_keys);

enum class ReportFormat { Csv, Json };

// Writes records.csv|records.json, summary.csv, vessels.csv, boxplot.csv and
// tests.csv into out_dir (created if needed). Throws IoError.
void emit_report(const ReportBundle& bundle, ReportFormat format, const std::filesystem::path& out_dir);

struct LoadedRecords {
  std::vector<MetricRecord> records;
  std::vector<RowError> errors;
  std::vector<std::string> strata_columns;
};

// Reads back records.csv or records.json as written by emit_report.
LoadedRecords load_records(const std::filesystem::path& path);

// RFC 4180 style CSV helpers.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

}  // namespace wbseg
