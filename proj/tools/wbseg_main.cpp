// wbseg: evaluation, stitching and preprocessing for whole-body label maps.
//
// Exit codes: 0 success, 1 some manifest rows failed, 2 fatal or usage error.

#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wbseg/connectivity.hpp"
#include "wbseg/error.hpp"
#include "wbseg/harness.hpp"
#include "wbseg/nifti.hpp"
#include "wbseg/preprocess.hpp"
#include "wbseg/stitch.hpp"
#include "wbseg/taxonomy.hpp"

namespace {

using namespace wbseg;

constexpr int kOk = 0;
constexpr int kRowErrors = 1;
constexpr int kFatal = 2;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ReportFormat parse_format(const std::string& f) { return f == "json" ? ReportFormat::Json : ReportFormat::Csv; }

void print_summary(const ReportBundle& b) {
  fmt::print("{} records, {} row errors\n", b.records.size(), b.errors.size());
  for (const auto& e : b.errors) fmt::print(stderr, "error: {}: {}\n", e.scan_id, e.message);
}

BinaryMask mask_of(const AnyVolume& v) {
  if (const auto* labels = std::get_if<LabelVolume>(&v)) {
    std::vector<std::uint8_t> bits(labels->labels().size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labels->labels()[i] != 0;
    return BinaryMask(labels->grid(), std::move(bits));
  }
  const auto& image = std::get<ImageVolume>(v);
  std::vector<std::uint8_t> bits(image.data().size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = image.data()[i] != 0.0;
  return BinaryMask(image.grid(), std::move(bits));
}

Vec3 parse_spacing(const std::string& s) {
  const auto parts = split_list(s);
  std::vector<double> v;
  for (const auto& p : parts) v.push_back(std::stod(p));
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() == 3) return {v[0], v[1], v[2]};
  throw ArgumentError(fmt::format("spacing '{}' needs 1 or 3 values", s));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Whole-body segmentation evaluation toolkit"};
  app.require_subcommand(1);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against references listed in a manifest");
  std::string manifest_path, out_dir, subset = "full40", taxonomy = "body40", format = "csv", classes, strata;
  unsigned workers = 0;
  int connectivity = 26;
  bool no_hd = false, auto_resample = false;
  evaluate->add_option("--manifest", manifest_path, "Manifest CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out_dir, "Report directory")->required();
  evaluate->add_option("--subset", subset, "full40 | subset24_t2 | subset13_amos | custom");
  evaluate->add_option("--classes", classes, "Comma-separated class ids for --subset custom");
  evaluate->add_option("--taxonomy", taxonomy, "Class taxonomy");
  evaluate->add_option("--workers", workers, "Worker threads (default: WBSEG_WORKERS or core count)");
  evaluate->add_option("--format", format, "Records format")->check(CLI::IsMember({"csv", "json"}));
  evaluate->add_option("--connectivity", connectivity, "Vessel component adjacency")->check(CLI::IsMember({6, 26}));
  evaluate->add_option("--strata", strata, "Comma-separated strata keys for the summary");
  evaluate->add_flag("--no-hd", no_hd, "Skip HD95");
  evaluate->add_flag("--auto-resample", auto_resample, "Resample predictions onto mismatching reference grids");

  // report
  auto* report = app.add_subcommand("report", "Rebuild report tables from a records file");
  std::string records_path;
  report->add_option("--records", records_path, "records.csv or records.json")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out_dir, "Report directory")->required();
  report->add_option("--taxonomy", taxonomy, "Class taxonomy");
  report->add_option("--format", format, "Records format")->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--strata", strata, "Comma-separated strata keys for the summary");

  // stitch
  auto* stitch = app.add_subcommand("stitch", "Stitch station volumes onto their union grid");
  std::vector<std::string> station_files;
  std::string out_file, blend = "average";
  bool labels_mode = false;
  stitch->add_option("stations", station_files, "Station volumes in order")->required()->check(CLI::ExistingFile);
  stitch->add_option("--out", out_file, "Output volume")->required();
  stitch->add_option("--blend", blend, "average | last-wins")->check(CLI::IsMember({"average", "last-wins"}));
  stitch->add_flag("--labels", labels_mode, "Stations are label maps");
  stitch->add_option("--workers", workers, "Worker threads");

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "Single-volume preprocessing");
  preprocess->require_subcommand(1);
  std::string input, spacing = "1", interp = "trilinear", table_path, preset, target_path;
  int bins = 256;
  double tolerance = kDefaultPropagationToleranceMm;

  auto* resample_cmd = preprocess->add_subcommand("resample", "Resample to a target spacing");
  resample_cmd->add_option("input", input)->required()->check(CLI::ExistingFile);
  resample_cmd->add_option("--out", out_file)->required();
  resample_cmd->add_option("--spacing", spacing, "mm, one value or x,y,z");
  resample_cmd->add_option("--interp", interp)->check(CLI::IsMember({"trilinear", "nearest"}));
  resample_cmd->add_flag("--labels", labels_mode, "Input is a label map (nearest only)");

  auto* invert_cmd = preprocess->add_subcommand("invert", "Invert intensities");
  invert_cmd->add_option("input", input)->required()->check(CLI::ExistingFile);
  invert_cmd->add_option("--out", out_file)->required();

  auto* equalize_cmd = preprocess->add_subcommand("equalize", "Histogram equalisation");
  equalize_cmd->add_option("input", input)->required()->check(CLI::ExistingFile);
  equalize_cmd->add_option("--out", out_file)->required();
  equalize_cmd->add_option("--bins", bins);

  auto* remap_cmd = preprocess->add_subcommand("remap", "Remap label classes");
  remap_cmd->add_option("input", input)->required()->check(CLI::ExistingFile);
  remap_cmd->add_option("--out", out_file)->required();
  auto* table_opt = remap_cmd->add_option("--table", table_path, "Remap table file")->check(CLI::ExistingFile);
  auto* preset_opt = remap_cmd->add_option("--preset", preset, "Built-in table");
  table_opt->excludes(preset_opt);

  auto* propagate_cmd = preprocess->add_subcommand("propagate", "Carry labels onto another sequence's grid");
  propagate_cmd->add_option("input", input, "Source label map")->required()->check(CLI::ExistingFile);
  propagate_cmd->add_option("--target", target_path, "Volume defining the target grid")
      ->required()
      ->check(CLI::ExistingFile);
  propagate_cmd->add_option("--out", out_file)->required();
  propagate_cmd->add_option("--tolerance", tolerance, "mm");

  // components
  auto* components = app.add_subcommand("components", "Count connected components of a mask");
  components->add_option("mask", input, "Mask volume, nonzero = foreground")->required()->check(CLI::ExistingFile);
  components->add_option("--connectivity", connectivity)->check(CLI::IsMember({6, 26}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFatal;
  }

  try {
    if (workers == 0) workers = default_worker_count();

    if (*evaluate) {
      EvaluationManifest manifest = load_manifest(manifest_path);
      manifest.taxonomy = taxonomy;
      manifest.subset = subset;
      for (const auto& c : split_list(classes)) manifest.custom_classes.push_back(static_cast<std::uint32_t>(std::stoul(c)));
      EvaluationOptions options;
      options.connectivity = connectivity_from_int(connectivity);
      options.hd_enabled = !no_hd;
      options.workers = workers;
      options.auto_resample = auto_resample;
      options.strata_keys = split_list(strata);
      const ReportBundle bundle = run_evaluation(manifest, options);
      emit_report(bundle, parse_format(format), out_dir);
      print_summary(bundle);
      return bundle.errors.empty() ? kOk : kRowErrors;
    }

    if (*report) {
      LoadedRecords loaded = load_records(records_path);
      std::set<std::uint32_t> ids;
      for (const auto& r : loaded.records) ids.insert(r.class_id);
      std::vector<std::string> keys = split_list(strata);
      if (keys.empty()) {
        for (const auto& c : loaded.strata_columns) {
          if (c != "age") keys.push_back(c);
        }
      }
      const ReportBundle bundle = build_report(std::move(loaded.records), std::move(loaded.errors), taxonomy,
                                               {ids.begin(), ids.end()}, std::move(keys));
      emit_report(bundle, parse_format(format), out_dir);
      print_summary(bundle);
      return bundle.errors.empty() ? kOk : kRowErrors;
    }

    if (*stitch) {
      std::size_t uncovered = 0;
      if (labels_mode) {
        std::vector<LabelVolume> stations;
        for (const auto& f : station_files) stations.push_back(read_labels(f));
        const auto out = stitch_stations(std::span<const LabelVolume>(stations), workers);
        write_volume(out.volume, out_file);
        uncovered = out.uncovered_voxels;
      } else {
        std::vector<ImageVolume> stations;
        for (const auto& f : station_files) stations.push_back(read_image(f));
        const auto out = stitch_stations(std::span<const ImageVolume>(stations),
                                         blend == "last-wins" ? Blend::LastWins : Blend::Average, workers);
        write_volume(out.volume, out_file);
        uncovered = out.uncovered_voxels;
      }
      fmt::print("uncovered voxels: {}\n", uncovered);
      return kOk;
    }

    if (*resample_cmd) {
      const ResamplePolicy policy{parse_spacing(spacing),
                                  interp == "nearest" ? Interpolation::Nearest : Interpolation::Trilinear};
      if (labels_mode) {
        write_volume(resample(read_labels(input), policy), out_file);
      } else {
        write_volume(resample(read_image(input), policy), out_file);
      }
      return kOk;
    }
    if (*invert_cmd) {
      write_volume(invert_intensity(read_image(input)), out_file);
      return kOk;
    }
    if (*equalize_cmd) {
      write_volume(equalize_histogram(read_image(input), bins), out_file);
      return kOk;
    }
    if (*remap_cmd) {
      if (table_path.empty() && preset.empty()) throw ArgumentError("remap needs --table or --preset");
      const RemapTable table = table_path.empty() ? RemapTable::preset(preset) : RemapTable::load(table_path);
      write_volume(remap_labels(read_labels(input), table), out_file);
      return kOk;
    }
    if (*propagate_cmd) {
      const Grid target = std::visit([](const auto& v) { return v.grid(); }, read_volume(target_path));
      write_volume(propagate_labels(read_labels(input), target, tolerance), out_file);
      return kOk;
    }

    if (*components) {
      const auto result = label_components(mask_of(read_volume(input)), connectivity_from_int(connectivity));
      fmt::print("{}\n", result.count);
      for (const auto s : result.sizes) fmt::print("{}\n", s);
      return kOk;
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "wbseg: {}\n", e.what());
    return kFatal;
  }
  return kFatal;
}
