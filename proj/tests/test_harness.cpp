#include <doctest.h>

#include <fmt/format.h>

#include <set>
#include <sstream>

#include "oracles.hpp"
#include "wbseg/error.hpp"
#include "wbseg/harness.hpp"
#include "wbseg/metrics.hpp"
#include "wbseg/nifti.hpp"
#include "wbseg/taxonomy.hpp"

using namespace wbseg;
namespace fs = std::filesystem;

namespace {

// Every body40 class present: labels cycle 1..40 over the grid.
LabelVolume all_classes(const Grid& g, std::uint32_t shift = 0) {
  std::vector<std::uint32_t> labels(g.voxel_count());
  for (std::size_t l = 0; l < labels.size(); ++l) labels[l] = static_cast<std::uint32_t>((l + shift) % 40 + 1);
  return LabelVolume(g, std::move(labels));
}

LabelVolume random_labels(oracle::Rng& rng, const Grid& g, std::uint32_t top) {
  std::vector<std::uint32_t> labels(g.voxel_count());
  for (auto& l : labels) l = static_cast<std::uint32_t>(oracle::uniform_int(rng, 0, top));
  return LabelVolume(g, std::move(labels));
}

// Classes 1..6 plus the vessel class 13.
LabelVolume organ_and_vessel_labels(oracle::Rng& rng, const Grid& g) {
  std::vector<std::uint32_t> labels(g.voxel_count());
  for (auto& l : labels) {
    l = static_cast<std::uint32_t>(oracle::uniform_int(rng, 0, 7));
    if (l == 7) l = 13;
  }
  return LabelVolume(g, std::move(labels));
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("csv helpers") {
    const auto rows = parse_csv("a,b,c\n1,\"x, y\",\"say \"\"hi\"\"\"\r\n\n2,,3");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1] == std::vector<std::string>{"1", "x, y", "say \"hi\""});
    CHECK(rows[2] == std::vector<std::string>{"2", "", "3"});
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(parse_csv(csv_escape("q\"uote,") + "\n")[0][0] == "q\"uote,");
    CHECK_THROWS_AS(parse_csv("\"open"), FormatError);
  }

  TEST_CASE("manifest parsing") {
    const auto m = parse_manifest("scan_id,prediction,reference,sequence,sex,age\n"
                                  "s1,p/1.nii.gz,/abs/r1.nii.gz,in,F,54\n"
                                  "s2,p/2.nii.gz,r/2.nii.gz,water,M,61\n",
                                  "/data");
    REQUIRE(m.rows.size() == 2);
    CHECK(m.strata_columns == std::vector<std::string>{"sequence", "sex", "age"});
    CHECK(m.rows[0].prediction == fs::path("/data/p/1.nii.gz"));
    CHECK(m.rows[0].reference == fs::path("/abs/r1.nii.gz"));
    CHECK(m.rows[1].strata.at("sex") == "M");
    CHECK(m.classes().size() == 40);
    CHECK_NOTHROW(m.validate());

    CHECK_THROWS_AS(parse_manifest("scan_id,prediction,reference,age\ns1,a,b,old\n"), ArgumentError);
    CHECK_THROWS_AS(parse_manifest("scan_id,prediction\ns1,a\n"), ArgumentError);
    CHECK_THROWS_AS(parse_manifest("scan_id,prediction,reference\ns1,a\n"), ArgumentError);

    auto dup = parse_manifest("scan_id,prediction,reference\ns1,a,b\ns1,c,d\n");
    CHECK_THROWS_AS(dup.validate(), ArgumentError);

    auto m2 = m;
    m2.subset = "subset13_amos";
    CHECK(m2.classes().size() == 13);
    m2.subset = "nonsense";
    CHECK_THROWS_AS(m2.validate(), ArgumentError);
    m2.subset = "custom";
    m2.custom_classes = {5, 1, 5};
    CHECK(m2.classes() == std::vector<std::uint32_t>{1, 5});
    m2.custom_classes = {41};
    CHECK_THROWS_AS(m2.classes(), ArgumentError);
  }

  TEST_CASE("box plots") {
    const BoxPlot b = box_plot({8, 7, 6, 5, 4, 3, 2, 1});
    CHECK(b.q1 == 2.75);
    CHECK(b.median == 4.5);
    CHECK(b.q3 == 6.25);
    CHECK(b.lo_whisker == 1);
    CHECK(b.hi_whisker == 8);
    CHECK(b.outliers.empty());

    const BoxPlot o = box_plot({1, 2, 3, 4, 100, -50});
    CHECK(o.outliers == std::vector<double>{-50, 100});
    CHECK(o.lo_whisker == 1);
    CHECK(o.hi_whisker == 4);
    // A whisker can sit inside the box when the next value is an outlier.
    const BoxPlot inside = box_plot({1, 2, 3, 100});
    CHECK(inside.q3 == 27.25);
    CHECK(inside.hi_whisker == 3);
    CHECK(inside.outliers == std::vector<double>{100});
    CHECK_THROWS_AS(box_plot({}), ArgumentError);

    oracle::Rng rng(81);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> v(static_cast<std::size_t>(oracle::uniform_int(rng, 1, 50)));
      for (auto& x : v) x = oracle::uniform_real(rng, 0, 1) * oracle::uniform_real(rng, 0, 1) * 100;
      const BoxPlot p = box_plot(v);
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      CHECK(p.lo_whisker >= *lo);
      CHECK(p.hi_whisker <= *hi);
      CHECK(p.lo_whisker <= p.hi_whisker);
      CHECK(std::count_if(v.begin(), v.end(), [&](double x) { return x >= p.lo_whisker && x <= p.hi_whisker; }) +
                static_cast<std::ptrdiff_t>(p.outliers.size()) ==
            static_cast<std::ptrdiff_t>(v.size()));
    }
  }

  TEST_CASE("identical pairs score perfectly") {
    const auto dir = oracle::scratch_dir("harness_identical");
    const Grid g = Grid::axis_aligned({8, 8, 8}, {1.5, 1.5, 3});
    std::string csv = "scan_id,prediction,reference,sequence\n";
    for (int s = 0; s < 3; ++s) {
      const auto name = "scan" + std::to_string(s) + ".nii.gz";
      write_volume(all_classes(g, static_cast<std::uint32_t>(s)), dir / name);
      csv += "s" + std::to_string(s) + "," + name + "," + name + "," + (s == 2 ? "water" : "in") + "\n";
    }
    const auto manifest = parse_manifest(csv, dir);
    const ReportBundle b = run_evaluation(manifest, {});
    CHECK(b.errors.empty());
    REQUIRE(b.records.size() == 3 * 40);
    for (const auto& r : b.records) {
      CHECK(r.dsc == 1.0);
      CHECK(r.hd95 == 0.0);
    }
    emit_report(b, ReportFormat::Csv, dir / "out");
    const auto summary = lines_of(oracle::slurp(dir / "out" / "summary.csv"));
    // header + "all" block (pooled + 40) + sequence block (2 x 41)
    CHECK(summary.size() == 1 + 41 + 82);
    for (std::size_t i = 1; i < summary.size(); ++i) {
      const bool single = summary[i].rfind("sequence,water,", 0) == 0 && summary[i].rfind("sequence,water,all,", 0) != 0;
      CHECK(summary[i].find(single ? "1.00,0.00," : "1.00 ± 0.00,0.00 ± 0.00") != std::string::npos);
    }
    CHECK(lines_of(oracle::slurp(dir / "out" / "records.csv")).size() == 1 + 120);
    // Seven vessel classes, each a single component in every scan.
    const auto vessels = lines_of(oracle::slurp(dir / "out" / "vessels.csv"));
    CHECK(vessels.size() == 1 + 7);
  }

  TEST_CASE("rows equal per-metric oracles; faults become error rows") {
    oracle::Rng rng(82);
    const auto dir = oracle::scratch_dir("harness_oracle");
    const Grid g = Grid::axis_aligned({7, 6, 5}, {1.25, 0.75, 2.5});
    std::vector<std::pair<LabelVolume, LabelVolume>> pairs;
    std::string csv = "scan_id,prediction,reference,sex,age\n";
    for (int s = 0; s < 4; ++s) {
      pairs.emplace_back(organ_and_vessel_labels(rng, g), organ_and_vessel_labels(rng, g));
      const auto p = "p" + std::to_string(s) + ".nii", r = "r" + std::to_string(s) + ".nii";
      write_volume(pairs.back().first, dir / p);
      write_volume(pairs.back().second, dir / r);
      csv += "s" + std::to_string(s) + "," + p + "," + r + "," + (s % 2 ? "M" : "F") + "," +
             std::to_string(40 + s) + "\n";
    }
    // Missing prediction and a grid mismatch.
    csv += "s4,absent.nii,r0.nii,F,50\n";
    write_volume(random_labels(rng, Grid::axis_aligned({7, 6, 4}, {1.25, 0.75, 2.5}), 6), dir / "short.nii");
    csv += "s5,short.nii,r0.nii,M,51\n";

    auto manifest = parse_manifest(csv, dir);
    manifest.subset = "custom";
    manifest.custom_classes = {1, 2, 3, 4, 5, 6, 13};
    const ReportBundle b = run_evaluation(manifest, {});
    REQUIRE(b.errors.size() == 2);
    CHECK(b.errors[0].scan_id == "s4");
    CHECK(b.errors[1].scan_id == "s5");
    REQUIRE(b.records.size() == 4 * 7);
    for (const auto& r : b.records) {
      const int s = r.scan_id[1] - '0';
      const BinaryMask pm = extract_binary_mask(pairs[static_cast<std::size_t>(s)].first, r.class_id);
      const BinaryMask rm = extract_binary_mask(pairs[static_cast<std::size_t>(s)].second, r.class_id);
      const auto c = oracle::overlap_counts(pm, rm);
      CHECK(*r.dsc == static_cast<double>(2 * c.both) / static_cast<double>(c.a + c.b));
      CHECK(std::abs(*r.hd95 - oracle::brute_hd95(pm, rm)) <= 1e-9);
      if (r.class_id == 13) {
        REQUIRE(r.components.has_value());
        const auto ids = oracle::flood_fill(pm, 26);
        CHECK(*r.components == *std::max_element(ids.begin(), ids.end()));
      } else {
        CHECK_FALSE(r.components.has_value());
      }
    }
    REQUIRE(b.tests.size() == 2);
    CHECK(b.tests[0].result.has_value());
    CHECK(b.tests[0].n_a == 2);
    CHECK(b.tests[1].result.has_value());
    CHECK(b.tests[1].n_a == 4);

    // The mismatching row evaluates once resampling is allowed.
    EvaluationOptions resampling;
    resampling.auto_resample = true;
    const ReportBundle rb = run_evaluation(manifest, resampling);
    CHECK(rb.errors.size() == 1);
    CHECK(rb.records.size() == 5 * 7);
  }

  TEST_CASE("empty reference class scores zero") {
    const auto dir = oracle::scratch_dir("harness_fp");
    const Grid g = Grid::axis_aligned({4, 4, 4}, {1, 1, 1});
    std::vector<std::uint32_t> pred(64, 5), ref(64, 5);
    pred[0] = 7;
    ref[0] = 5;
    write_volume(LabelVolume(g, pred), dir / "p.nii");
    write_volume(LabelVolume(g, ref), dir / "r.nii");
    auto m = parse_manifest("scan_id,prediction,reference\nx,p.nii,r.nii\n", dir);
    m.subset = "custom";
    m.custom_classes = {5, 7, 9};
    const ReportBundle b = run_evaluation(m, {});
    REQUIRE(b.records.size() == 3);
    CHECK(*b.records[0].dsc == 2.0 * 63 / 127);
    CHECK(b.records[1].dsc == 0.0);
    CHECK_FALSE(b.records[1].hd95.has_value());
    CHECK_FALSE(b.records[2].dsc.has_value());
  }

  TEST_CASE("subset13_amos gives 13 rows per scan") {
    const auto dir = oracle::scratch_dir("harness_amos");
    const Grid g = Grid::axis_aligned({6, 6, 6}, {1, 1, 1});
    write_volume(all_classes(g), dir / "v.nii");
    auto m = parse_manifest("scan_id,prediction,reference\na,v.nii,v.nii\nb,v.nii,v.nii\n", dir);
    m.subset = "subset13_amos";
    const ReportBundle b = run_evaluation(m, {});
    std::map<std::string, int> per_scan;
    for (const auto& r : b.records) ++per_scan[r.scan_id];
    CHECK(per_scan.size() == 2);
    for (const auto& [id, n] : per_scan) CHECK(n == 13);
  }

  TEST_CASE("reports are identical for any worker count") {
    oracle::Rng rng(83);
    const auto dir = oracle::scratch_dir("harness_workers");
    const Grid g = Grid::axis_aligned({10, 9, 8}, {1, 1, 2});
    std::string csv = "scan_id,prediction,reference,sequence,sex,age\n";
    for (int s = 0; s < 12; ++s) {
      const auto p = "p" + std::to_string(s) + ".nii.gz", r = "r" + std::to_string(s) + ".nii.gz";
      write_volume(random_labels(rng, g, 40), dir / p);
      write_volume(random_labels(rng, g, 40), dir / r);
      csv += fmt::format("scan{:02},{},{},{},{},{}\n", 11 - s, p, r, s % 3 ? "in" : "opp", s % 2 ? "M" : "F", 30 + s);
    }
    csv += "broken,nothing.nii,r0.nii.gz,in,F,44\n";
    const auto m = parse_manifest(csv, dir);
    std::string reference;
    for (const unsigned w : {1u, 2u, 5u, 16u}) {
      EvaluationOptions o;
      o.workers = w;
      const auto out = dir / ("out" + std::to_string(w));
      emit_report(run_evaluation(m, o), ReportFormat::Json, out);
      std::string all;
      for (const char* f : {"records.json", "summary.csv", "vessels.csv", "boxplot.csv", "tests.csv"}) {
        all += oracle::slurp(out / f);
      }
      if (reference.empty()) {
        reference = all;
      } else {
        CHECK(all == reference);
      }
    }
  }

  TEST_CASE("vessel table and record round trips") {
    const std::vector<std::int64_t> counts{1, 2, 3, 1, 3};
    std::vector<MetricRecord> records;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      MetricRecord r;
      r.scan_id = "s" + std::to_string(i);
      r.class_id = 15;
      r.dsc = 0.5 + 0.1 * static_cast<double>(i);
      r.hd95 = i == 2 ? std::nullopt : std::optional<double>(1.0 / 3.0 * static_cast<double>(i));
      r.components = counts[i];
      r.strata["sex"] = i % 2 ? "M" : "F";
      r.strata["note"] = "has, comma";
      records.push_back(r);
    }
    const ReportBundle b = build_report(records, {{"zz", "boom"}}, "body40", {15}, {"sex"});
    REQUIRE(b.vessels.size() == 1);
    REQUIRE(b.vessels[0].report.has_value());
    CHECK(b.vessels[0].report->vc == 0.4);
    CHECK(b.vessels[0].report->multi_fraction == 0.6);

    const auto dir = oracle::scratch_dir("harness_vessels");
    emit_report(b, ReportFormat::Csv, dir);
    const auto vessels = lines_of(oracle::slurp(dir / "vessels.csv"));
    REQUIRE(vessels.size() == 2);
    CHECK(vessels[1].rfind("15,portal_vein_and_splenic_vein (n=5),0.40,0.60,2.67 ± 0.58,5,0,", 0) == 0);

    for (const auto format : {ReportFormat::Csv, ReportFormat::Json}) {
      const auto out = dir / (format == ReportFormat::Csv ? "csv" : "json");
      emit_report(b, format, out);
      const LoadedRecords back = load_records(out / (format == ReportFormat::Csv ? "records.csv" : "records.json"));
      REQUIRE(back.records.size() == records.size());
      for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back.records[i].scan_id == records[i].scan_id);
        CHECK(back.records[i].dsc == records[i].dsc);
        CHECK(back.records[i].hd95 == records[i].hd95);
        CHECK(back.records[i].components == records[i].components);
        CHECK(back.records[i].strata == records[i].strata);
      }
      REQUIRE(back.errors.size() == 1);
      CHECK(back.errors[0].message == "boom");
    }

    CHECK_THROWS_AS(emit_report(b, ReportFormat::Csv, dir / "vessels.csv"), IoError);
    CHECK_THROWS_AS(emit_report(ReportBundle{}, ReportFormat::Csv, dir / "empty"), ArgumentError);
  }

  TEST_CASE("worker count environment override") {
    setenv("WBSEG_WORKERS", "3", 1);
    CHECK(default_worker_count() == 3);
    setenv("WBSEG_WORKERS", "zero", 1);
    CHECK_THROWS_AS(default_worker_count(), ArgumentError);
    unsetenv("WBSEG_WORKERS");
    CHECK(default_worker_count() >= 1);
  }
}
