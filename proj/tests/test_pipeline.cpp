#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"
#include "support/tmpdir.hpp"
#include "tsrecon/pipeline.hpp"

using namespace tsrecon;
using testsupport::DeskFixture;
using testsupport::TempDir;

namespace {

RunConfig desk_config(const TempDir& tmp, const std::string& out) {
  RunConfig cfg;
  cfg.snapshot_path = tmp.file("snapshot.json");
  cfg.registry_path = tmp.file("geo_registry.csv");
  cfg.history_path = tmp.file("regional_history.csv");
  cfg.offers_path = tmp.file("offers.csv");
  cfg.out_dir = tmp.file(out);
  cfg.seed = 9001;
  cfg.geo_restarts = 2;  // keep the unit run quick
  cfg.geo_budget = 40000;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config validation fires before any stage runs") {
  TempDir tmp("pipeline_config");
  DeskFixture fx = testsupport::build_desk_fixture(5);
  testsupport::write_desk_fixture(fx, tmp.dir());
  RunConfig cfg = desk_config(tmp, "out");

  SECTION("missing input path") {
    cfg.offers_path = tmp.file("nope.csv");
    try {
      run_pipeline(cfg);
      FAIL("expected validation error");
    } catch (const error& e) {
      CHECK(e.code() == errc::validation);
    }
    CHECK_FALSE(std::filesystem::exists(cfg.out_dir + "/assignment.csv"));
  }
  SECTION("target granularity must divide the source") {
    cfg.target_minutes = 7;
    try {
      run_pipeline(cfg);
      FAIL("expected validation error");
    } catch (const error& e) {
      CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
    CHECK_FALSE(std::filesystem::exists(cfg.out_dir + "/assignment.csv"));
  }
}

TEST_CASE("day-boundary trimming keeps whole days") {
  ComponentSeries s;
  s.component_ids = {"a"};
  s.period_minutes = 5;
  s.start_epoch_s = 0;
  s.values_mw = Eigen::MatrixXd::Random(1, 289);
  ComponentSeries trimmed = trim_day_boundary(s);
  CHECK(trimmed.period_count() == 288);

  s.values_mw = Eigen::MatrixXd::Random(1, 283);  // does not span whole days
  CHECK(trim_day_boundary(s).period_count() == 283);
}

TEST_CASE("desk pipeline completes, conserves, and reproduces bit for bit") {
  TempDir tmp("pipeline_desk");
  DeskFixture fx = testsupport::build_desk_fixture(5);
  testsupport::write_desk_fixture(fx, tmp.dir());
  RunConfig cfg = desk_config(tmp, "out1");
  cfg.parallelism = 2;

  RunManifest manifest = run_pipeline(cfg);
  CHECK(manifest.status == "complete");
  REQUIRE(manifest.stages.size() >= 6);

  // 49 half-hour knots -> 289 five-minute points -> 288 after the day trim
  ComponentSeries restored = load_component_series(cfg.out_dir + "/series_load_restored.csv");
  CHECK(restored.period_count() == 288);
  CHECK(restored.component_count() == 100);
  CHECK(restored.lineage == Lineage::restored);

  // conservation of the restored series against the interpolated truth;
  // fixture component D<i> lives in region R<i mod 12>
  RegionalSeries history = load_regional_history(cfg.history_path, Quantity::load);
  RegionalSeries fine = trim_day_boundary(interpolate(history, 5));
  std::map<std::string, int> comp_row;
  for (int i = 0; i < restored.component_count(); ++i)
    comp_row[restored.component_ids[i]] = i;
  for (int t = 0; t < fine.period_count(); t += 37) {
    for (int r = 0; r < fine.region_count(); ++r) {
      double sum = 0.0;
      for (int i = 0; i < 100; ++i)
        if (i % 12 == r) sum += restored.values_mw(comp_row.at("D" + std::to_string(i)), t);
      int row = fine.region_row("R" + std::to_string(r));
      CHECK(sum == Catch::Approx(fine.values_mw(row, t)).epsilon(1e-6));
    }
  }

  // restoration did real work on this fixture
  int solved = 0;
  for (const StageRecord& rec : manifest.stages)
    if (rec.name == "restore")
      solved = static_cast<int>(rec.summary["periods"].get<std::size_t>()) -
               static_cast<int>(rec.summary["unchanged_periods"].get<std::size_t>());
  CHECK(solved > 0);

  SECTION("rerun with the same config and seed is byte-identical") {
    RunConfig cfg2 = desk_config(tmp, "out2");
    cfg2.parallelism = 1;  // parallelism degree must not affect artifacts
    run_pipeline(cfg2);
    for (const char* name :
         {"assignment.csv", "bid_assignment.csv", "generator_offers.csv",
          "series_load_disaggregated.csv", "series_wind_disaggregated.csv",
          "series_solar_disaggregated.csv", "series_load_restored.csv", "restore_report.csv",
          "validate_report.json", "validate_projection.csv"}) {
      INFO(name);
      CHECK(slurp(cfg.out_dir + "/" + name) == slurp(cfg2.out_dir + "/" + name));
    }
    RunManifest m3 = run_pipeline(desk_config(tmp, "out3"));
    CHECK(manifest.inputs == m3.inputs);
    REQUIRE(manifest.stages.size() == m3.stages.size());
    for (std::size_t i = 0; i < manifest.stages.size(); ++i)
      CHECK(manifest.stages[i].outputs == m3.stages[i].outputs);
  }
}

TEST_CASE("stage artifacts compose: restored series re-enters the checker") {
  TempDir tmp("pipeline_compose");
  DeskFixture fx = testsupport::build_desk_fixture(5);
  testsupport::write_desk_fixture(fx, tmp.dir());
  RunConfig cfg = desk_config(tmp, "out");
  run_pipeline(cfg);

  NetworkSnapshot snapshot = load_snapshot(cfg.snapshot_path);
  DCModel model = build_dc_model(snapshot, cfg.derate);
  ComponentSeries restored = load_component_series(cfg.out_dir + "/series_load_restored.csv");
  std::map<std::string, int> row;
  for (int i = 0; i < restored.component_count(); ++i) row[restored.component_ids[i]] = i;
  for (int t = 0; t < restored.period_count(); t += 48) {
    Eigen::VectorXd per_load(model.loads());
    for (int i = 0; i < model.loads(); ++i)
      per_load(i) = restored.values_mw(row.at(model.load_ids[i]), t);
    FeasibilityResult f = feasibility_check(model, model.bus_loads(per_load));
    CHECK(f.feasible);
  }
}

TEST_CASE("validation report orders correlated above uniform on the desk fixture") {
  TempDir tmp("pipeline_validate");
  DeskFixture fx = testsupport::build_desk_fixture(13);
  testsupport::write_desk_fixture(fx, tmp.dir());
  RunConfig cfg = desk_config(tmp, "out");
  run_pipeline(cfg);

  std::ifstream in(cfg.out_dir + "/validate_report.json");
  nlohmann::json report;
  in >> report;
  for (const std::string noise : {"0.05", "0.1"}) {
    double uniform = report["overlap"]["uniform"][noise].get<double>();
    double correlated = report["overlap"]["correlated"][noise].get<double>();
    INFO("noise " << noise << ": uniform " << uniform << " correlated " << correlated);
    CHECK(correlated > uniform);
  }
}

TEST_CASE("validate_series compares two regional series end to end") {
  TempDir tmp("pipeline_validate_series");
  DeskFixture fx = testsupport::build_desk_fixture(5);
  testsupport::write_desk_fixture(fx, tmp.dir());
  RegionalSeries hist = load_regional_history(tmp.file("regional_history.csv"), Quantity::load);
  ValidationReport rep = validate_series(hist, hist);
  CHECK(rep.overlap == 1.0);  // identical series overlap perfectly
  CHECK(rep.pearson_historical.matrix(0, 0) == Catch::Approx(1.0));
}
