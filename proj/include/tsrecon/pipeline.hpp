#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsrecon/bids.hpp"
#include "tsrecon/dcgrid.hpp"
#include "tsrecon/disagg.hpp"
#include "tsrecon/geo_assign.hpp"
#include "tsrecon/io.hpp"
#include "tsrecon/model.hpp"
#include "tsrecon/sampling.hpp"
#include "tsrecon/stats.hpp"

namespace tsrecon {

struct RunConfig {
  std::string snapshot_path;
  std::string registry_path;
  std::string history_path;
  std::string offers_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int parallelism = 1;
  double derate = 0.95;
  int target_minutes = 5;
  double km_per_ohm = 10.0;
  int geo_restarts = 8;
  std::int64_t geo_budget = 200000;
  int offer_horizon_hours = 24;
  bool uniform_share_fallback = false;
  bool dump_panels = false;
  std::vector<double> baseline_noise = {0.05, 0.10};
  double validate_length_scale_km = 300.0;
  KernelConfig kernel_load;
  KernelConfig kernel_wind;
  KernelConfig kernel_solar;

  void validate() const {
    for (const std::string* p : {&snapshot_path, &registry_path, &history_path, &offers_path}) {
      if (p->empty()) throw_validation("config: an input path is empty");
      if (!std::filesystem::exists(*p)) throw_validation("config: input does not exist: " + *p);
    }
    if (target_minutes <= 0) throw_validation("config: target granularity must be positive");
    if (derate <= 0 || derate > 1) throw_validation("config: derate must be in (0, 1]");
    if (parallelism < 1) throw_validation("config: parallelism must be >= 1");
    kernel_load.validate();
    kernel_wind.validate();
    kernel_solar.validate();
    for (double nz : baseline_noise)
      if (nz < 0) throw_validation("config: baseline noise must be nonnegative");
  }
};

inline std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path + " for digest");
  std::uint64_t h = 0xCBF29CE484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001B3ull;
    }
  }
  return h;
}

inline std::string digest_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// stage functions; each consumes/produces the documented artifacts so it can
// run standalone through the CLI or composed in run_pipeline
// ---------------------------------------------------------------------------

struct GeoStageResult {
  GeoAssignment assignment;
  AssignmentProblem problem;
  GeoRegistry registry;
};

inline GeoStageResult stage_geo(const NetworkSnapshot& snapshot, const GeoRegistry& registry,
                                const RunConfig& config) {
  GeoStageResult res;
  res.registry = registry;
  res.problem = build_problem(snapshot, registry, config.km_per_ohm);
  LocalSearchOptions opt;
  opt.budget = config.geo_budget;
  opt.restarts = config.geo_restarts;
  res.assignment = local_search(res.problem, derive_seed(config.seed, "geo", 0), opt);
  return res;
}

inline void write_assignment(const GeoStageResult& geo, const std::string& path) {
  CsvWriter w(path);
  w.row({"substation_id", "location_id", "lat", "lon"});
  for (int i = 0; i < geo.problem.substation_count(); ++i) {
    int j = geo.assignment.location_of[i];
    const GeoEntry& e = geo.registry.entries[j];
    w.row({geo.problem.substation_ids[i], e.location_id, fmt_double(e.lat_deg),
           fmt_double(e.lon_deg)});
  }
  w.close();
}

inline void write_geo_report(const GeoStageResult& geo, const std::string& path) {
  nlohmann::json j;
  j["objective_km2"] = geo.assignment.objective_km2;
  j["initial_objective_km2"] = geo.assignment.initial_objective_km2;
  j["moves_evaluated"] = geo.assignment.moves_evaluated;
  j["moves_accepted"] = geo.assignment.moves_accepted;
  j["substations"] = geo.problem.substation_count();
  j["locations"] = geo.problem.location_count();
  std::ofstream out(path);
  if (!out) throw_io("cannot write " + path);
  out << j.dump(2) << "\n";
}

// substation -> (lat, lon) map read back from an assignment artifact
inline std::map<std::string, std::pair<double, double>> load_assignment_coords(
    const std::string& path) {
  CsvFile csv = read_csv(path);
  int c_sub = csv.column("substation_id", path);
  int c_lat = csv.column("lat", path);
  int c_lon = csv.column("lon", path);
  std::map<std::string, std::pair<double, double>> out;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& r = csv.rows[i];
    out[r[c_sub]] = {parse_double(r[c_lat], path), parse_double(r[c_lon], path)};
  }
  return out;
}

inline void write_bid_assignment(const OfferBook& book, const NetworkSnapshot& snapshot,
                                 const std::string& path) {
  std::map<std::string, const Generator*> gen_by_id;
  for (const Generator& g : snapshot.generators) gen_by_id[g.id] = &g;
  CsvWriter w(path);
  w.row({"generator_id", "participant_id", "scale_ratio"});
  for (const auto& [gen_id, idx] : book.assignment) {
    const Participant& p = book.participants[idx];
    double ratio = p.capacity_mw > 0 ? gen_by_id.at(gen_id)->p_max_mw / p.capacity_mw : 0.0;
    w.row({gen_id, p.id, fmt_double(ratio)});
  }
  w.close();
}

inline void write_generator_offers(const std::vector<GeneratorOffer>& offers,
                                   const std::string& path) {
  CsvWriter w(path);
  w.row({"generator_id", "hour", "price_usd_per_mw", "max_mw", "min_mw"});
  for (const GeneratorOffer& go : offers)
    for (const HourlyOffer& o : go.hourly)
      w.row({go.generator_id, std::to_string(o.hour), fmt_double(o.price_usd_per_mw),
             fmt_double(o.max_mw), fmt_double(o.min_mw)});
  w.close();
}

inline void write_panel(const VolatilityPanel& panel, const std::vector<std::string>& ids,
                        const std::string& path) {
  CsvWriter w(path);
  w.row({"component_id", "period", "multiplier"});
  for (int i = 0; i < panel.component_count(); ++i)
    for (int t = 0; t < panel.period_count(); ++t)
      w.row({ids[i], std::to_string(t), fmt_double(panel.values(i, t))});
  w.close();
}

inline void write_pearson(const PearsonResult& pearson, const std::vector<std::string>& region_ids,
                          const std::string& path) {
  CsvWriter w(path);
  std::vector<std::string> header = {"region_id"};
  header.insert(header.end(), region_ids.begin(), region_ids.end());
  w.row(header);
  for (int r = 0; r < pearson.matrix.rows(); ++r) {
    std::vector<std::string> row = {region_ids[r]};
    for (int c = 0; c < pearson.matrix.cols(); ++c) row.push_back(fmt_double(pearson.matrix(r, c)));
    w.row(row);
  }
  w.close();
}

inline void write_projection(const ProjectionReport& rep, const std::string& path) {
  CsvWriter w(path);
  w.row({"source", "pc1", "pc2"});
  for (int i = 0; i < rep.historical_2d.rows(); ++i)
    w.row({"historical", fmt_double(rep.historical_2d(i, 0)), fmt_double(rep.historical_2d(i, 1))});
  for (int i = 0; i < rep.synthetic_2d.rows(); ++i)
    w.row({"synthetic", fmt_double(rep.synthetic_2d(i, 0)), fmt_double(rep.synthetic_2d(i, 1))});
  w.close();
}

// Drop a terminal sample that falls exactly on a day boundary: series are
// left-closed daily intervals, so that sample opens the next day and a whole
// day keeps exactly 24h/granularity periods.
template <typename SeriesT>
inline SeriesT trim_day_boundary(const SeriesT& series) {
  const int T = static_cast<int>(series.values_mw.cols());
  if (T < 2) return series;
  std::int64_t span = static_cast<std::int64_t>(T - 1) * series.period_minutes * 60;
  if (span % 86400 != 0) return series;
  SeriesT out = series;
  out.values_mw = series.values_mw.leftCols(T - 1).eval();
  return out;
}

// Regional-level comparison report: correlation matrices for both series,
// a pooled 2-D projection, and the coverage score of the synthetic cloud.
struct ValidationReport {
  PearsonResult pearson_historical;
  PearsonResult pearson_synthetic;
  ProjectionReport projection;
  double overlap = 0.0;
};

inline ValidationReport validate_series(const RegionalSeries& historical,
                                        const RegionalSeries& synthetic, int k = 5) {
  if (historical.region_ids != synthetic.region_ids)
    throw_validation("validate: series cover different regions");
  ValidationReport rep;
  rep.pearson_historical = pearson_matrix(historical);
  rep.pearson_synthetic = pearson_matrix(synthetic);
  rep.projection = pca_project(historical.values_mw.transpose(), synthetic.values_mw.transpose());
  rep.overlap = overlap_score(rep.projection.historical_2d, rep.projection.synthetic_2d, k);
  rep.projection.overlap_score = rep.overlap;
  return rep;
}

// Disaggregates the national total back into regional profiles two ways —
// fixed snapshot ratios with independent noise, and correlated multipliers
// sampled on the region centroids — then scores each cloud against the
// historical regional cloud in a pooled 2-D projection.
inline nlohmann::json run_regional_validation(const RegionalSeries& history,
                                              const NetworkSnapshot& snapshot,
                                              const GeoStageResult& geo, const RunConfig& config,
                                              const std::string& pearson_path,
                                              const std::string& projection_path) {
  const int R = history.region_count();
  const int T = history.period_count();
  Eigen::VectorXd national(T);
  for (int t = 0; t < T; ++t) national(t) = history.values_mw.col(t).sum();

  // regional share of the snapshot's nominal load
  Eigen::VectorXd ratios = Eigen::VectorXd::Zero(R);
  double grand = 0.0;
  for (const Load& l : snapshot.loads) grand += l.nominal_mw;
  for (int r = 0; r < R; ++r) {
    double sum = 0.0;
    for (const Load& l : snapshot.loads)
      if (snapshot.region_of_bus(l.bus) == history.region_ids[r]) sum += l.nominal_mw;
    ratios(r) = grand > 0 ? sum / grand : 1.0 / R;
  }

  // region centroids from the assigned substation locations
  std::vector<double> lat(R, 0.0), lon(R, 0.0);
  std::vector<int> hits(R, 0);
  for (int i = 0; i < geo.problem.substation_count(); ++i) {
    const GeoEntry& e = geo.registry.entries[geo.assignment.location_of[i]];
    for (int r = 0; r < R; ++r)
      if (snapshot.buses[i].region_id == history.region_ids[r]) {
        lat[r] += e.lat_deg;
        lon[r] += e.lon_deg;
        ++hits[r];
      }
  }
  for (int r = 0; r < R; ++r) {
    if (hits[r] == 0) continue;
    lat[r] /= hits[r];
    lon[r] /= hits[r];
  }

  PearsonResult ph = pearson_matrix(history);
  write_pearson(ph, history.region_ids, pearson_path);

  Eigen::MatrixXd hist_points = history.values_mw.transpose();  // T x R
  Eigen::MatrixXd centroid_dist = distance_matrix_km(lat, lon);

  nlohmann::json uniform_scores, correlated_scores;
  bool projection_written = false;
  nlohmann::json explained;
  for (std::size_t level = 0; level < config.baseline_noise.size(); ++level) {
    double noise = config.baseline_noise[level];
    std::string key = fmt_double(noise);

    ComponentSeries base = baseline_uniform(
        national, history.region_ids, ratios, noise,
        derive_seed(config.seed, "validate-baseline", level), Quantity::load,
        history.period_minutes, history.start_epoch_s);
    ProjectionReport proj_u = pca_project(hist_points, base.values_mw.transpose());
    uniform_scores[key] = overlap_score(proj_u.historical_2d, proj_u.synthetic_2d);

    KernelConfig kc;
    kc.variance_scale = variance_scale_for_std(std::max(noise, 1e-6));
    kc.length_scale_km = config.validate_length_scale_km;
    kc.temporal_decay = 1.0;
    VolatilityPanel panel = sample_panel(kc, centroid_dist, T,
                                         derive_seed(config.seed, "validate-correlated", level));
    Eigen::MatrixXd synth(R, T);
    for (int t = 0; t < T; ++t) {
      double denom = ratios.dot(panel.values.col(t));
      synth.col(t) = national(t) * ratios.cwiseProduct(panel.values.col(t)) / denom;
    }
    ProjectionReport proj_c = pca_project(hist_points, synth.transpose());
    correlated_scores[key] = overlap_score(proj_c.historical_2d, proj_c.synthetic_2d);

    if (!projection_written) {
      write_projection(proj_c, projection_path);
      explained = proj_c.explained;
      projection_written = true;
    }
  }

  nlohmann::json j;
  j["explained_variance"] = explained;
  j["overlap"] = {{"uniform", uniform_scores}, {"correlated", correlated_scores}};
  return j;
}

// ---------------------------------------------------------------------------
// whole-pipeline driver
// ---------------------------------------------------------------------------

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  std::map<std::string, std::string> outputs;  // file -> digest
  nlohmann::json summary;
};

struct RunManifest {
  std::string status = "incomplete";
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;  // file -> digest
  std::vector<StageRecord> stages;
  nlohmann::json config_echo;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["status"] = status;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["config"] = config_echo;
    j["stages"] = nlohmann::json::array();
    for (const StageRecord& s : stages) {
      nlohmann::json js;
      js["name"] = s.name;
      js["seconds"] = s.seconds;
      js["outputs"] = s.outputs;
      js["summary"] = s.summary;
      j["stages"].push_back(js);
    }
    return j;
  }
};

namespace detail {

class StageTimer {
public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

inline void record_outputs(StageRecord& rec, const std::vector<std::string>& paths) {
  for (const std::string& p : paths)
    rec.outputs[std::filesystem::path(p).filename().string()] = digest_hex(file_digest(p));
}

}  // namespace detail

inline RunManifest run_pipeline(const RunConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.out_dir);
  auto out = [&](const std::string& name) {
    return (std::filesystem::path(config.out_dir) / name).string();
  };

  RunManifest manifest;
  manifest.seed = config.seed;
  manifest.config_echo = {{"derate", config.derate},
                          {"target_minutes", config.target_minutes},
                          {"km_per_ohm", config.km_per_ohm},
                          {"parallelism", config.parallelism},
                          {"baseline_noise", config.baseline_noise}};
  for (const std::string& p :
       {config.snapshot_path, config.registry_path, config.history_path, config.offers_path})
    manifest.inputs[std::filesystem::path(p).filename().string()] = digest_hex(file_digest(p));

  std::string current_stage = "ingest";
  try {
    // ---- ingest ---------------------------------------------------------
    detail::StageTimer t_ingest;
    NetworkSnapshot snapshot = load_snapshot(config.snapshot_path);
    GeoRegistry registry = load_geo_registry(config.registry_path);
    RegionalSeries history = load_regional_history(config.history_path, Quantity::load);
    if (history.period_minutes % config.target_minutes != 0)
      throw_validation("target granularity " + std::to_string(config.target_minutes) +
                       " min does not divide the history granularity " +
                       std::to_string(history.period_minutes) + " min");
    std::vector<OfferRow> offer_rows = load_offer_rows(config.offers_path);
    {
      StageRecord rec;
      rec.name = "ingest";
      rec.seconds = t_ingest.seconds();
      rec.summary = {{"buses", snapshot.buses.size()},
                     {"branches", snapshot.branches.size()},
                     {"generators", snapshot.generators.size()},
                     {"loads", snapshot.loads.size()},
                     {"history_periods", history.period_count()}};
      manifest.stages.push_back(rec);
    }

    // ---- geo ------------------------------------------------------------
    current_stage = "geo";
    detail::StageTimer t_geo;
    GeoStageResult geo = stage_geo(snapshot, registry, config);
    write_assignment(geo, out("assignment.csv"));
    write_geo_report(geo, out("geo_report.json"));
    {
      StageRecord rec;
      rec.name = "geo";
      rec.seconds = t_geo.seconds();
      detail::record_outputs(rec, {out("assignment.csv"), out("geo_report.json")});
      rec.summary = {{"objective_km2", geo.assignment.objective_km2},
                     {"initial_objective_km2", geo.assignment.initial_objective_km2}};
      manifest.stages.push_back(rec);
    }

    // ---- bids -----------------------------------------------------------
    current_stage = "bids";
    detail::StageTimer t_bids;
    OfferBook book = infer_participants(offer_rows);
    match(book, snapshot);
    std::vector<GeneratorOffer> offers = offer_series(book, snapshot, config.offer_horizon_hours);
    write_bid_assignment(book, snapshot, out("bid_assignment.csv"));
    write_generator_offers(offers, out("generator_offers.csv"));
    {
      StageRecord rec;
      rec.name = "bids";
      rec.seconds = t_bids.seconds();
      detail::record_outputs(rec, {out("bid_assignment.csv"), out("generator_offers.csv")});
      rec.summary = {{"participants", book.participants.size()},
                     {"generators", book.assignment.size()}};
      manifest.stages.push_back(rec);
    }

    // ---- sample + disagg per quantity ------------------------------------
    current_stage = "sample";
    detail::StageTimer t_sample;
    auto coords = load_assignment_coords(out("assignment.csv"));
    auto locate = [&](ComponentSet& set) {
      for (int i = 0; i < set.size(); ++i) {
        auto it = coords.find(set.bus_ids[i]);
        if (it == coords.end())
          throw_validation("no assigned location for bus '" + set.bus_ids[i] + "'");
        set.lat_deg[i] = it->second.first;
        set.lon_deg[i] = it->second.second;
      }
    };

    struct QuantityPlan {
      Quantity quantity;
      const KernelConfig* kernel;
    };
    std::vector<QuantityPlan> plans = {{Quantity::load, &config.kernel_load},
                                       {Quantity::wind, &config.kernel_wind},
                                       {Quantity::solar, &config.kernel_solar}};
    std::map<Quantity, ComponentSeries> fine_series;
    std::map<Quantity, ComponentSet> sets;
    std::int64_t clipped_total = 0;
    StageRecord sample_rec, disagg_rec;
    sample_rec.name = "sample";
    disagg_rec.name = "disagg";
    for (const QuantityPlan& plan : plans) {
      ComponentSet set = component_set(snapshot, plan.quantity);
      if (set.size() == 0) continue;
      locate(set);
      RegionalSeries regional = plan.quantity == Quantity::load
                                    ? history
                                    : load_regional_history(config.history_path, plan.quantity);
      Contributions contrib =
          contribution_vectors(set, regional.region_ids, config.uniform_share_fallback);
      Eigen::MatrixXd dist = distance_matrix_km(set.lat_deg, set.lon_deg);
      VolatilityPanel panel =
          sample_panel(*plan.kernel, dist, regional.period_count(),
                       derive_seed(config.seed, "panel-" + to_string(plan.quantity), 0));
      clipped_total += panel.clipped;
      if (config.dump_panels) {
        std::string panel_path = out("panel_" + to_string(plan.quantity) + ".csv");
        write_panel(panel, set.ids, panel_path);
        detail::record_outputs(sample_rec, {panel_path});
      }
      current_stage = "disagg";
      ComponentSeries coarse = disaggregate(regional, set, contrib, panel);
      ComponentSeries fine = trim_day_boundary(interpolate(coarse, config.target_minutes));
      std::string series_path = out("series_" + to_string(plan.quantity) + "_disaggregated.csv");
      write_component_series(fine, series_path);
      detail::record_outputs(disagg_rec, {series_path});
      fine_series[plan.quantity] = std::move(fine);
      sets[plan.quantity] = std::move(set);
      current_stage = "sample";
    }
    sample_rec.seconds = t_sample.seconds();
    sample_rec.summary = {{"clipped_multipliers", clipped_total}};
    disagg_rec.summary = {{"quantities", fine_series.size()}};
    manifest.stages.push_back(sample_rec);
    manifest.stages.push_back(disagg_rec);

    // ---- restore (loads only) --------------------------------------------
    current_stage = "restore";
    detail::StageTimer t_restore;
    DCModel model = build_dc_model(snapshot, config.derate);
    RegionalSeries fine_history =
        trim_day_boundary(interpolate(history, config.target_minutes));
    HorizonResult horizon =
        restore_horizon([&](int) -> const DCModel& { return model; },
                        fine_series.at(Quantity::load), fine_history, config.parallelism);
    write_component_series(horizon.restored, out("series_load_restored.csv"));
    {
      CsvWriter w(out("restore_report.csv"));
      w.row({"period", "objective", "l1_change_mw", "max_single_change_mw", "status"});
      for (const PeriodReport& r : horizon.reports)
        w.row({std::to_string(r.period), fmt_double(r.objective), fmt_double(r.l1_change_mw),
               fmt_double(r.max_single_change_mw), r.status});
      w.close();
    }
    int unchanged = 0;
    double total_l1 = 0.0;
    for (const PeriodReport& r : horizon.reports) {
      if (r.status == "unchanged") ++unchanged;
      total_l1 += r.l1_change_mw;
    }
    {
      StageRecord rec;
      rec.name = "restore";
      rec.seconds = t_restore.seconds();
      detail::record_outputs(rec, {out("series_load_restored.csv"), out("restore_report.csv")});
      rec.summary = {{"periods", horizon.reports.size()},
                     {"unchanged_periods", unchanged},
                     {"total_l1_change_mw", total_l1}};
      manifest.stages.push_back(rec);
    }

    // ---- validate ---------------------------------------------------------
    current_stage = "validate";
    detail::StageTimer t_validate;
    nlohmann::json validation = run_regional_validation(
        history, snapshot, geo, config, out("validate_pearson_historical.csv"),
        out("validate_projection.csv"));
    {
      std::ofstream vr(out("validate_report.json"));
      if (!vr) throw_io("cannot write validate_report.json");
      vr << validation.dump(2) << "\n";
    }
    {
      StageRecord rec;
      rec.name = "validate";
      rec.seconds = t_validate.seconds();
      detail::record_outputs(rec, {out("validate_pearson_historical.csv"),
                                   out("validate_projection.csv"), out("validate_report.json")});
      rec.summary = validation["overlap"];
      manifest.stages.push_back(rec);
    }

    manifest.status = "complete";
  } catch (...) {
    manifest.status = "failed at stage " + current_stage;
    std::ofstream mj(out("manifest.json"));
    if (mj) mj << manifest.to_json().dump(2) << "\n";
    throw;
  }

  std::ofstream mj(out("manifest.json"));
  if (!mj) throw_io("cannot write manifest.json");
  mj << manifest.to_json().dump(2) << "\n";
  return manifest;
}

}  // namespace tsrecon
