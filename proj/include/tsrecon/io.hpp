#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsrecon/bids.hpp"
#include "tsrecon/csv.hpp"
#include "tsrecon/errors.hpp"
#include "tsrecon/model.hpp"
#include "tsrecon/timeutil.hpp"

namespace tsrecon {

namespace detail {

inline double get_number(const nlohmann::json& j, const char* key, const std::string& context) {
  if (!j.contains(key) || !j[key].is_number())
    throw_parse(context + ": missing or non-numeric field '" + std::string(key) + "'");
  return j[key].get<double>();
}

inline std::string get_string(const nlohmann::json& j, const char* key, const std::string& context) {
  if (!j.contains(key) || !j[key].is_string())
    throw_parse(context + ": missing or non-string field '" + std::string(key) + "'");
  return j[key].get<std::string>();
}

}  // namespace detail

inline NetworkSnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw_parse(path + ": " + e.what());
  }
  NetworkSnapshot s;
  for (const char* key : {"regions", "buses", "branches", "generators", "loads"})
    if (!j.contains(key) || !j[key].is_array())
      throw_parse(path + ": missing top-level array '" + std::string(key) + "'");
  for (const auto& r : j["regions"]) {
    if (!r.is_string()) throw_parse(path + ": regions must be strings");
    s.regions.push_back(r.get<std::string>());
  }
  for (const auto& b : j["buses"]) {
    std::string ctx = path + " bus #" + std::to_string(s.buses.size());
    s.buses.push_back({detail::get_string(b, "id", ctx), detail::get_string(b, "region_id", ctx),
                       detail::get_number(b, "voltage_kV", ctx)});
  }
  for (const auto& b : j["branches"]) {
    std::string ctx = path + " branch #" + std::to_string(s.branches.size());
    s.branches.push_back({detail::get_string(b, "id", ctx), detail::get_string(b, "from_bus", ctx),
                          detail::get_string(b, "to_bus", ctx),
                          detail::get_number(b, "resistance_pu", ctx),
                          detail::get_number(b, "reactance_pu", ctx),
                          detail::get_number(b, "thermal_limit_MW", ctx)});
  }
  for (const auto& g : j["generators"]) {
    std::string ctx = path + " generator #" + std::to_string(s.generators.size());
    s.generators.push_back({detail::get_string(g, "id", ctx), detail::get_string(g, "bus", ctx),
                            detail::get_string(g, "fuel", ctx),
                            detail::get_number(g, "p_min_MW", ctx),
                            detail::get_number(g, "p_max_MW", ctx)});
  }
  for (const auto& l : j["loads"]) {
    std::string ctx = path + " load #" + std::to_string(s.loads.size());
    s.loads.push_back({detail::get_string(l, "id", ctx), detail::get_string(l, "bus", ctx),
                       detail::get_number(l, "nominal_MW", ctx)});
  }
  s.validate();
  return s;
}

// Canonical form: every record array sorted by id, keys alphabetical.
inline void write_snapshot(const NetworkSnapshot& snapshot, const std::string& path) {
  NetworkSnapshot s = snapshot;
  std::sort(s.regions.begin(), s.regions.end());
  std::sort(s.buses.begin(), s.buses.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(s.branches.begin(), s.branches.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(s.generators.begin(), s.generators.end(), [](auto& a, auto& b) { return a.id < b.id; });
  std::sort(s.loads.begin(), s.loads.end(), [](auto& a, auto& b) { return a.id < b.id; });

  nlohmann::json j;
  j["regions"] = s.regions;
  j["buses"] = nlohmann::json::array();
  for (const Bus& b : s.buses)
    j["buses"].push_back({{"id", b.id}, {"region_id", b.region_id}, {"voltage_kV", b.voltage_kv}});
  j["branches"] = nlohmann::json::array();
  for (const Branch& b : s.branches)
    j["branches"].push_back({{"id", b.id},
                             {"from_bus", b.from_bus},
                             {"to_bus", b.to_bus},
                             {"resistance_pu", b.resistance_pu},
                             {"reactance_pu", b.reactance_pu},
                             {"thermal_limit_MW", b.thermal_limit_mw}});
  j["generators"] = nlohmann::json::array();
  for (const Generator& g : s.generators)
    j["generators"].push_back({{"id", g.id},
                               {"bus", g.bus},
                               {"fuel", g.fuel},
                               {"p_min_MW", g.p_min_mw},
                               {"p_max_MW", g.p_max_mw}});
  j["loads"] = nlohmann::json::array();
  for (const Load& l : s.loads)
    j["loads"].push_back({{"id", l.id}, {"bus", l.bus}, {"nominal_MW", l.nominal_mw}});

  std::ofstream out(path);
  if (!out) throw_io("cannot write " + path);
  out << j.dump(2) << "\n";
}

inline GeoRegistry load_geo_registry(const std::string& path) {
  CsvFile csv = read_csv(path);
  int c_id = csv.column("location_id", path);
  int c_lat = csv.column("lat", path);
  int c_lon = csv.column("lon", path);
  int c_region = csv.column("region_id", path);
  int c_kv = csv.column("voltage_kv", path);
  GeoRegistry reg;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& r = csv.rows[i];
    std::string ctx = path + " row " + std::to_string(i + 2);
    reg.entries.push_back({r[c_id], parse_double(r[c_lat], ctx), parse_double(r[c_lon], ctx),
                           r[c_region], parse_double(r[c_kv], ctx)});
  }
  reg.validate();
  return reg;
}

// regional_history.csv carries a "# period_minutes: N" metadata line ahead of
// the header; the grid must be dense, anything missing is a hard error.
inline RegionalSeries load_regional_history(const std::string& path,
                                            Quantity quantity = Quantity::load) {
  CsvFile csv = read_csv(path);
  auto meta = csv.metadata.find("period_minutes");
  if (meta == csv.metadata.end())
    throw_parse(path + ": missing '# period_minutes:' declaration before the header");
  int period_minutes = static_cast<int>(parse_long(meta->second, path + " period_minutes"));
  if (period_minutes <= 0) throw_parse(path + ": period_minutes must be positive");

  int c_ts = csv.column("timestamp", path);
  int c_region = csv.column("region_id", path);
  int c_qty = csv.column("quantity", path);
  int c_val = csv.column("value_mw", path);

  std::map<std::int64_t, std::map<std::string, double>> grid;  // ts -> region -> value
  std::set<std::string> regions;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& r = csv.rows[i];
    std::string ctx = path + " row " + std::to_string(i + 2);
    if (quantity_from_string(r[c_qty]) != quantity) continue;
    std::int64_t ts = parse_utc(r[c_ts]);
    double v = parse_double(r[c_val], ctx);
    if (v < 0) throw_validation(ctx + ": negative value " + r[c_val]);
    if (!grid[ts].emplace(r[c_region], v).second)
      throw_validation(ctx + ": duplicate entry for region '" + r[c_region] + "' at " + r[c_ts]);
    regions.insert(r[c_region]);
  }
  if (grid.empty())
    throw_validation(path + ": no rows for quantity '" + to_string(quantity) + "'");

  RegionalSeries series;
  series.quantity = quantity;
  series.period_minutes = period_minutes;
  series.region_ids.assign(regions.begin(), regions.end());
  series.start_epoch_s = grid.begin()->first;
  const std::int64_t step = static_cast<std::int64_t>(period_minutes) * 60;
  const std::int64_t last = grid.rbegin()->first;
  const std::int64_t span = last - series.start_epoch_s;
  if (span % step != 0)
    throw_validation(path + ": timestamps are not aligned to the declared period of " +
                     std::to_string(period_minutes) + " minutes");
  int T = static_cast<int>(span / step) + 1;
  series.values_mw.resize(static_cast<int>(regions.size()), T);
  for (int t = 0; t < T; ++t) {
    std::int64_t ts = series.start_epoch_s + t * step;
    auto it = grid.find(ts);
    if (it == grid.end())
      throw_validation(path + ": missing period at " + format_utc(ts));
    for (int r = 0; r < series.region_count(); ++r) {
      auto v = it->second.find(series.region_ids[r]);
      if (v == it->second.end())
        throw_validation(path + ": missing value for region '" + series.region_ids[r] + "' at " +
                         format_utc(ts));
      series.values_mw(r, t) = v->second;
    }
  }
  return series;
}

inline void write_regional_history(const RegionalSeries& series, const std::string& path) {
  CsvWriter w(path);
  w.metadata("period_minutes", std::to_string(series.period_minutes));
  w.row({"timestamp", "region_id", "quantity", "value_mw"});
  for (int t = 0; t < series.period_count(); ++t)
    for (int r = 0; r < series.region_count(); ++r)
      w.row({format_utc(series.timestamp_at(t)), series.region_ids[r], to_string(series.quantity),
             fmt_double(series.values_mw(r, t))});
  w.close();
}

inline std::vector<OfferRow> load_offer_rows(const std::string& path) {
  CsvFile csv = read_csv(path);
  int c_part = csv.column("participant_id", path);
  int c_hour = csv.column("hour", path);
  int c_fuel = csv.column("fuel", path);
  int c_price = csv.column("price_usd_per_mw", path);
  int c_max = csv.column("max_mw", path);
  int c_min = csv.column("min_mw", path);
  std::vector<int> known = {c_part, c_hour, c_fuel, c_price, c_max, c_min};
  std::vector<OfferRow> rows;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& r = csv.rows[i];
    std::string ctx = path + " row " + std::to_string(i + 2);
    OfferRow row;
    row.participant_id = r[c_part];
    row.hour = static_cast<int>(parse_long(r[c_hour], ctx));
    row.fuel = r[c_fuel];
    row.price_usd_per_mw = parse_double(r[c_price], ctx);
    row.max_mw = parse_double(r[c_max], ctx);
    row.min_mw = parse_double(r[c_min], ctx);
    for (std::size_t c = 0; c < csv.columns.size(); ++c)
      if (std::find(known.begin(), known.end(), static_cast<int>(c)) == known.end())
        row.extras[csv.columns[c]] = r[c];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline OfferBook load_offers(const std::string& path) {
  return infer_participants(load_offer_rows(path));
}

inline void write_component_series(const ComponentSeries& series, const std::string& path) {
  CsvWriter w(path);
  w.metadata("period_minutes", std::to_string(series.period_minutes));
  w.row({"component_id", "timestamp", "quantity", "value_mw", "lineage"});
  for (int t = 0; t < series.period_count(); ++t)
    for (int i = 0; i < series.component_count(); ++i)
      w.row({series.component_ids[i], format_utc(series.timestamp_at(t)),
             to_string(series.quantity), fmt_double(series.values_mw(i, t)),
             to_string(series.lineage)});
  w.close();
}

inline ComponentSeries load_component_series(const std::string& path) {
  CsvFile csv = read_csv(path);
  auto meta = csv.metadata.find("period_minutes");
  if (meta == csv.metadata.end())
    throw_parse(path + ": missing '# period_minutes:' declaration before the header");
  int period_minutes = static_cast<int>(parse_long(meta->second, path));
  int c_id = csv.column("component_id", path);
  int c_ts = csv.column("timestamp", path);
  int c_qty = csv.column("quantity", path);
  int c_val = csv.column("value_mw", path);
  int c_lin = csv.column("lineage", path);
  if (csv.rows.empty()) throw_validation(path + ": empty series");

  ComponentSeries series;
  series.period_minutes = period_minutes;
  series.quantity = quantity_from_string(csv.rows.front()[c_qty]);
  series.lineage = lineage_from_string(csv.rows.front()[c_lin]);

  std::map<std::int64_t, std::map<std::string, double>> grid;
  std::set<std::string> comps;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& r = csv.rows[i];
    std::string ctx = path + " row " + std::to_string(i + 2);
    grid[parse_utc(r[c_ts])][r[c_id]] = parse_double(r[c_val], ctx);
    comps.insert(r[c_id]);
  }
  series.component_ids.assign(comps.begin(), comps.end());
  series.start_epoch_s = grid.begin()->first;
  int T = static_cast<int>(grid.size());
  series.values_mw.resize(static_cast<int>(comps.size()), T);
  int t = 0;
  const std::int64_t step = static_cast<std::int64_t>(period_minutes) * 60;
  for (const auto& [ts, row] : grid) {
    if (ts != series.start_epoch_s + t * step)
      throw_validation(path + ": missing period at " +
                       format_utc(series.start_epoch_s + t * step));
    for (int i = 0; i < series.component_count(); ++i) {
      auto v = row.find(series.component_ids[i]);
      if (v == row.end())
        throw_validation(path + ": missing value for component '" + series.component_ids[i] +
                         "' at " + format_utc(ts));
      series.values_mw(i, t) = v->second;
    }
    ++t;
  }
  return series;
}

}  // namespace tsrecon
