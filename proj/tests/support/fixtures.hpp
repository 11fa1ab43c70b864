#pragma once

// Deterministic desk-scale input generator: a 12-region, 100-bus network with
// two geographic macro-clusters, a daily regional history for load/wind/solar,
// a market offer file, and a geolocation registry with decoys. One leaf bus
// sits behind a deliberately weak line so that peak-hour disaggregations are
// DC-infeasible and the restoration stage has real work to do.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tsrecon/geo_assign.hpp"
#include "tsrecon/io.hpp"
#include "tsrecon/model.hpp"
#include "tsrecon/rng.hpp"
#include "tsrecon/timeutil.hpp"

namespace testsupport {
using tsrecon::haversine_km;
}

namespace testsupport {

struct DeskFixture {
  tsrecon::NetworkSnapshot snapshot;
  tsrecon::GeoRegistry registry;
  std::string history_csv;
  std::string offers_csv;
  std::string weak_branch_id;
  std::string weak_load_id;
};

struct DeskOptions {
  int regions = 12;
  int buses = 100;
  double weak_line_limit_mw = 55.0;  // peak flow into the leaf approaches ~80 MW
  int history_days = 1;
  bool include_terminal_midnight = true;
};

inline DeskFixture build_desk_fixture(std::uint64_t seed, const DeskOptions& opt = {}) {
  using namespace tsrecon;
  DeskFixture fx;
  Philox4x32 gen(derive_seed(seed, "desk-fixture", 0));
  std::uint64_t idx = 0;
  auto uni = [&]() { return gen.uniform_at(idx++); };

  const int R = opt.regions;
  const int B = opt.buses;
  // two macro-clusters of region centers (west and east)
  std::vector<double> center_lat(R), center_lon(R);
  for (int r = 0; r < R; ++r) {
    bool west = r < R / 2;
    center_lat[r] = (west ? 46.0 : 47.2) + 0.9 * (r % (R / 2) / 2) + 0.3 * uni();
    center_lon[r] = (west ? -0.8 : 5.6) + 1.0 * (r % 2) + 0.3 * uni();
  }

  for (int r = 0; r < R; ++r) fx.snapshot.regions.push_back("R" + std::to_string(r));

  // buses round-robin across regions, jittered around the region center
  std::vector<double> bus_lat(B), bus_lon(B);
  std::vector<int> bus_region(B);
  std::vector<std::vector<int>> region_buses(R);
  for (int i = 0; i < B; ++i) {
    int r = i % R;
    bus_region[i] = r;
    region_buses[r].push_back(i);
    bus_lat[i] = center_lat[r] + 0.35 * (uni() - 0.5);
    bus_lon[i] = center_lon[r] + 0.45 * (uni() - 0.5);
    fx.snapshot.buses.push_back({"B" + std::to_string(i), "R" + std::to_string(r), 225.0});
  }

  auto add_branch = [&](int a, int b, double limit) {
    double d = haversine_km(bus_lat[a], bus_lon[a], bus_lat[b], bus_lon[b]);
    double x = std::max(0.01, 0.002 * d);
    fx.snapshot.branches.push_back({"L" + std::to_string(fx.snapshot.branches.size()),
                                    "B" + std::to_string(a), "B" + std::to_string(b), x / 10.0, x,
                                    limit});
  };

  // intra-region: chain through the region's buses plus one shortcut
  for (int r = 0; r < R; ++r) {
    const auto& members = region_buses[r];
    for (std::size_t k = 1; k < members.size(); ++k) {
      bool is_weak = (r == 0 && k == members.size() - 1);
      add_branch(members[k - 1], members[k], is_weak ? opt.weak_line_limit_mw : 900.0);
      if (is_weak) fx.weak_branch_id = fx.snapshot.branches.back().id;
    }
    if (members.size() > 3) add_branch(members[0], members[2], 900.0);
  }
  // inter-region ring plus two cross ties
  for (int r = 0; r < R; ++r) add_branch(region_buses[r][0], region_buses[(r + 1) % R][0], 1500.0);
  add_branch(region_buses[0][1], region_buses[R / 2][1], 1500.0);
  add_branch(region_buses[2][0], region_buses[R - 2][0], 1500.0);

  // loads: one per bus; the weak leaf carries a deliberately large share
  std::vector<double> nominal(B);
  for (int i = 0; i < B; ++i) {
    nominal[i] = 35.0 + 50.0 * uni();
    if (!fx.weak_branch_id.empty() && i == region_buses[0].back()) nominal[i] = 70.0;
    fx.snapshot.loads.push_back({"D" + std::to_string(i), "B" + std::to_string(i), nominal[i]});
  }
  fx.weak_load_id = "D" + std::to_string(region_buses[0].back());

  // generators: fuels spread over hub buses; ample total capacity
  struct GenPlan {
    const char* fuel;
    int count;
    double p_max;
  };
  const GenPlan plans[] = {{"nuclear", 6, 900.0}, {"gas", 10, 320.0},   {"hydro", 4, 260.0},
                           {"wind", 6, 150.0},    {"solar", 6, 120.0}};
  int gen_id = 0;
  int hub = 0;
  for (const GenPlan& plan : plans) {
    for (int k = 0; k < plan.count; ++k) {
      int bus = region_buses[hub % R][(hub / R) % 2];
      ++hub;
      double pmax = plan.p_max * (0.85 + 0.3 * uni());
      fx.snapshot.generators.push_back({"G" + std::to_string(gen_id++), "B" + std::to_string(bus),
                                        plan.fuel, 0.0, pmax});
    }
  }
  fx.snapshot.validate();

  // geolocation registry: the true coordinates under neutral names + decoys
  int loc = 0;
  for (int i = 0; i < B; ++i)
    fx.registry.entries.push_back(
        {"S" + std::to_string(loc++), bus_lat[i], bus_lon[i], "R" + std::to_string(bus_region[i]),
         225.0});
  for (int r = 0; r < R; ++r)
    for (int k = 0; k < 3; ++k)
      fx.registry.entries.push_back({"S" + std::to_string(loc++),
                                     center_lat[r] + 0.4 * (uni() - 0.5),
                                     center_lon[r] + 0.5 * (uni() - 0.5),
                                     "R" + std::to_string(r), 225.0});
  fx.registry.validate();

  // ---- regional history -------------------------------------------------
  // loads follow a two-peak national day shaped by antiphase cluster factors;
  // wind follows cluster-phased slow waves; solar a daytime bell
  const std::int64_t start = parse_utc("2018-01-19T00:00:00Z");
  const int periods_per_day = 48;
  const int T = opt.history_days * periods_per_day + (opt.include_terminal_midnight ? 1 : 0);

  std::vector<double> region_base(R, 0.0);
  for (int i = 0; i < B; ++i) region_base[bus_region[i]] += nominal[i];

  // per-region installed renewable capacity; regions without units get a
  // zero history so component sums can match the totals exactly
  std::vector<double> wind_cap(R, 0.0), solar_cap(R, 0.0);
  for (const auto& g : fx.snapshot.generators) {
    int r = bus_region[fx.snapshot.bus_index(g.bus)];
    if (g.fuel == std::string("wind")) wind_cap[r] += g.p_max_mw;
    if (g.fuel == std::string("solar")) solar_cap[r] += g.p_max_mw;
  }

  std::ostringstream hist;
  hist << "# period_minutes: 30\n";
  hist << "timestamp,region_id,quantity,value_mw\n";
  for (int t = 0; t < T; ++t) {
    double hour = (t % periods_per_day) / 2.0;
    double national_shape = 0.8 + 0.14 * std::exp(-0.5 * std::pow((hour - 9.0) / 2.5, 2)) +
                            0.20 * std::exp(-0.5 * std::pow((hour - 19.0) / 2.0, 2));
    double factor_west = 1.0 + 0.16 * std::sin(2.0 * 3.14159265358979 * hour / 24.0 + 0.4);
    double factor_east = 1.0 - 0.16 * std::sin(2.0 * 3.14159265358979 * hour / 24.0 + 0.4);
    std::string ts = format_utc(start + static_cast<std::int64_t>(t) * 1800);
    for (int r = 0; r < R; ++r) {
      double factor = (r < R / 2) ? factor_west : factor_east;
      double idio = 1.0 + 0.02 * (gen.normal_at(idx++));
      double value = region_base[r] * national_shape * factor * std::max(0.2, idio);
      hist << ts << ",R" << r << ",load," << value << "\n";

      double wind_phase = (r < R / 2) ? 0.0 : 2.2;
      double wind = wind_cap[r] *
                    (0.35 + 0.25 * std::sin(2.0 * 3.14159265358979 * hour / 24.0 + wind_phase) +
                     0.06 * gen.normal_at(idx++));
      hist << ts << ",R" << r << ",wind," << std::max(0.0, wind) << "\n";

      double bell = std::exp(-0.5 * std::pow((hour - 12.5) / 3.0, 2));
      double solar = solar_cap[r] * (hour > 7 && hour < 18 ? 0.75 * bell : 0.0) *
                     (1.0 + 0.04 * gen.normal_at(idx++));
      hist << ts << ",R" << r << ",solar," << std::max(0.0, solar) << "\n";
    }
  }
  fx.history_csv = hist.str();

  // ---- offers -------------------------------------------------------------
  struct PartPlan {
    const char* fuel;
    double cap;
    double base_price;
  };
  const PartPlan parts[] = {{"nuclear", 950, 12.0}, {"nuclear", 820, 13.5}, {"gas", 360, 32.0},
                            {"gas", 300, 30.0},     {"gas", 520, 28.0},     {"gas", 260, 35.0},
                            {"hydro", 270, 8.0},    {"hydro", 240, 9.5},    {"wind", 160, 2.0},
                            {"wind", 140, 2.5},     {"solar", 130, 1.5},    {"solar", 110, 1.0}};
  std::ostringstream off;
  off << "participant_id,hour,fuel,price_usd_per_mw,max_mw,min_mw\n";
  int pid = 0;
  for (const PartPlan& p : parts) {
    for (int h = 0; h < 24; ++h) {
      double swing = 1.0 + 0.35 * std::sin(2.0 * 3.14159265358979 * (h - 6) / 24.0) +
                     0.10 * gen.normal_at(idx++);
      double price = std::max(0.5, p.base_price * swing);
      double quantity = p.cap * (h == 12 ? 1.0 : 0.8 + 0.2 * gen.uniform_at(idx++));
      off << "P" << pid << "," << h << "," << p.fuel << "," << price << "," << quantity << ","
          << quantity * 0.15 << "\n";
    }
    ++pid;
  }
  fx.offers_csv = off.str();
  return fx;
}

inline void write_desk_fixture(const DeskFixture& fx, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  tsrecon::write_snapshot(fx.snapshot, dir + "/snapshot.json");
  {
    tsrecon::CsvWriter w(dir + "/geo_registry.csv");
    w.row({"location_id", "lat", "lon", "region_id", "voltage_kv"});
    for (const auto& e : fx.registry.entries)
      w.row({e.location_id, tsrecon::fmt_double(e.lat_deg), tsrecon::fmt_double(e.lon_deg),
             e.region_id, tsrecon::fmt_double(e.voltage_kv)});
    w.close();
  }
  std::ofstream hist(dir + "/regional_history.csv");
  hist << fx.history_csv;
  std::ofstream off(dir + "/offers.csv");
  off << fx.offers_csv;
}

}  // namespace testsupport
