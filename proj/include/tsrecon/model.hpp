#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tsrecon/errors.hpp"

namespace tsrecon {

struct Bus {
  std::string id;
  std::string region_id;
  double voltage_kv = 0.0;
};

struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double resistance_pu = 0.0;
  double reactance_pu = 0.0;
  double thermal_limit_mw = 0.0;
};

struct Generator {
  std::string id;
  std::string bus;
  std::string fuel;
  double p_min_mw = 0.0;
  double p_max_mw = 0.0;
};

struct Load {
  std::string id;
  std::string bus;
  double nominal_mw = 0.0;
};

// One static operating point of the network. Immutable after validate();
// safe to share read-only across workers.
struct NetworkSnapshot {
  std::vector<std::string> regions;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Load> loads;

  int bus_index(const std::string& id) const {
    auto it = bus_index_.find(id);
    if (it == bus_index_.end()) throw_validation("unknown bus '" + id + "'");
    return it->second;
  }
  const std::string& region_of_bus(const std::string& bus_id) const {
    return buses[bus_index(bus_id)].region_id;
  }

  void validate() {
    std::set<std::string> region_set(regions.begin(), regions.end());
    if (region_set.size() != regions.size()) throw_validation("duplicate region id");
    bus_index_.clear();
    for (std::size_t i = 0; i < buses.size(); ++i) {
      const Bus& b = buses[i];
      if (!bus_index_.emplace(b.id, static_cast<int>(i)).second)
        throw_validation("duplicate bus id '" + b.id + "'");
      if (!region_set.count(b.region_id))
        throw_validation("bus '" + b.id + "' references unknown region '" + b.region_id + "'");
      if (b.voltage_kv <= 0) throw_validation("bus '" + b.id + "' has non-positive voltage");
    }
    std::set<std::string> ids;
    for (const Branch& br : branches) {
      if (!ids.insert(br.id).second) throw_validation("duplicate branch id '" + br.id + "'");
      if (!bus_index_.count(br.from_bus))
        throw_validation("branch '" + br.id + "' references unknown bus '" + br.from_bus + "'");
      if (!bus_index_.count(br.to_bus))
        throw_validation("branch '" + br.id + "' references unknown bus '" + br.to_bus + "'");
      if (br.from_bus == br.to_bus)
        throw_validation("branch '" + br.id + "' connects bus '" + br.from_bus + "' to itself");
      if (br.resistance_pu < 0)
        throw_validation("branch '" + br.id + "' has negative resistance");
      if (br.reactance_pu <= 0)
        throw_validation("branch '" + br.id + "' has non-positive reactance");
      if (br.thermal_limit_mw <= 0)
        throw_validation("branch '" + br.id + "' has non-positive thermal limit");
    }
    ids.clear();
    for (const Generator& g : generators) {
      if (!ids.insert(g.id).second) throw_validation("duplicate generator id '" + g.id + "'");
      if (!bus_index_.count(g.bus))
        throw_validation("generator '" + g.id + "' references unknown bus '" + g.bus + "'");
      if (g.p_min_mw > g.p_max_mw)
        throw_validation("generator '" + g.id + "' has p_min above p_max");
    }
    ids.clear();
    for (const Load& l : loads) {
      if (!ids.insert(l.id).second) throw_validation("duplicate load id '" + l.id + "'");
      if (!bus_index_.count(l.bus))
        throw_validation("load '" + l.id + "' references unknown bus '" + l.bus + "'");
      if (l.nominal_mw < 0) throw_validation("load '" + l.id + "' has negative nominal MW");
    }
  }

private:
  std::map<std::string, int> bus_index_;
};

struct GeoEntry {
  std::string location_id;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  std::string region_id;
  double voltage_kv = 0.0;
};

struct GeoRegistry {
  std::vector<GeoEntry> entries;

  void validate() const {
    std::set<std::string> ids;
    for (const GeoEntry& e : entries) {
      if (!ids.insert(e.location_id).second)
        throw_validation("duplicate location id '" + e.location_id + "'");
      if (e.lat_deg < -90.0 || e.lat_deg > 90.0)
        throw_validation("location '" + e.location_id + "' latitude out of range: " +
                         std::to_string(e.lat_deg));
      if (e.lon_deg < -180.0 || e.lon_deg > 180.0)
        throw_validation("location '" + e.location_id + "' longitude out of range: " +
                         std::to_string(e.lon_deg));
    }
  }
};

enum class Quantity { load, wind, solar };

inline std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::load: return "load";
    case Quantity::wind: return "wind";
    case Quantity::solar: return "solar";
  }
  return "?";
}

inline Quantity quantity_from_string(const std::string& s) {
  if (s == "load") return Quantity::load;
  if (s == "wind") return Quantity::wind;
  if (s == "solar") return Quantity::solar;
  throw_parse("unknown quantity '" + s + "'");
}

// Ground-truth regional totals on a dense (region, period) grid.
struct RegionalSeries {
  Quantity quantity = Quantity::load;
  std::vector<std::string> region_ids;   // row order
  Eigen::MatrixXd values_mw;             // R x T
  int period_minutes = 30;
  std::int64_t start_epoch_s = 0;

  int region_count() const { return static_cast<int>(region_ids.size()); }
  int period_count() const { return static_cast<int>(values_mw.cols()); }
  std::int64_t timestamp_at(int t) const {
    return start_epoch_s + static_cast<std::int64_t>(t) * period_minutes * 60;
  }
  int region_row(const std::string& id) const {
    auto it = std::find(region_ids.begin(), region_ids.end(), id);
    if (it == region_ids.end()) throw_validation("unknown region '" + id + "' in series");
    return static_cast<int>(it - region_ids.begin());
  }
};

enum class Lineage { disaggregated, restored, baseline };

inline std::string to_string(Lineage l) {
  switch (l) {
    case Lineage::disaggregated: return "disaggregated";
    case Lineage::restored: return "restored";
    case Lineage::baseline: return "baseline";
  }
  return "?";
}

inline Lineage lineage_from_string(const std::string& s) {
  if (s == "disaggregated") return Lineage::disaggregated;
  if (s == "restored") return Lineage::restored;
  if (s == "baseline") return Lineage::baseline;
  throw_parse("unknown lineage '" + s + "'");
}

// Component-level series (one row per load / renewable unit).
struct ComponentSeries {
  Quantity quantity = Quantity::load;
  Lineage lineage = Lineage::disaggregated;
  std::vector<std::string> component_ids;  // row order
  Eigen::MatrixXd values_mw;               // N x T
  int period_minutes = 30;
  std::int64_t start_epoch_s = 0;

  int component_count() const { return static_cast<int>(component_ids.size()); }
  int period_count() const { return static_cast<int>(values_mw.cols()); }
  std::int64_t timestamp_at(int t) const {
    return start_epoch_s + static_cast<std::int64_t>(t) * period_minutes * 60;
  }
};

// Ordered component universe for one quantity: ids, host bus, region, and
// (once geolocation is known) coordinates. Row order is shared by panels,
// contribution shares and component series.
struct ComponentSet {
  Quantity quantity = Quantity::load;
  std::vector<std::string> ids;
  std::vector<std::string> bus_ids;
  std::vector<std::string> region_ids;
  std::vector<double> base_mw;  // nominal load or renewable capacity
  std::vector<double> lat_deg;
  std::vector<double> lon_deg;

  int size() const { return static_cast<int>(ids.size()); }
};

inline ComponentSet component_set(const NetworkSnapshot& snapshot, Quantity q) {
  ComponentSet set;
  set.quantity = q;
  if (q == Quantity::load) {
    for (const Load& l : snapshot.loads) {
      set.ids.push_back(l.id);
      set.bus_ids.push_back(l.bus);
      set.region_ids.push_back(snapshot.region_of_bus(l.bus));
      set.base_mw.push_back(l.nominal_mw);
    }
  } else {
    const std::string fuel = to_string(q);
    for (const Generator& g : snapshot.generators) {
      if (g.fuel != fuel) continue;
      set.ids.push_back(g.id);
      set.bus_ids.push_back(g.bus);
      set.region_ids.push_back(snapshot.region_of_bus(g.bus));
      set.base_mw.push_back(g.p_max_mw);
    }
  }
  set.lat_deg.assign(set.ids.size(), 0.0);
  set.lon_deg.assign(set.ids.size(), 0.0);
  return set;
}

// Per-region shares p_r; rows align with the ComponentSet order.
struct Contributions {
  std::vector<std::string> region_ids;          // region order
  std::vector<std::vector<int>> members;        // component row indices per region
  std::vector<double> shares;                   // per component, sums to 1 within each region

  int region_of_component(int comp) const {
    for (std::size_t r = 0; r < members.size(); ++r)
      for (int m : members[r])
        if (m == comp) return static_cast<int>(r);
    return -1;
  }
};

// Shares are the component's base MW divided by its region total. Regions
// with zero total are a hard error unless the uniform fallback is requested.
inline Contributions contribution_vectors(const ComponentSet& set,
                                          const std::vector<std::string>& regions,
                                          bool uniform_fallback = false) {
  Contributions out;
  out.region_ids = regions;
  out.members.resize(regions.size());
  out.shares.assign(set.ids.size(), 0.0);
  std::map<std::string, int> region_row;
  for (std::size_t r = 0; r < regions.size(); ++r) region_row[regions[r]] = static_cast<int>(r);
  for (int i = 0; i < set.size(); ++i) {
    auto it = region_row.find(set.region_ids[i]);
    if (it == region_row.end())
      throw_validation("component '" + set.ids[i] + "' in unknown region '" + set.region_ids[i] + "'");
    out.members[it->second].push_back(i);
  }
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto& m = out.members[r];
    if (m.empty()) continue;
    double total = 0.0;
    for (int i : m) total += set.base_mw[i];
    if (total <= 0.0) {
      if (!uniform_fallback)
        throw_validation("region '" + regions[r] + "' has zero total base MW for quantity " +
                         to_string(set.quantity) + " and no fallback is configured");
      for (int i : m) out.shares[i] = 1.0 / static_cast<double>(m.size());
    } else {
      for (int i : m) out.shares[i] = set.base_mw[i] / total;
    }
  }
  return out;
}

}  // namespace tsrecon
