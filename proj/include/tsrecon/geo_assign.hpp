#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "tsrecon/errors.hpp"
#include "tsrecon/model.hpp"
#include "tsrecon/rng.hpp"

namespace tsrecon {

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
  double phi1 = lat1 * kDegToRad, phi2 = lat2 * kDegToRad;
  double dphi = (lat2 - lat1) * kDegToRad;
  double dlam = (lon2 - lon1) * kDegToRad;
  double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
             std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2) * std::sin(dlam / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

// Substation pair connected by at least one branch; parallel branches are
// collapsed to their minimum resistance before the length conversion.
struct ImpliedEdge {
  int sub_a = 0;
  int sub_b = 0;
  double implied_km = 0.0;
};

inline std::vector<ImpliedEdge> implied_lengths(const NetworkSnapshot& snapshot,
                                                double km_per_ohm) {
  if (km_per_ohm <= 0) throw_validation("km_per_ohm must be positive");
  std::map<std::pair<int, int>, double> min_resistance;
  for (const Branch& br : snapshot.branches) {
    int a = snapshot.bus_index(br.from_bus);
    int b = snapshot.bus_index(br.to_bus);
    if (a == b) continue;
    auto key = std::minmax(a, b);
    auto [it, inserted] = min_resistance.emplace(key, br.resistance_pu);
    if (!inserted) it->second = std::min(it->second, br.resistance_pu);
  }
  std::vector<ImpliedEdge> edges;
  edges.reserve(min_resistance.size());
  for (const auto& [key, r] : min_resistance)
    edges.push_back({key.first, key.second, km_per_ohm * r});
  return edges;
}

// Least-squares fit of geographic distance against resistance over branches
// whose endpoints are already mapped; used when a partial mapping is known.
inline double calibrate_km_per_ohm(const NetworkSnapshot& snapshot, const GeoRegistry& registry,
                                   const std::map<std::string, std::string>& partial_mapping) {
  std::map<std::string, const GeoEntry*> loc;
  for (const GeoEntry& e : registry.entries) loc[e.location_id] = &e;
  double num = 0.0, den = 0.0;
  for (const Branch& br : snapshot.branches) {
    auto a = partial_mapping.find(br.from_bus);
    auto b = partial_mapping.find(br.to_bus);
    if (a == partial_mapping.end() || b == partial_mapping.end()) continue;
    const GeoEntry* ea = loc.at(a->second);
    const GeoEntry* eb = loc.at(b->second);
    double d = haversine_km(ea->lat_deg, ea->lon_deg, eb->lat_deg, eb->lon_deg);
    num += d * br.resistance_pu;
    den += br.resistance_pu * br.resistance_pu;
  }
  if (den <= 0)
    throw_validation("km_per_ohm calibration needs at least one mapped branch with resistance > 0");
  return num / den;
}

// Rounds a nominal voltage to the nearest entry of the class table; exact
// class equality defines compatibility.
struct VoltageClasses {
  std::vector<double> levels_kv = {63.0, 90.0, 150.0, 225.0, 400.0};

  double classify(double kv) const {
    double best = levels_kv.front();
    for (double level : levels_kv)
      if (std::abs(kv - level) < std::abs(kv - best)) best = level;
    return best;
  }
};

struct AssignmentProblem {
  std::vector<std::string> substation_ids;        // snapshot bus order
  std::vector<std::string> location_ids;          // registry order
  std::vector<std::vector<int>> compatible;       // S_i, location indices per substation
  Eigen::MatrixXd geo_distance_km;                // locations x locations
  std::vector<ImpliedEdge> edges;                 // connected substation pairs
  std::vector<std::vector<std::pair<int, double>>> adjacency;  // per substation

  int substation_count() const { return static_cast<int>(substation_ids.size()); }
  int location_count() const { return static_cast<int>(location_ids.size()); }
};

struct GeoAssignment {
  std::vector<int> location_of;  // location index per substation
  double objective_km2 = 0.0;
  double initial_objective_km2 = 0.0;  // after greedy construction
  std::int64_t moves_evaluated = 0;
  std::int64_t moves_accepted = 0;
};

inline AssignmentProblem build_problem(const NetworkSnapshot& snapshot, const GeoRegistry& registry,
                                       double km_per_ohm = 1.0,
                                       const VoltageClasses& classes = {}) {
  AssignmentProblem p;
  for (const Bus& b : snapshot.buses) p.substation_ids.push_back(b.id);
  for (const GeoEntry& e : registry.entries) p.location_ids.push_back(e.location_id);

  p.compatible.resize(snapshot.buses.size());
  for (std::size_t i = 0; i < snapshot.buses.size(); ++i) {
    const Bus& b = snapshot.buses[i];
    double bus_class = classes.classify(b.voltage_kv);
    for (std::size_t j = 0; j < registry.entries.size(); ++j) {
      const GeoEntry& e = registry.entries[j];
      if (e.region_id == b.region_id && classes.classify(e.voltage_kv) == bus_class)
        p.compatible[i].push_back(static_cast<int>(j));
    }
    if (p.compatible[i].empty())
      throw_validation("substation '" + b.id + "' (region '" + b.region_id + "', " +
                       std::to_string(b.voltage_kv) + " kV) has no compatible geolocation");
  }

  int L = p.location_count();
  p.geo_distance_km.resize(L, L);
  for (int a = 0; a < L; ++a) {
    p.geo_distance_km(a, a) = 0.0;
    for (int b = a + 1; b < L; ++b) {
      double d = haversine_km(registry.entries[a].lat_deg, registry.entries[a].lon_deg,
                              registry.entries[b].lat_deg, registry.entries[b].lon_deg);
      p.geo_distance_km(a, b) = d;
      p.geo_distance_km(b, a) = d;
    }
  }

  p.edges = implied_lengths(snapshot, km_per_ohm);
  p.adjacency.resize(snapshot.buses.size());
  for (const ImpliedEdge& e : p.edges) {
    p.adjacency[e.sub_a].push_back({e.sub_b, e.implied_km});
    p.adjacency[e.sub_b].push_back({e.sub_a, e.implied_km});
  }
  return p;
}

inline double assignment_objective(const AssignmentProblem& p, const std::vector<int>& location_of) {
  double obj = 0.0;
  for (const ImpliedEdge& e : p.edges) {
    double diff = p.geo_distance_km(location_of[e.sub_a], location_of[e.sub_b]) - e.implied_km;
    obj += diff * diff;
  }
  return obj;
}

inline void check_feasible(const AssignmentProblem& p, const std::vector<int>& location_of) {
  std::vector<int> used(p.location_count(), -1);
  for (int i = 0; i < p.substation_count(); ++i) {
    int j = location_of[i];
    if (std::find(p.compatible[i].begin(), p.compatible[i].end(), j) == p.compatible[i].end())
      throw_validation("substation '" + p.substation_ids[i] + "' assigned outside its class");
    if (used[j] >= 0)
      throw_validation("location '" + p.location_ids[j] + "' assigned twice");
    used[j] = i;
  }
}

namespace detail {

// Kuhn augmenting path: tries to free a compatible location for substation i.
inline bool augment(const AssignmentProblem& p, int i, std::vector<int>& sub_of_loc,
                    std::vector<int>& loc_of_sub, std::vector<char>& visited) {
  for (int j : p.compatible[i]) {
    if (visited[j]) continue;
    visited[j] = 1;
    if (sub_of_loc[j] < 0 || augment(p, sub_of_loc[j], sub_of_loc, loc_of_sub, visited)) {
      sub_of_loc[j] = i;
      loc_of_sub[i] = j;
      return true;
    }
  }
  return false;
}

inline double incremental_cost(const AssignmentProblem& p, const std::vector<int>& loc_of_sub,
                               int sub, int loc) {
  double cost = 0.0;
  for (const auto& [nbr, implied] : p.adjacency[sub]) {
    if (loc_of_sub[nbr] < 0) continue;
    double diff = p.geo_distance_km(loc, loc_of_sub[nbr]) - implied;
    cost += diff * diff;
  }
  return cost;
}

}  // namespace detail

// Greedy construction: substations in decreasing degree order take the free
// compatible location with smallest incremental objective; when no free
// location remains an augmenting path restores injectivity or proves the
// instance infeasible.
inline std::vector<int> greedy_construct(const AssignmentProblem& p) {
  int n = p.substation_count();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return p.adjacency[a].size() > p.adjacency[b].size();
  });

  std::vector<int> loc_of_sub(n, -1);
  std::vector<int> sub_of_loc(p.location_count(), -1);
  for (int i : order) {
    int best = -1;
    double best_cost = 0.0;
    for (int j : p.compatible[i]) {
      if (sub_of_loc[j] >= 0) continue;
      double cost = detail::incremental_cost(p, loc_of_sub, i, j);
      if (best < 0 || cost < best_cost) {
        best = j;
        best_cost = cost;
      }
    }
    if (best >= 0) {
      loc_of_sub[i] = best;
      sub_of_loc[best] = i;
    } else {
      std::vector<char> visited(p.location_count(), 0);
      if (!detail::augment(p, i, sub_of_loc, loc_of_sub, visited))
        throw_infeasible("no injective feasible assignment exists (stuck at substation '" +
                         p.substation_ids[i] + "')");
    }
  }
  return loc_of_sub;
}

struct LocalSearchOptions {
  std::int64_t budget = 500000;  // neighborhood move evaluations
  int restarts = 16;
};

// First-improvement local search over single relocations and pairwise swaps.
// Restarts alternate between kicked copies of the incumbent and fresh random
// feasible constructions; scan order is reshuffled per restart. Deterministic
// for a fixed seed.
inline GeoAssignment local_search(const AssignmentProblem& p, std::uint64_t seed,
                                  const LocalSearchOptions& options = {}) {
  const int n = p.substation_count();
  const int L = p.location_count();

  std::vector<int> current = greedy_construct(p);
  double initial_obj = assignment_objective(p, current);

  GeoAssignment result;
  result.initial_objective_km2 = initial_obj;
  result.location_of = current;
  result.objective_km2 = initial_obj;

  std::vector<int> sub_of_loc(L, -1);
  auto rebuild_inverse = [&](const std::vector<int>& a) {
    std::fill(sub_of_loc.begin(), sub_of_loc.end(), -1);
    for (int i = 0; i < n; ++i) sub_of_loc[a[i]] = i;
  };

  auto relocate_delta = [&](const std::vector<int>& a, int i, int j) {
    double delta = 0.0;
    for (const auto& [nbr, implied] : p.adjacency[i]) {
      double before = p.geo_distance_km(a[i], a[nbr]) - implied;
      double after = p.geo_distance_km(j, a[nbr]) - implied;
      delta += after * after - before * before;
    }
    return delta;
  };
  auto swap_delta = [&](const std::vector<int>& a, int i, int k) {
    double delta = 0.0;
    for (const auto& [nbr, implied] : p.adjacency[i]) {
      if (nbr == k) continue;  // the i-k edge keeps both endpoints
      double before = p.geo_distance_km(a[i], a[nbr]) - implied;
      double after = p.geo_distance_km(a[k], a[nbr]) - implied;
      delta += after * after - before * before;
    }
    for (const auto& [nbr, implied] : p.adjacency[k]) {
      if (nbr == i) continue;
      double before = p.geo_distance_km(a[k], a[nbr]) - implied;
      double after = p.geo_distance_km(a[i], a[nbr]) - implied;
      delta += after * after - before * before;
    }
    return delta;
  };
  auto compatible_with = [&](int sub, int loc) {
    const auto& s = p.compatible[sub];
    return std::find(s.begin(), s.end(), loc) != s.end();
  };

  for (int restart = 0; restart < options.restarts; ++restart) {
    NormalStream rng(derive_seed(seed, "geo-restart", static_cast<std::uint64_t>(restart)));
    auto rand_index = [&](int m) { return static_cast<int>(rng.next_uniform() * m) % m; };
    auto shuffled = [&](int m) {
      std::vector<int> order(m);
      std::iota(order.begin(), order.end(), 0);
      for (int i = m - 1; i > 0; --i) std::swap(order[i], order[rand_index(i + 1)]);
      return order;
    };

    std::vector<int> a = current;
    if (restart > 0 && restart % 3 == 0) {
      // fresh random feasible construction
      a.assign(n, -1);
      std::fill(sub_of_loc.begin(), sub_of_loc.end(), -1);
      for (int i : shuffled(n)) {
        std::vector<int> cands = p.compatible[i];
        int start = rand_index(static_cast<int>(cands.size()));
        int chosen = -1;
        for (std::size_t off = 0; off < cands.size(); ++off) {
          int j = cands[(start + off) % cands.size()];
          if (sub_of_loc[j] < 0) {
            chosen = j;
            break;
          }
        }
        if (chosen >= 0) {
          a[i] = chosen;
          sub_of_loc[chosen] = i;
        } else {
          std::vector<char> visited(L, 0);
          detail::augment(p, i, sub_of_loc, a, visited);
        }
      }
    } else if (restart > 0) {
      // kick: a handful of random feasible relocations/swaps from the incumbent
      a = result.location_of;
      rebuild_inverse(a);
      int kicks = 2 + rand_index(3 + n / 3);
      for (int k = 0; k < kicks; ++k) {
        int i = rand_index(n);
        int j = p.compatible[i][rand_index(static_cast<int>(p.compatible[i].size()))];
        if (sub_of_loc[j] < 0) {
          sub_of_loc[a[i]] = -1;
          a[i] = j;
          sub_of_loc[j] = i;
        } else {
          int other = sub_of_loc[j];
          if (other != i && compatible_with(other, a[i]) && compatible_with(i, j)) {
            std::swap(a[i], a[other]);
            sub_of_loc[a[i]] = i;
            sub_of_loc[a[other]] = other;
          }
        }
      }
    }
    rebuild_inverse(a);
    double obj = assignment_objective(p, a);

    std::vector<int> scan_subs = shuffled(n);
    bool improved = true;
    while (improved && result.moves_evaluated < options.budget) {
      improved = false;
      // relocations to free compatible locations
      for (int si = 0; si < n && !improved; ++si) {
        int i = scan_subs[si];
        for (int j : p.compatible[i]) {
          if (sub_of_loc[j] >= 0) continue;
          ++result.moves_evaluated;
          double delta = relocate_delta(a, i, j);
          if (delta < -1e-12) {
            sub_of_loc[a[i]] = -1;
            a[i] = j;
            sub_of_loc[j] = i;
            obj += delta;
            ++result.moves_accepted;
            improved = true;
            break;
          }
        }
      }
      // pairwise swaps between mutually compatible substations
      for (int si = 0; si < n && !improved; ++si) {
        int i = scan_subs[si];
        for (int sk = si + 1; sk < n; ++sk) {
          int k = scan_subs[sk];
          if (!compatible_with(i, a[k]) || !compatible_with(k, a[i])) continue;
          ++result.moves_evaluated;
          double delta = swap_delta(a, i, k);
          if (delta < -1e-12) {
            std::swap(a[i], a[k]);
            sub_of_loc[a[i]] = i;
            sub_of_loc[a[k]] = k;
            obj += delta;
            ++result.moves_accepted;
            improved = true;
            break;
          }
        }
      }
    }

    obj = assignment_objective(p, a);  // recompute, deltas accumulate roundoff
    if (obj < result.objective_km2 - 1e-12) {
      result.objective_km2 = obj;
      result.location_of = a;
    }
    if (result.objective_km2 <= 1e-12) break;  // planted optimum reached
  }

  check_feasible(p, result.location_of);
  return result;
}

// Exhaustive search with branch-and-bound pruning; the oracle for small
// instances.
inline GeoAssignment brute_force(const AssignmentProblem& p, int size_cap = 10) {
  const int n = p.substation_count();
  if (n > size_cap)
    throw_validation("brute_force capped at " + std::to_string(size_cap) + " substations, got " +
                     std::to_string(n));
  std::vector<int> current(n, -1), best;
  std::vector<char> used(p.location_count(), 0);
  double best_obj = std::numeric_limits<double>::infinity();

  auto partial_cost = [&](int i) {
    double cost = 0.0;
    for (const auto& [nbr, implied] : p.adjacency[i]) {
      if (current[nbr] < 0) continue;
      double diff = p.geo_distance_km(current[i], current[nbr]) - implied;
      cost += diff * diff;
    }
    return cost;
  };

  std::function<void(int, double)> dfs = [&](int i, double acc) {
    if (acc >= best_obj) return;
    if (i == n) {
      best_obj = acc;
      best = current;
      return;
    }
    for (int j : p.compatible[i]) {
      if (used[j]) continue;
      used[j] = 1;
      current[i] = j;
      dfs(i + 1, acc + partial_cost(i));
      current[i] = -1;
      used[j] = 0;
    }
  };
  dfs(0, 0.0);

  if (best.empty()) throw_infeasible("no injective feasible assignment exists");
  GeoAssignment result;
  result.location_of = best;
  result.objective_km2 = best_obj;
  result.initial_objective_km2 = best_obj;
  return result;
}

}  // namespace tsrecon
