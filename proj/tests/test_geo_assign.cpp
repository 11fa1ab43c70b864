#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tsrecon/geo_assign.hpp"
#include "tsrecon/rng.hpp"

using namespace tsrecon;

namespace {

// One-region snapshot with the given branch list; all buses 225 kV.
NetworkSnapshot make_snapshot(int n_bus, const std::vector<std::tuple<int, int, double>>& edges) {
  NetworkSnapshot s;
  s.regions = {"R1"};
  for (int i = 0; i < n_bus; ++i) s.buses.push_back({"B" + std::to_string(i), "R1", 225});
  int e = 0;
  for (auto [a, b, r] : edges)
    s.branches.push_back({"L" + std::to_string(e++), "B" + std::to_string(a),
                          "B" + std::to_string(b), r, std::max(r, 1e-3) * 10, 100.0});
  s.validate();
  return s;
}

// Registry on a local frame around (45 N, 0 E): dx/dy in km converted
// through the small-angle approximation.
GeoRegistry make_registry(const std::vector<std::pair<double, double>>& km_points,
                          double voltage = 225) {
  GeoRegistry g;
  const double lat0 = 45.0;
  const double km_per_deg_lat = 111.19492664455873;  // 6371.0088 km * pi / 180
  double km_per_deg_lon = km_per_deg_lat * std::cos(lat0 * 3.14159265358979323846 / 180.0);
  int i = 0;
  for (auto [x_km, y_km] : km_points)
    g.entries.push_back({"S" + std::to_string(i++), lat0 + y_km / km_per_deg_lat,
                         x_km / km_per_deg_lon, "R1", voltage});
  g.validate();
  return g;
}

}  // namespace

TEST_CASE("haversine basics") {
  CHECK(haversine_km(48.0, 2.0, 48.0, 2.0) == 0.0);
  // one degree of latitude is ~111.19 km regardless of longitude
  CHECK(haversine_km(45.0, 3.0, 46.0, 3.0) == Catch::Approx(111.195).margin(0.01));
}

TEST_CASE("implied lengths scale with resistance") {
  NetworkSnapshot s = make_snapshot(4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 4.0}});
  auto edges = implied_lengths(s, 10.0);
  REQUIRE(edges.size() == 3);
  CHECK(edges[0].implied_km == Catch::Approx(10.0));
  CHECK(edges[1].implied_km == Catch::Approx(20.0));
  CHECK(edges[2].implied_km == Catch::Approx(40.0));

  SECTION("zero-impedance tie maps to zero length") {
    NetworkSnapshot z = make_snapshot(2, {{0, 1, 0.0}});
    CHECK(implied_lengths(z, 10.0)[0].implied_km == 0.0);
  }
  SECTION("doubling resistance doubles the implied length") {
    NetworkSnapshot a = make_snapshot(2, {{0, 1, 0.5}});
    NetworkSnapshot b = make_snapshot(2, {{0, 1, 1.0}});
    CHECK(implied_lengths(b, 7.0)[0].implied_km ==
          Catch::Approx(2.0 * implied_lengths(a, 7.0)[0].implied_km));
  }
  SECTION("parallel branches collapse to the minimum resistance") {
    NetworkSnapshot p = make_snapshot(2, {{0, 1, 3.0}, {0, 1, 1.0}});
    auto e = implied_lengths(p, 10.0);
    REQUIRE(e.size() == 1);
    CHECK(e[0].implied_km == Catch::Approx(10.0));
  }
}

TEST_CASE("build_problem filters by region and voltage class") {
  NetworkSnapshot s = make_snapshot(1, {});
  GeoRegistry g = make_registry({{0, 0}, {50, 0}});
  g.entries[1].voltage_kv = 400;
  AssignmentProblem p = build_problem(s, g);
  REQUIRE(p.compatible[0].size() == 1);
  CHECK(p.compatible[0][0] == 0);

  SECTION("empty compatibility set is an error naming the substation") {
    GeoRegistry none = make_registry({{0, 0}});
    none.entries[0].region_id = "R9";
    try {
      build_problem(s, none);
      FAIL("expected empty-set error");
    } catch (const error& e) {
      CHECK(std::string(e.what()).find("B0") != std::string::npos);
    }
  }
  SECTION("co-located registry points give a zero distance entry") {
    GeoRegistry dup = make_registry({{10, 10}, {10, 10}});
    AssignmentProblem pd = build_problem(s, dup);
    CHECK(pd.geo_distance_km(0, 1) == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("brute force enumerates tiny instances") {
  SECTION("two substations, two locations picks the better bijection") {
    NetworkSnapshot s = make_snapshot(2, {{0, 1, 3.0}});  // implied 30 km at 10 km/ohm
    GeoRegistry g = make_registry({{0, 0}, {25, 0}});
    AssignmentProblem p = build_problem(s, g, 10.0);
    GeoAssignment best = brute_force(p);
    // both bijections give the same edge set here, objective (25-30)^2
    CHECK(best.objective_km2 == Catch::Approx(25.0).margin(0.2));
  }
  SECTION("injectivity is infeasible with fewer locations than substations") {
    NetworkSnapshot s = make_snapshot(2, {{0, 1, 1.0}});
    GeoRegistry g = make_registry({{0, 0}});
    AssignmentProblem p = build_problem(s, g);
    CHECK_THROWS_AS(brute_force(p), error);
    CHECK_THROWS_AS(local_search(p, 1), error);
  }
  SECTION("size cap is enforced") {
    NetworkSnapshot s = make_snapshot(11, {});
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 11; ++i) pts.push_back({i * 10.0, 0.0});
    AssignmentProblem p = build_problem(s, make_registry(pts));
    CHECK_THROWS_AS(brute_force(p), error);
  }
}

TEST_CASE("planted six-substation ring is recovered exactly") {
  // locations on a ring; snapshot edges carry the true geographic lengths
  std::vector<std::pair<double, double>> pts = {{0, 0}, {60, 5}, {120, -5},
                                                {170, 40}, {110, 80}, {40, 70}};
  GeoRegistry g = make_registry(pts);
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i < 6; ++i) edges.push_back({i, (i + 1) % 6, 1.0});
  NetworkSnapshot s = make_snapshot(6, edges);
  AssignmentProblem p = build_problem(s, g, 1.0);
  // overwrite implied lengths with the planted geographic distances
  for (ImpliedEdge& e : p.edges) e.implied_km = p.geo_distance_km(e.sub_a, e.sub_b);
  p.adjacency.assign(6, {});
  for (const ImpliedEdge& e : p.edges) {
    p.adjacency[e.sub_a].push_back({e.sub_b, e.implied_km});
    p.adjacency[e.sub_b].push_back({e.sub_a, e.implied_km});
  }

  GeoAssignment exact = brute_force(p);
  CHECK(exact.objective_km2 == Catch::Approx(0.0).margin(1e-9));

  GeoAssignment heur = local_search(p, 7);
  CHECK(heur.objective_km2 == Catch::Approx(0.0).margin(1e-9));
  for (int i = 0; i < 6; ++i) CHECK(heur.location_of[i] == exact.location_of[i]);
}

TEST_CASE("single substation with a single location is immediate") {
  NetworkSnapshot s = make_snapshot(1, {});
  GeoRegistry g = make_registry({{5, 5}});
  AssignmentProblem p = build_problem(s, g);
  GeoAssignment a = local_search(p, 3);
  CHECK(a.location_of[0] == 0);
  CHECK(a.objective_km2 == 0.0);
}

TEST_CASE("local search matches brute force on small random instances") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Philox4x32 gen(seed);
    int n_sub = 4 + static_cast<int>(gen.uniform_at(0) * 4);   // 4..7
    int n_loc = n_sub + 1 + static_cast<int>(gen.uniform_at(1) * 2);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < n_loc; ++i)
      pts.push_back({gen.uniform_at(10 + 2 * i) * 300.0, gen.uniform_at(11 + 2 * i) * 300.0});
    std::vector<std::tuple<int, int, double>> edges;
    for (int i = 0; i < n_sub; ++i)
      for (int j = i + 1; j < n_sub; ++j)
        if (gen.uniform_at(1000 + 10 * i + j) < 0.5)
          edges.push_back({i, j, 0.5 + 2.0 * gen.uniform_at(2000 + 10 * i + j)});
    if (edges.empty()) edges.push_back({0, 1, 1.0});
    NetworkSnapshot s = make_snapshot(n_sub, edges);
    AssignmentProblem p = build_problem(s, make_registry(pts), 50.0);

    GeoAssignment exact = brute_force(p);
    GeoAssignment heur = local_search(p, seed);
    INFO("seed " << seed << ": heuristic " << heur.objective_km2 << " vs optimal "
                 << exact.objective_km2);
    CHECK(heur.objective_km2 <= exact.objective_km2 * (1.0 + 1e-9) + 1e-9);
  }
}

TEST_CASE("local search is deterministic and never worse than greedy") {
  Philox4x32 gen(5);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 12; ++i)
    pts.push_back({gen.uniform_at(2 * i) * 400.0, gen.uniform_at(2 * i + 1) * 400.0});
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i < 9; ++i) edges.push_back({i, (i + 3) % 9, 1.0 + (i % 4)});
  NetworkSnapshot s = make_snapshot(9, edges);
  AssignmentProblem p = build_problem(s, make_registry(pts), 40.0);

  GeoAssignment a = local_search(p, 123);
  GeoAssignment b = local_search(p, 123);
  CHECK(a.location_of == b.location_of);
  CHECK(a.objective_km2 == b.objective_km2);
  CHECK(a.objective_km2 <= a.initial_objective_km2 + 1e-12);
  check_feasible(p, a.location_of);
}

TEST_CASE("km_per_ohm calibration recovers a planted constant") {
  NetworkSnapshot s = make_snapshot(3, {{0, 1, 2.0}, {1, 2, 3.0}});
  // plant locations so that distance = 25 km/ohm * resistance exactly
  GeoRegistry g = make_registry({{0, 0}, {50, 0}, {125, 0}});
  std::map<std::string, std::string> mapping = {{"B0", "S0"}, {"B1", "S1"}, {"B2", "S2"}};
  double k = calibrate_km_per_ohm(s, g, mapping);
  CHECK(k == Catch::Approx(25.0).epsilon(1e-3));
}
