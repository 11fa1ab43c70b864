#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "tsrecon/disagg.hpp"

using namespace tsrecon;

namespace {

struct Fixture {
  RegionalSeries regional;
  ComponentSet set;
  Contributions contrib;
};

// One region, n components with the given shares; T constant totals.
Fixture one_region(const std::vector<double>& base_mw, double total, int T) {
  Fixture f;
  f.regional.quantity = Quantity::load;
  f.regional.region_ids = {"R1"};
  f.regional.period_minutes = 30;
  f.regional.values_mw = Eigen::MatrixXd::Constant(1, T, total);
  f.set.quantity = Quantity::load;
  for (std::size_t i = 0; i < base_mw.size(); ++i) {
    f.set.ids.push_back("D" + std::to_string(i));
    f.set.bus_ids.push_back("B" + std::to_string(i));
    f.set.region_ids.push_back("R1");
    f.set.base_mw.push_back(base_mw[i]);
  }
  f.set.lat_deg.assign(base_mw.size(), 0.0);
  f.set.lon_deg.assign(base_mw.size(), 0.0);
  f.contrib = contribution_vectors(f.set, {"R1"});
  return f;
}

VolatilityPanel panel_of(const Eigen::MatrixXd& values) {
  VolatilityPanel p;
  p.values = values;
  return p;
}

}  // namespace

TEST_CASE("hand-evaluated split: shares 0.5/0.5, multipliers 1.2/0.8") {
  Fixture f = one_region({50, 50}, 100.0, 1);
  Eigen::MatrixXd y(2, 1);
  y << 1.2, 0.8;
  ComponentSeries out = disaggregate(f.regional, f.set, f.contrib, panel_of(y));
  CHECK(out.values_mw(0, 0) == Catch::Approx(60.0).epsilon(1e-12));
  CHECK(out.values_mw(1, 0) == Catch::Approx(40.0).epsilon(1e-12));
}

TEST_CASE("single component inherits the whole regional value") {
  Fixture f = one_region({80}, 123.5, 3);
  Eigen::MatrixXd y(1, 3);
  y << 0.7, 1.4, 2.2;
  ComponentSeries out = disaggregate(f.regional, f.set, f.contrib, panel_of(y));
  for (int t = 0; t < 3; ++t) CHECK(out.values_mw(0, t) == Catch::Approx(123.5).epsilon(1e-12));
}

TEST_CASE("unit multipliers reduce to plain share scaling") {
  Fixture f = one_region({30, 70}, 200.0, 2);
  ComponentSeries out =
      disaggregate(f.regional, f.set, f.contrib, panel_of(Eigen::MatrixXd::Ones(2, 2)));
  CHECK(out.values_mw(0, 0) == Catch::Approx(60.0));
  CHECK(out.values_mw(1, 0) == Catch::Approx(140.0));
}

TEST_CASE("regional sums are conserved exactly under random multipliers") {
  Philox4x32 gen(17);
  std::uint64_t idx = 0;
  for (int rep = 0; rep < 5; ++rep) {
    int n = 3 + rep;
    std::vector<double> base;
    for (int i = 0; i < n; ++i) base.push_back(10.0 + 90.0 * gen.uniform_at(idx++));
    Fixture f = one_region(base, 500.0 + rep * 100, 6);
    Eigen::MatrixXd y(n, 6);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < 6; ++t) y(i, t) = 0.5 + gen.uniform_at(idx++);
    ComponentSeries out = disaggregate(f.regional, f.set, f.contrib, panel_of(y));
    CHECK(max_conservation_error(out, f.regional, f.contrib) <= 1e-9);
    CHECK(out.values_mw.minCoeff() >= 0.0);
  }
}

TEST_CASE("scaling the regional series scales the split linearly") {
  Fixture f = one_region({20, 30, 50}, 100.0, 2);
  Eigen::MatrixXd y(3, 2);
  y << 1.1, 0.9, 0.8, 1.3, 1.0, 1.0;
  ComponentSeries a = disaggregate(f.regional, f.set, f.contrib, panel_of(y));
  f.regional.values_mw *= 3.0;
  ComponentSeries b = disaggregate(f.regional, f.set, f.contrib, panel_of(y));
  CHECK((b.values_mw - 3.0 * a.values_mw).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("denominator guard catches all-zero multipliers") {
  Fixture f = one_region({40, 60}, 100.0, 1);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(disaggregate(f.regional, f.set, f.contrib, panel_of(y)), error);
}

TEST_CASE("interpolation keeps knots and fills segments linearly") {
  ComponentSeries src;
  src.component_ids = {"D1"};
  src.period_minutes = 30;
  src.values_mw.resize(1, 3);
  src.values_mw << 100, 130, 70;
  ComponentSeries fine = interpolate(src, 5);
  CHECK(fine.period_count() == 6 * (3 - 1) + 1);
  CHECK(fine.period_minutes == 5);
  CHECK(fine.values_mw(0, 0) == 100.0);
  CHECK(fine.values_mw(0, 6) == 130.0);
  CHECK(fine.values_mw(0, 12) == 70.0);
  CHECK(fine.values_mw(0, 3) == Catch::Approx(115.0));  // midpoint of 100 and 130
  CHECK(fine.values_mw(0, 9) == Catch::Approx(100.0));  // midpoint of 130 and 70

  SECTION("non-divisor target granularity is rejected") {
    CHECK_THROWS_AS(interpolate(src, 7), error);
  }
  SECTION("equal granularity is the identity") {
    ComponentSeries same = interpolate(src, 30);
    CHECK(same.values_mw == src.values_mw);
  }
}

TEST_CASE("interpolated component sums track interpolated regional totals") {
  // linearity: sum of interpolants equals interpolant of the sum
  Fixture f = one_region({25, 75}, 0.0, 4);
  f.regional.values_mw << 100, 160, 40, 220;
  Eigen::MatrixXd y(2, 4);
  y << 1.2, 0.8, 1.0, 1.1, 0.9, 1.3, 1.0, 0.95;
  ComponentSeries coarse = disaggregate(f.regional, f.set, f.contrib, panel_of(y));
  ComponentSeries fine = interpolate(coarse, 5);
  RegionalSeries fine_truth = interpolate(f.regional, 5);
  Contributions c = f.contrib;
  CHECK(max_conservation_error(fine, fine_truth, c) <= 1e-9);
}

TEST_CASE("uniform baseline keeps exact ratios at zero noise") {
  Eigen::VectorXd totals(3);
  totals << 100, 200, 300;
  Eigen::VectorXd ratios(2);
  ratios << 0.25, 0.75;
  ComponentSeries out = baseline_uniform(totals, {"A", "B"}, ratios, 0.0, 1);
  CHECK(out.lineage == Lineage::baseline);
  CHECK(out.values_mw(0, 1) == Catch::Approx(50.0));
  CHECK(out.values_mw(1, 2) == Catch::Approx(225.0));
}

TEST_CASE("uniform baseline noise has mean one and the requested spread") {
  Eigen::VectorXd totals = Eigen::VectorXd::Ones(2000);
  Eigen::VectorXd ratios = Eigen::VectorXd::Ones(1);
  for (double noise : {0.05, 0.10}) {
    ComponentSeries out = baseline_uniform(totals, {"A"}, ratios, noise, 7);
    double mean = out.values_mw.mean();
    double sd = std::sqrt((out.values_mw.array() - mean).square().mean());
    CHECK(std::abs(mean - 1.0) < 0.01);
    CHECK(sd == Catch::Approx(noise).margin(0.01));
  }
}

TEST_CASE("uniform baseline does not conserve regional sums") {
  Eigen::VectorXd totals = Eigen::VectorXd::Constant(50, 100.0);
  Eigen::VectorXd ratios(2);
  ratios << 0.5, 0.5;
  ComponentSeries out = baseline_uniform(totals, {"A", "B"}, ratios, 0.10, 3);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t)
    worst = std::max(worst, std::abs(out.values_mw.col(t).sum() - 100.0));
  CHECK(worst > 0.1);  // drift is the point of the baseline
}
