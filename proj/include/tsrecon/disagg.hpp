#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tsrecon/errors.hpp"
#include "tsrecon/model.hpp"
#include "tsrecon/rng.hpp"
#include "tsrecon/sampling.hpp"

namespace tsrecon {

// Splits each regional total across its components in proportion to
// share * multiplier, renormalized so the regional sum is preserved exactly.
inline ComponentSeries disaggregate(const RegionalSeries& regional, const ComponentSet& set,
                                    const Contributions& contrib, const VolatilityPanel& panel,
                                    double denominator_guard = 1e-9) {
  const int T = regional.period_count();
  if (panel.component_count() != set.size() || panel.period_count() != T)
    throw_validation("panel shape does not match components x periods");
  if (static_cast<int>(contrib.shares.size()) != set.size())
    throw_validation("contribution shares do not match the component set");

  ComponentSeries out;
  out.quantity = regional.quantity;
  out.lineage = Lineage::disaggregated;
  out.component_ids = set.ids;
  out.period_minutes = regional.period_minutes;
  out.start_epoch_s = regional.start_epoch_s;
  out.values_mw.resize(set.size(), T);

  for (std::size_t r = 0; r < contrib.region_ids.size(); ++r) {
    const auto& members = contrib.members[r];
    if (members.empty()) {
      // a region with energy but nothing to carry it cannot conserve sums
      int row = regional.region_row(contrib.region_ids[r]);
      if (regional.values_mw.row(row).cwiseAbs().maxCoeff() > 0.0)
        throw_validation("region '" + contrib.region_ids[r] + "' has nonzero " +
                         to_string(regional.quantity) + " totals but no components");
      continue;
    }
    int row = regional.region_row(contrib.region_ids[r]);
    for (int t = 0; t < T; ++t) {
      double denom = 0.0;
      for (int i : members) denom += contrib.shares[i] * panel.values(i, t);
      if (denom < denominator_guard)
        throw_solver("disaggregation denominator " + std::to_string(denom) + " below guard in region '" +
                     contrib.region_ids[r] + "' at period " + std::to_string(t));
      double total = regional.values_mw(row, t);
      for (int i : members)
        out.values_mw(i, t) = total * contrib.shares[i] * panel.values(i, t) / denom;
    }
  }
  return out;
}

// Linear interpolation onto a finer grid; target must divide the source
// period. T source knots become k*(T-1)+1 points with the knots preserved.
inline ComponentSeries interpolate(const ComponentSeries& series, int target_minutes) {
  if (target_minutes <= 0 || series.period_minutes % target_minutes != 0)
    throw_validation("target granularity " + std::to_string(target_minutes) +
                     " min does not divide source granularity " +
                     std::to_string(series.period_minutes) + " min");
  const int k = series.period_minutes / target_minutes;
  if (k == 1) return series;
  const int T = series.period_count();
  if (T < 2) throw_validation("interpolation needs at least two source periods");

  ComponentSeries out;
  out.quantity = series.quantity;
  out.lineage = series.lineage;
  out.component_ids = series.component_ids;
  out.period_minutes = target_minutes;
  out.start_epoch_s = series.start_epoch_s;
  out.values_mw.resize(series.component_count(), k * (T - 1) + 1);
  for (int t = 0; t + 1 < T; ++t) {
    for (int step = 0; step < k; ++step) {
      double w = static_cast<double>(step) / k;
      out.values_mw.col(t * k + step) =
          (1.0 - w) * series.values_mw.col(t) + w * series.values_mw.col(t + 1);
    }
  }
  out.values_mw.col(k * (T - 1)) = series.values_mw.col(T - 1);
  return out;
}

inline RegionalSeries interpolate(const RegionalSeries& series, int target_minutes) {
  ComponentSeries tmp;
  tmp.quantity = series.quantity;
  tmp.component_ids = series.region_ids;
  tmp.values_mw = series.values_mw;
  tmp.period_minutes = series.period_minutes;
  tmp.start_epoch_s = series.start_epoch_s;
  ComponentSeries fine = interpolate(tmp, target_minutes);
  RegionalSeries out;
  out.quantity = series.quantity;
  out.region_ids = series.region_ids;
  out.values_mw = fine.values_mw;
  out.period_minutes = target_minutes;
  out.start_epoch_s = series.start_epoch_s;
  return out;
}

// The naive reconstruction used as a comparison point: total * fixed ratio *
// independent log-normal noise with mean 1 and the given standard deviation.
// Deliberately not renormalized, so regional sums drift from the truth.
inline ComponentSeries baseline_uniform(const Eigen::VectorXd& totals_mw,
                                        const std::vector<std::string>& component_ids,
                                        const Eigen::VectorXd& ratios, double noise_std,
                                        std::uint64_t seed, Quantity quantity = Quantity::load,
                                        int period_minutes = 30, std::int64_t start_epoch_s = 0) {
  if (noise_std < 0) throw_validation("noise std must be nonnegative");
  const int n = static_cast<int>(ratios.size());
  const int T = static_cast<int>(totals_mw.size());
  if (static_cast<int>(component_ids.size()) != n)
    throw_validation("ratio vector does not match component ids");

  // log-normal with mean 1, std tau: exp(N(-s^2/2, s^2)), s^2 = ln(1 + tau^2)
  double s2 = std::log(1.0 + noise_std * noise_std);
  double mu = -0.5 * s2;
  double sd = std::sqrt(s2);

  Philox4x32 gen(seed);
  ComponentSeries out;
  out.quantity = quantity;
  out.lineage = Lineage::baseline;
  out.component_ids = component_ids;
  out.period_minutes = period_minutes;
  out.start_epoch_s = start_epoch_s;
  out.values_mw.resize(n, T);
  std::uint64_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      double m = noise_std == 0.0 ? 1.0 : std::exp(mu + sd * gen.normal_at(idx));
      ++idx;
      out.values_mw(i, t) = totals_mw(t) * ratios(i) * m;
    }
  return out;
}

// Largest relative regional-sum error of a component series against the
// ground truth; the conservation invariant checker.
inline double max_conservation_error(const ComponentSeries& series, const RegionalSeries& regional,
                                     const Contributions& contrib) {
  double worst = 0.0;
  for (std::size_t r = 0; r < contrib.region_ids.size(); ++r) {
    if (contrib.members[r].empty()) continue;
    int row = regional.region_row(contrib.region_ids[r]);
    for (int t = 0; t < series.period_count(); ++t) {
      double sum = 0.0;
      for (int i : contrib.members[r]) sum += series.values_mw(i, t);
      double truth = regional.values_mw(row, t);
      double denom = std::max(1e-12, std::abs(truth));
      worst = std::max(worst, std::abs(sum - truth) / denom);
    }
  }
  return worst;
}

}  // namespace tsrecon
