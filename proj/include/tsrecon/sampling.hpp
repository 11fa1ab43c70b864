#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tsrecon/errors.hpp"
#include "tsrecon/geo_assign.hpp"
#include "tsrecon/rng.hpp"

namespace tsrecon {

// Hyperparameters of the multiplier distribution for one quantity.
struct KernelConfig {
  double variance_scale = 0.01;       // marginal log-variance; std of multipliers ~ 0.1
  double length_scale_km = 1.0;       // spatial correlation length
  double temporal_decay = 1.0;        // per-period decay rate
  double clip_floor = 1e-6;           // multipliers are clipped below at this value

  void validate() const {
    if (variance_scale <= 0 || length_scale_km <= 0 || temporal_decay <= 0)
      throw_validation("kernel parameters must be positive");
    if (clip_floor < 0) throw_validation("clip floor must be nonnegative");
  }
};

// Variance scale whose multiplier distribution has the requested standard
// deviation: std^2 = e^a (e^a - 1), solved for a.
inline double variance_scale_for_std(double target_std) {
  if (target_std <= 0) throw_validation("target std must be positive");
  double t2 = target_std * target_std;
  return std::log((1.0 + std::sqrt(1.0 + 4.0 * t2)) / 2.0);
}

// Squared-exponential spatial covariance: entry (i,j) is
// variance_scale * exp(-D_ij^2 / (2 length_scale^2)), diagonal = variance_scale.
inline Eigen::MatrixXd spatial_kernel(const Eigen::MatrixXd& distance_km, double variance_scale,
                                      double length_scale_km) {
  const int n = static_cast<int>(distance_km.rows());
  if (distance_km.cols() != n) throw_validation("distance matrix must be square");
  for (int i = 0; i < n; ++i) {
    if (distance_km(i, i) != 0.0) throw_validation("distance matrix diagonal must be zero");
    for (int j = i + 1; j < n; ++j) {
      if (distance_km(i, j) < 0) throw_validation("distances must be nonnegative");
      if (std::abs(distance_km(i, j) - distance_km(j, i)) > 1e-9)
        throw_validation("distance matrix must be symmetric");
    }
  }
  const double denom = 2.0 * length_scale_km * length_scale_km;
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k(i, j) = variance_scale * std::exp(-distance_km(i, j) * distance_km(i, j) / denom);
  return k;
}

// Exponentially decaying temporal covariance with unit diagonal:
// entry (s,t) = exp(-decay * |s - t|).
inline Eigen::MatrixXd temporal_kernel(int periods, double decay) {
  if (periods < 1) throw_validation("temporal kernel needs at least one period");
  if (decay <= 0) throw_validation("temporal decay must be positive");
  Eigen::MatrixXd k(periods, periods);
  for (int s = 0; s < periods; ++s)
    for (int t = 0; t < periods; ++t) k(s, t) = std::exp(-decay * std::abs(s - t));
  return k;
}

struct CholeskyResult {
  Eigen::MatrixXd lower;      // L with M + jitter*I = L L^T
  double jitter = 0.0;
};

// Squared-exponential kernels are often numerically semidefinite; retry with
// a doubling diagonal jitter before giving up.
inline CholeskyResult cholesky_with_jitter(const Eigen::MatrixXd& m) {
  double base = 1e-10 * m.trace() / static_cast<double>(m.rows());
  if (base <= 0) base = 1e-12;
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 8; ++attempt) {
    Eigen::MatrixXd shifted = m;
    if (jitter > 0) shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    jitter = (jitter == 0.0) ? base : 2.0 * jitter;
  }
  throw_solver("covariance factorization failed after maximum jitter");
}

// Mean-one multiplier panel: one row per component, one column per period.
struct VolatilityPanel {
  Eigen::MatrixXd values;  // N x T
  std::uint64_t seed = 0;
  KernelConfig config;
  std::int64_t clipped = 0;  // entries raised to the clip floor

  int component_count() const { return static_cast<int>(values.rows()); }
  int period_count() const { return static_cast<int>(values.cols()); }
};

// Draws a zero-mean Gaussian matrix whose row covariance is the spatial
// kernel and column covariance the temporal kernel, i.e. the separable
// product covariance over (component, period) pairs, without ever forming
// that product. The matrix is then pushed through exp() and shifted so every
// entry has mean exactly one.
//
// Convention: spatial = L1 L1^T and temporal = L2 L2^T with L1, L2 lower
// triangular; the panel is L1 * X * L2^T for iid standard normal X. The
// normal stream fills X row-major, so a (seed, shape) pair pins the panel
// bit-for-bit on a given platform. Cross-platform reproducibility is limited
// only by libm's exp/log/cos rounding.
inline VolatilityPanel sample_panel(const Eigen::MatrixXd& spatial, const Eigen::MatrixXd& temporal,
                                    std::uint64_t seed, double clip_floor = 1e-6) {
  const int n = static_cast<int>(spatial.rows());
  const int t = static_cast<int>(temporal.rows());
  CholeskyResult cs = cholesky_with_jitter(spatial);
  CholeskyResult ct = cholesky_with_jitter(temporal);

  Philox4x32 gen(seed);
  Eigen::MatrixXd x(n, t);
  std::uint64_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < t; ++j) x(i, j) = gen.normal_at(idx++);

  Eigen::MatrixXd y0 = cs.lower * x * ct.lower.transpose();

  // Entry (i,j) of y0 has variance spatial'(i,i) * temporal'(j,j) including
  // jitter; exp(y0) then has mean exp(var/2), removed by the shift.
  Eigen::VectorXd var_s = spatial.diagonal().array() + cs.jitter;
  Eigen::VectorXd var_t = temporal.diagonal().array() + ct.jitter;

  VolatilityPanel panel;
  panel.seed = seed;
  panel.values.resize(n, t);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < t; ++j) {
      double v = var_s(i) * var_t(j);
      double y = std::exp(y0(i, j)) + 1.0 - std::exp(0.5 * v);
      if (y < clip_floor) {
        y = clip_floor;
        ++panel.clipped;
      }
      panel.values(i, j) = y;
    }
  }
  return panel;
}

inline VolatilityPanel sample_panel(const KernelConfig& config, const Eigen::MatrixXd& distance_km,
                                    int periods, std::uint64_t seed) {
  config.validate();
  Eigen::MatrixXd s = spatial_kernel(distance_km, config.variance_scale, config.length_scale_km);
  Eigen::MatrixXd t = temporal_kernel(periods, config.temporal_decay);
  VolatilityPanel panel = sample_panel(s, t, seed, config.clip_floor);
  panel.config = config;
  return panel;
}

// Explicit separable product covariance, for tests and audits only; the
// sampler never forms it and this helper refuses sizes where it would be
// the dominant memory cost.
inline Eigen::MatrixXd dense_product_covariance(const Eigen::MatrixXd& spatial,
                                                const Eigen::MatrixXd& temporal) {
  const long n = spatial.rows();
  const long t = temporal.rows();
  if (n * t > 10000)
    throw_validation("refusing to build a " + std::to_string(n * t) + "^2 dense covariance");
  Eigen::MatrixXd full(n * t, n * t);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j)
      full.block(i * t, j * t, t, t) = spatial(i, j) * temporal;
  return full;
}

// Pairwise great-circle distances for a component set's coordinates.
inline Eigen::MatrixXd distance_matrix_km(const std::vector<double>& lat,
                                          const std::vector<double>& lon) {
  const int n = static_cast<int>(lat.size());
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double km = haversine_km(lat[i], lon[i], lat[j], lon[j]);
      d(i, j) = km;
      d(j, i) = km;
    }
  }
  return d;
}

}  // namespace tsrecon
