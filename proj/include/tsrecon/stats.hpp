#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tsrecon/errors.hpp"
#include "tsrecon/model.hpp"

namespace tsrecon {

struct PearsonResult {
  Eigen::MatrixXd matrix;                    // R x R, NaN where undefined
  std::vector<std::string> zero_variance;    // regions with no variation in the window
};

// Pairwise correlation of the regional rows over a half-open period window
// [begin, end); zero-variance rows are flagged and their entries left NaN.
inline PearsonResult pearson_matrix(const RegionalSeries& series, int window_begin = 0,
                                    int window_end = -1) {
  const int R = series.region_count();
  if (window_end < 0) window_end = series.period_count();
  if (window_begin < 0 || window_end > series.period_count() || window_end - window_begin < 3)
    throw_validation("pearson window must hold at least 3 periods");
  const int T = window_end - window_begin;

  Eigen::MatrixXd x = series.values_mw.block(0, window_begin, R, T);
  Eigen::VectorXd mean = x.rowwise().mean();
  x.colwise() -= mean;
  Eigen::VectorXd norm(R);
  PearsonResult res;
  for (int r = 0; r < R; ++r) {
    norm(r) = x.row(r).norm();
    if (norm(r) <= 1e-12 * std::max(1.0, std::abs(mean(r))))
      res.zero_variance.push_back(series.region_ids[r]);
  }
  res.matrix.setConstant(R, R, std::numeric_limits<double>::quiet_NaN());
  for (int a = 0; a < R; ++a) {
    for (int b = 0; b < R; ++b) {
      if (norm(a) <= 0 || norm(b) <= 0) continue;
      if (std::find(res.zero_variance.begin(), res.zero_variance.end(), series.region_ids[a]) !=
              res.zero_variance.end() ||
          std::find(res.zero_variance.begin(), res.zero_variance.end(), series.region_ids[b]) !=
              res.zero_variance.end())
        continue;
      double r = x.row(a).dot(x.row(b)) / (norm(a) * norm(b));
      res.matrix(a, b) = std::clamp(r, -1.0, 1.0);
    }
  }
  return res;
}

struct ProjectionReport {
  Eigen::MatrixXd loadings;        // 2 x R, orthonormal rows
  std::vector<double> explained;   // variance fractions, non-increasing
  Eigen::MatrixXd historical_2d;   // M x 2
  Eigen::MatrixXd synthetic_2d;    // M' x 2
  double overlap_score = 0.0;      // filled by callers that also run overlap_score()
  bool rank_deficient = false;
  double total_variance = 0.0;
};

// Principal components fitted on the pooled, column-centered rows of both
// clouds (covariance form on MW-scaled data); both clouds are projected in
// the shared frame so they are comparable.
inline ProjectionReport pca_project(const Eigen::MatrixXd& historical,
                                    const Eigen::MatrixXd& synthetic) {
  const int R = static_cast<int>(historical.cols());
  if (synthetic.cols() != R) throw_validation("pca: column counts disagree");
  if (historical.rows() < R || R < 2)
    throw_validation("pca: needs at least as many rows as columns and 2 columns");

  Eigen::MatrixXd pooled(historical.rows() + synthetic.rows(), R);
  pooled << historical, synthetic;
  Eigen::RowVectorXd mean = pooled.colwise().mean();
  Eigen::MatrixXd centered = pooled.rowwise() - mean;
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(pooled.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigs(cov);
  if (eigs.info() != Eigen::Success) throw_solver("pca: eigendecomposition failed");
  Eigen::VectorXd values = eigs.eigenvalues();  // ascending
  Eigen::MatrixXd vectors = eigs.eigenvectors();

  ProjectionReport rep;
  rep.total_variance = values.cwiseMax(0.0).sum();
  rep.loadings.resize(2, R);
  rep.loadings.row(0) = vectors.col(R - 1).transpose();
  rep.loadings.row(1) = vectors.col(R - 2).transpose();
  double denom = rep.total_variance > 0 ? rep.total_variance : 1.0;
  rep.explained = {std::max(0.0, values(R - 1)) / denom, std::max(0.0, values(R - 2)) / denom};
  rep.rank_deficient = values(R - 2) <= 1e-12 * std::max(1.0, values(R - 1));

  Eigen::MatrixXd hist_c = historical.rowwise() - mean;
  Eigen::MatrixXd synth_c = synthetic.rowwise() - mean;
  rep.historical_2d = hist_c * rep.loadings.transpose();
  rep.synthetic_2d = synth_c * rep.loadings.transpose();
  return rep;
}

namespace detail {

// k-NN distance of every point within its own cloud, self excluded.
inline Eigen::VectorXd knn_scale(const Eigen::MatrixXd& cloud, int k) {
  const int n = static_cast<int>(cloud.rows());
  Eigen::VectorXd scale(n);
  std::vector<double> dists(n - 1);
  for (int i = 0; i < n; ++i) {
    int idx = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dists[idx++] = (cloud.row(i) - cloud.row(j)).norm();
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    scale(i) = dists[k - 1];
  }
  return scale;
}

// fraction of `from` points whose nearest `to` point lies within that
// point's own k-NN radius inside `to`
inline double coverage(const Eigen::MatrixXd& from, const Eigen::MatrixXd& to,
                       const Eigen::VectorXd& to_scale) {
  int covered = 0;
  for (int q = 0; q < from.rows(); ++q) {
    int nearest = 0;
    double best = (from.row(q) - to.row(0)).norm();
    for (int j = 1; j < to.rows(); ++j) {
      double d = (from.row(q) - to.row(j)).norm();
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    if (best <= to_scale(nearest)) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(from.rows());
}

}  // namespace detail

// Symmetric coverage proxy: a point is covered when its nearest neighbour in
// the other cloud lies within that neighbour's own k-NN radius, and the score
// averages the two directions. Identical clouds score exactly 1, far-apart
// clouds 0, and a synthetic cloud that misses part of the historical spread
// (or sticks out of it) is penalized from the corresponding side.
inline double overlap_score(const Eigen::MatrixXd& historical, const Eigen::MatrixXd& synthetic,
                            int k = 5) {
  const int M = static_cast<int>(historical.rows());
  const int S = static_cast<int>(synthetic.rows());
  if (M == 0 || S == 0) throw_validation("overlap: clouds must be nonempty");
  if (k < 1) throw_validation("overlap: k must be >= 1");
  if (M <= k || S <= k) throw_validation("overlap: clouds need more than k points");
  if (historical.cols() != synthetic.cols())
    throw_validation("overlap: dimensionality mismatch");

  Eigen::VectorXd hist_scale = detail::knn_scale(historical, k);
  Eigen::VectorXd synth_scale = detail::knn_scale(synthetic, k);
  double s_in_h = detail::coverage(synthetic, historical, hist_scale);
  double h_in_s = detail::coverage(historical, synthetic, synth_scale);
  return 0.5 * (s_in_h + h_in_s);
}

}  // namespace tsrecon
