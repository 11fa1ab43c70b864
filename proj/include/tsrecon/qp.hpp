#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tsrecon/errors.hpp"

namespace tsrecon::qp {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Convex quadratic program
//   minimize    0.5 x'Px + q'x
//   subject to  lower <= A x <= upper
// P is positive semidefinite; equality rows have lower == upper.
struct Problem {
  SpMat P;    // n x n
  Vec q;      // n
  SpMat A;    // m x n
  Vec lower;  // m
  Vec upper;  // m

  int vars() const { return static_cast<int>(q.size()); }
  int constraints() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (P.rows() != P.cols() || P.rows() != q.size())
      throw_validation("qp: P/q dimensions disagree");
    if (A.rows() != lower.size() || A.rows() != upper.size() || A.cols() != q.size())
      throw_validation("qp: A/bounds dimensions disagree");
    if (A.rows() == 0) throw_validation("qp: at least one constraint row is required");
    for (int i = 0; i < lower.size(); ++i)
      if (lower(i) > upper(i))
        throw_validation("qp: lower bound above upper at row " + std::to_string(i));
  }
};

enum class Status { solved, max_iterations, primal_infeasible, dual_infeasible };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::solved: return "solved";
    case Status::max_iterations: return "max_iterations";
    case Status::primal_infeasible: return "primal_infeasible";
    case Status::dual_infeasible: return "dual_infeasible";
  }
  return "?";
}

struct Settings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-9;
  double eps_rel = 1e-9;
  double eps_infeasible = 1e-9;
  int max_iterations = 200000;
  int check_interval = 25;
  int scaling_iterations = 10;
  bool adaptive_rho = true;
  bool polish = true;
  bool verbose = false;
};

struct Solution {
  Status status = Status::max_iterations;
  Vec x;  // primal, original units
  Vec y;  // constraint duals, original units
  Vec z;  // constraint values at the solution
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
  Vec certificate;  // unbounded dual (primal infeasible) or primal (dual infeasible) direction
};

// Operator-splitting solver: diagonal (Ruiz) equilibration, per-row
// penalties, a quasi-definite KKT factorization reused across iterations,
// adaptive penalty rescaling, and an active-set polish pass that upgrades
// the first-order iterate to a high-accuracy solution.
//
// Scaling bookkeeping: with x = D xs, the scaled data are Ps = D P D,
// qs = D q, As = E A D, [ls, us] = E [l, u]; then z = zs / E and y = E ys.
class AdmmSolver {
public:
  explicit AdmmSolver(const Settings& settings = {}) : st_(settings) {}

  Solution solve(const Problem& original) const {
    original.validate();
    const int n = original.vars();
    const int m = original.constraints();

    SpMat P = original.P;
    SpMat A = original.A;
    Vec q = original.q, l = original.lower, u = original.upper;
    Vec d = Vec::Ones(n), e = Vec::Ones(m);
    if (st_.scaling_iterations > 0) ruiz_equilibrate(P, A, q, l, u, d, e);

    double rho_bar = st_.rho;
    Vec rho = rho_vector(l, u, rho_bar);

    Eigen::SimplicialLDLT<SpMat> kkt;
    factorize(kkt, P, A, rho);

    Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
    for (int i = 0; i < m; ++i) z(i) = std::clamp(0.0, l(i), u(i));

    Solution sol;
    Vec rhs(n + m), w(m), dx(n), dy(m);

    for (int iter = 1; iter <= st_.max_iterations; ++iter) {
      rhs.head(n) = st_.sigma * x - q;
      rhs.tail(m) = z - y.cwiseQuotient(rho);
      Vec step = kkt.solve(rhs);
      Vec xt = step.head(n);
      Vec zt = z + (step.tail(m) - y).cwiseQuotient(rho);

      dx = st_.alpha * (xt - x);
      x += dx;
      w = st_.alpha * zt + (1.0 - st_.alpha) * z;
      Vec znew = (w + y.cwiseQuotient(rho)).cwiseMax(l).cwiseMin(u);
      dy = rho.cwiseProduct(w - znew);
      y += dy;
      z = znew;

      if (iter % st_.check_interval != 0 && iter != st_.max_iterations) continue;
      sol.iterations = iter;

      // residuals and tolerances in original units
      Vec ax = A * x;
      double rp = ((ax - z).cwiseQuotient(e)).lpNorm<Eigen::Infinity>();
      double rd = ((P * x + q + A.transpose() * y).cwiseQuotient(d)).lpNorm<Eigen::Infinity>();
      double p_scale = std::max((ax.cwiseQuotient(e)).lpNorm<Eigen::Infinity>(),
                                (z.cwiseQuotient(e)).lpNorm<Eigen::Infinity>());
      double d_scale = std::max({((P * x).cwiseQuotient(d)).lpNorm<Eigen::Infinity>(),
                                 (q.cwiseQuotient(d)).lpNorm<Eigen::Infinity>(),
                                 ((A.transpose() * y).cwiseQuotient(d)).lpNorm<Eigen::Infinity>()});
      sol.primal_residual = rp;
      sol.dual_residual = rd;

      if (rp <= st_.eps_abs + st_.eps_rel * p_scale && rd <= st_.eps_abs + st_.eps_rel * d_scale) {
        sol.status = Status::solved;
        break;
      }
      if (check_primal_infeasible(A, l, u, d, e, dy, sol)) return sol;
      if (check_dual_infeasible(P, A, q, l, u, d, e, dx, sol)) return sol;

      if (st_.adaptive_rho && iter % (st_.check_interval * 8) == 0) {
        double num = rp / std::max(p_scale, 1e-12);
        double den = rd / std::max(d_scale, 1e-12);
        double ratio = std::sqrt(num / std::max(den, 1e-16));
        ratio = std::clamp(ratio, 1e-4, 1e4);
        if (ratio > 5.0 || ratio < 0.2) {
          rho_bar = std::clamp(rho_bar * ratio, 1e-6, 1e6);
          rho = rho_vector(l, u, rho_bar);
          factorize(kkt, P, A, rho);
        }
      }
    }

    if (st_.polish) {
      double rp_cap = std::max(sol.primal_residual, st_.eps_abs);
      double rd_cap = std::max(sol.dual_residual, st_.eps_abs);
      double rp_pol, rd_pol;
      if (try_polish(P, A, q, l, u, d, e, rp_cap, rd_cap, x, y, z, rp_pol, rd_pol)) {
        sol.primal_residual = rp_pol;
        sol.dual_residual = rd_pol;
        sol.polished = true;
        if (rp_pol <= st_.eps_abs * 100 && rd_pol <= st_.eps_abs * 100)
          sol.status = Status::solved;
      }
    }

    sol.x = d.cwiseProduct(x);
    sol.y = e.cwiseProduct(y);
    sol.z = z.cwiseQuotient(e);
    sol.objective = 0.5 * sol.x.dot(original.P * sol.x) + original.q.dot(sol.x);
    return sol;
  }

private:
  Settings st_;

  static Vec rho_vector(const Vec& l, const Vec& u, double rho_bar) {
    Vec rho = Vec::Constant(l.size(), rho_bar);
    for (int i = 0; i < l.size(); ++i) {
      if (l(i) == u(i)) rho(i) = rho_bar * 1e3;
      else if (l(i) == -kInf && u(i) == kInf) rho(i) = rho_bar * 1e-6;
    }
    return rho;
  }

  void factorize(Eigen::SimplicialLDLT<SpMat>& kkt, const SpMat& P, const SpMat& A,
                 const Vec& rho) const {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(A.rows());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(P.nonZeros() + 2 * A.nonZeros() + n + m);
    for (int k = 0; k < P.outerSize(); ++k)
      for (SpMat::InnerIterator it(P, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, st_.sigma);
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it) {
        trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rho(i));
    SpMat kktm(n + m, n + m);
    kktm.setFromTriplets(trips.begin(), trips.end());
    kkt.compute(kktm);
    if (kkt.info() != Eigen::Success) throw_solver("qp: KKT factorization failed");
  }

  void ruiz_equilibrate(SpMat& P, SpMat& A, Vec& q, Vec& l, Vec& u, Vec& d, Vec& e) const {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(A.rows());
    for (int pass = 0; pass < st_.scaling_iterations; ++pass) {
      Vec cn = Vec::Zero(n), rn = Vec::Zero(m);
      for (int k = 0; k < P.outerSize(); ++k)
        for (SpMat::InnerIterator it(P, k); it; ++it)
          cn(it.col()) = std::max(cn(it.col()), std::abs(it.value()));
      for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
          cn(it.col()) = std::max(cn(it.col()), std::abs(it.value()));
          rn(it.row()) = std::max(rn(it.row()), std::abs(it.value()));
        }
      Vec dc(n), ec(m);
      for (int i = 0; i < n; ++i) dc(i) = cn(i) > 1e-12 ? 1.0 / std::sqrt(cn(i)) : 1.0;
      for (int i = 0; i < m; ++i) ec(i) = rn(i) > 1e-12 ? 1.0 / std::sqrt(rn(i)) : 1.0;
      P = dc.asDiagonal() * P * dc.asDiagonal();
      A = ec.asDiagonal() * A * dc.asDiagonal();
      q = dc.cwiseProduct(q);
      for (int i = 0; i < m; ++i) {
        if (std::isfinite(l(i))) l(i) *= ec(i);
        if (std::isfinite(u(i))) u(i) *= ec(i);
      }
      d = d.cwiseProduct(dc);
      e = e.cwiseProduct(ec);
    }
  }

  bool check_primal_infeasible(const SpMat& A, const Vec& l, const Vec& u, const Vec& d,
                               const Vec& e, const Vec& dy, Solution& sol) const {
    double norm_dy = dy.cwiseProduct(e).lpNorm<Eigen::Infinity>();
    if (norm_dy < 1e-14) return false;
    double tol = st_.eps_infeasible * norm_dy;
    if (((A.transpose() * dy).cwiseQuotient(d)).lpNorm<Eigen::Infinity>() > tol) return false;
    // u'(dy)+ + l'(dy)-: scaled u times scaled dy is already in original units
    double support = 0.0;
    for (int i = 0; i < dy.size(); ++i) {
      if (dy(i) > 1e-14) {
        if (!std::isfinite(u(i))) return false;
        support += u(i) * dy(i);
      } else if (dy(i) < -1e-14) {
        if (!std::isfinite(l(i))) return false;
        support += l(i) * dy(i);
      }
    }
    if (support <= -tol) {
      sol.status = Status::primal_infeasible;
      sol.certificate = dy.cwiseProduct(e);
      return true;
    }
    return false;
  }

  bool check_dual_infeasible(const SpMat& P, const SpMat& A, const Vec& q, const Vec& l,
                             const Vec& u, const Vec& d, const Vec& e, const Vec& dx,
                             Solution& sol) const {
    double norm_dx = dx.cwiseProduct(d).lpNorm<Eigen::Infinity>();
    if (norm_dx < 1e-14) return false;
    double tol = st_.eps_infeasible * norm_dx;
    if (((P * dx).cwiseQuotient(d)).lpNorm<Eigen::Infinity>() > tol) return false;
    if (q.dot(dx) > -tol) return false;
    Vec adx = (A * dx).cwiseQuotient(e);
    for (int i = 0; i < adx.size(); ++i) {
      if (adx(i) > tol && std::isfinite(u(i))) return false;
      if (adx(i) < -tol && std::isfinite(l(i))) return false;
    }
    sol.status = Status::dual_infeasible;
    sol.certificate = dx.cwiseProduct(d);
    return true;
  }

  // Equality re-solve on the active set read off the dual signs, refined
  // against the unregularized KKT system. The polished point is adopted only
  // when it beats both residual caps; otherwise x,y,z are untouched.
  bool try_polish(const SpMat& P, const SpMat& A, const Vec& q, const Vec& l, const Vec& u,
                  const Vec& d, const Vec& e, double rp_cap, double rd_cap, Vec& x, Vec& y, Vec& z,
                  double& rp_out, double& rd_out) const {
    const int n = static_cast<int>(P.rows());
    const int m = static_cast<int>(A.rows());
    std::vector<int> active;
    std::vector<double> bound;
    for (int i = 0; i < m; ++i) {
      if (l(i) == u(i)) {
        active.push_back(i);
        bound.push_back(l(i));
      } else if (y(i) < -1e-11 && std::isfinite(l(i))) {
        active.push_back(i);
        bound.push_back(l(i));
      } else if (y(i) > 1e-11 && std::isfinite(u(i))) {
        active.push_back(i);
        bound.push_back(u(i));
      }
    }
    const int ma = static_cast<int>(active.size());
    if (ma == 0) return false;

    const double reg = 1e-9;
    std::vector<int> row_of(m, -1);
    for (int a = 0; a < ma; ++a) row_of[active[a]] = a;

    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < P.outerSize(); ++k)
      for (SpMat::InnerIterator it(P, k); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, reg);
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it) {
        int a = row_of[it.row()];
        if (a < 0) continue;
        trips.emplace_back(n + a, static_cast<int>(it.col()), it.value());
        trips.emplace_back(static_cast<int>(it.col()), n + a, it.value());
      }
    for (int a = 0; a < ma; ++a) trips.emplace_back(n + a, n + a, -reg);
    SpMat kktm(n + ma, n + ma);
    kktm.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<SpMat> ldlt(kktm);
    if (ldlt.info() != Eigen::Success) return false;

    Vec rhs(n + ma);
    rhs.head(n) = -q;
    for (int a = 0; a < ma; ++a) rhs(n + a) = bound[a];
    Vec sol = ldlt.solve(rhs);
    for (int pass = 0; pass < 3; ++pass) {
      Vec xs = sol.head(n), ys = sol.tail(ma);
      Vec resid = rhs;
      Vec at_ys = Vec::Zero(n);
      Vec a_xs = Vec::Zero(ma);
      for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
          int a = row_of[it.row()];
          if (a < 0) continue;
          at_ys(it.col()) += it.value() * ys(a);
          a_xs(a) += it.value() * xs(it.col());
        }
      resid.head(n) -= P * xs + at_ys;
      resid.tail(ma) -= a_xs;
      sol += ldlt.solve(resid);
    }

    Vec xp = sol.head(n);
    Vec yp = Vec::Zero(m);
    for (int a = 0; a < ma; ++a) yp(active[a]) = sol(n + a);
    Vec zp = A * xp;
    Vec zclamped = zp.cwiseMax(l).cwiseMin(u);
    double rp = ((zp - zclamped).cwiseQuotient(e)).lpNorm<Eigen::Infinity>();
    double rd = ((P * xp + q + A.transpose() * yp).cwiseQuotient(d)).lpNorm<Eigen::Infinity>();
    // dual feasibility of the guessed active set: wrong-sign multipliers
    for (int a = 0; a < ma; ++a) {
      int i = active[a];
      if (l(i) == u(i)) continue;
      double ya = sol(n + a);
      if (bound[a] == l(i) && ya > 1e-9) rd = std::max(rd, ya);
      if (bound[a] == u(i) && ya < -1e-9) rd = std::max(rd, -ya);
    }
    if (rp > rp_cap || rd > rd_cap) return false;
    rp_out = rp;
    rd_out = rd;
    x = xp;
    y = yp;
    z = zclamped;
    return true;
  }
};

inline Solution solve(const Problem& problem, const Settings& settings = {}) {
  return AdmmSolver(settings).solve(problem);
}

}  // namespace tsrecon::qp
