#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "tsrecon/errors.hpp"
#include "tsrecon/model.hpp"
#include "tsrecon/qp.hpp"

namespace tsrecon {

// Linearized network model with derated branch limits. Angles are free
// variables, so the susceptance unit cancels; 1/x is used directly.
struct DCModel {
  std::vector<std::string> bus_ids;
  std::vector<std::string> branch_ids;
  std::vector<int> branch_from;
  std::vector<int> branch_to;
  std::vector<double> susceptance;    // 1/x per branch
  std::vector<double> limit_mw;       // thermal limit after derating
  std::vector<std::string> gen_ids;
  std::vector<int> gen_bus;
  std::vector<double> p_min_mw;
  std::vector<double> p_max_mw;
  std::vector<std::string> load_ids;
  std::vector<int> load_bus;
  std::vector<std::string> load_region;
  std::vector<double> load_nominal_mw;
  int reference_bus = 0;
  double derate = 0.95;

  int buses() const { return static_cast<int>(bus_ids.size()); }
  int branches() const { return static_cast<int>(branch_ids.size()); }
  int gens() const { return static_cast<int>(gen_ids.size()); }
  int loads() const { return static_cast<int>(load_ids.size()); }

  Eigen::VectorXd bus_loads(const Eigen::VectorXd& per_load) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(buses());
    for (int i = 0; i < loads(); ++i) out(load_bus[i]) += per_load(i);
    return out;
  }
};

namespace detail {

inline std::vector<int> bus_component(const std::vector<int>& from, const std::vector<int>& to,
                                      int n_bus) {
  std::vector<std::vector<int>> adj(n_bus);
  for (std::size_t l = 0; l < from.size(); ++l) {
    adj[from[l]].push_back(to[l]);
    adj[to[l]].push_back(from[l]);
  }
  std::vector<int> comp(n_bus, -1);
  int c = 0;
  for (int s = 0; s < n_bus; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack = {s};
    comp[s] = c;
    while (!stack.empty()) {
      int b = stack.back();
      stack.pop_back();
      for (int nb : adj[b])
        if (comp[nb] < 0) {
          comp[nb] = c;
          stack.push_back(nb);
        }
    }
    ++c;
  }
  return comp;
}

}  // namespace detail

inline DCModel build_dc_model(const NetworkSnapshot& s, double derate = 0.95,
                              const std::string& reference_bus = "") {
  if (derate <= 0.0 || derate > 1.0) throw_validation("derate must be in (0, 1]");
  DCModel m;
  m.derate = derate;
  std::map<std::string, int> bus_row;
  for (const Bus& b : s.buses) {
    bus_row[b.id] = static_cast<int>(m.bus_ids.size());
    m.bus_ids.push_back(b.id);
  }
  for (const Branch& br : s.branches) {
    m.branch_ids.push_back(br.id);
    m.branch_from.push_back(bus_row.at(br.from_bus));
    m.branch_to.push_back(bus_row.at(br.to_bus));
    m.susceptance.push_back(1.0 / br.reactance_pu);
    m.limit_mw.push_back(derate * br.thermal_limit_mw);
  }
  for (const Generator& g : s.generators) {
    m.gen_ids.push_back(g.id);
    m.gen_bus.push_back(bus_row.at(g.bus));
    m.p_min_mw.push_back(g.p_min_mw);
    m.p_max_mw.push_back(g.p_max_mw);
  }
  for (const Load& l : s.loads) {
    m.load_ids.push_back(l.id);
    m.load_bus.push_back(bus_row.at(l.bus));
    m.load_region.push_back(s.region_of_bus(l.bus));
    m.load_nominal_mw.push_back(l.nominal_mw);
  }
  auto comp = detail::bus_component(m.branch_from, m.branch_to, m.buses());
  if (*std::max_element(comp.begin(), comp.end()) > 0)
    throw_validation("network is disconnected (" +
                     std::to_string(*std::max_element(comp.begin(), comp.end()) + 1) +
                     " islands); build per-island models instead");
  m.reference_bus = reference_bus.empty() ? 0 : bus_row.at(reference_bus);
  return m;
}

// One model per connected component; empty islands (no loads) are kept so
// every bus lands somewhere.
inline std::vector<DCModel> build_island_models(const NetworkSnapshot& s, double derate = 0.95) {
  DCModel whole;
  whole.derate = derate;
  std::map<std::string, int> bus_row;
  for (const Bus& b : s.buses) {
    bus_row[b.id] = static_cast<int>(whole.bus_ids.size());
    whole.bus_ids.push_back(b.id);
  }
  std::vector<int> from, to;
  for (const Branch& br : s.branches) {
    from.push_back(bus_row.at(br.from_bus));
    to.push_back(bus_row.at(br.to_bus));
  }
  auto comp = detail::bus_component(from, to, static_cast<int>(s.buses.size()));
  int n_comp = *std::max_element(comp.begin(), comp.end()) + 1;

  std::vector<DCModel> out(n_comp);
  std::vector<std::map<std::string, int>> local_row(n_comp);
  for (std::size_t i = 0; i < s.buses.size(); ++i) {
    int c = comp[i];
    local_row[c][s.buses[i].id] = static_cast<int>(out[c].bus_ids.size());
    out[c].bus_ids.push_back(s.buses[i].id);
    out[c].derate = derate;
  }
  for (const Branch& br : s.branches) {
    int c = comp[bus_row.at(br.from_bus)];
    DCModel& m = out[c];
    m.branch_ids.push_back(br.id);
    m.branch_from.push_back(local_row[c].at(br.from_bus));
    m.branch_to.push_back(local_row[c].at(br.to_bus));
    m.susceptance.push_back(1.0 / br.reactance_pu);
    m.limit_mw.push_back(derate * br.thermal_limit_mw);
  }
  for (const Generator& g : s.generators) {
    int c = comp[bus_row.at(g.bus)];
    DCModel& m = out[c];
    m.gen_ids.push_back(g.id);
    m.gen_bus.push_back(local_row[c].at(g.bus));
    m.p_min_mw.push_back(g.p_min_mw);
    m.p_max_mw.push_back(g.p_max_mw);
  }
  for (const Load& l : s.loads) {
    int c = comp[bus_row.at(l.bus)];
    DCModel& m = out[c];
    m.load_ids.push_back(l.id);
    m.load_bus.push_back(local_row[c].at(l.bus));
    m.load_region.push_back(s.region_of_bus(l.bus));
    m.load_nominal_mw.push_back(l.nominal_mw);
  }
  return out;
}

// Dense branch-sensitivity matrix (flow response to bus injections with the
// reference bus absorbing the balance); the checker's second route to flows.
inline Eigen::MatrixXd ptdf_matrix(const DCModel& m) {
  const int nb = m.buses();
  const int nl = m.branches();
  Eigen::MatrixXd laplacian = Eigen::MatrixXd::Zero(nb, nb);
  for (int l = 0; l < nl; ++l) {
    int i = m.branch_from[l], j = m.branch_to[l];
    double b = m.susceptance[l];
    laplacian(i, i) += b;
    laplacian(j, j) += b;
    laplacian(i, j) -= b;
    laplacian(j, i) -= b;
  }
  // delete the reference row/column, invert, pad back with zeros
  std::vector<int> keep;
  for (int i = 0; i < nb; ++i)
    if (i != m.reference_bus) keep.push_back(i);
  Eigen::MatrixXd reduced(nb - 1, nb - 1);
  for (int a = 0; a < nb - 1; ++a)
    for (int b = 0; b < nb - 1; ++b) reduced(a, b) = laplacian(keep[a], keep[b]);
  Eigen::MatrixXd inv = reduced.fullPivLu().inverse();
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(nb, nb);
  for (int a = 0; a < nb - 1; ++a)
    for (int b = 0; b < nb - 1; ++b) padded(keep[a], keep[b]) = inv(a, b);

  Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(nl, nb);
  for (int l = 0; l < nl; ++l) {
    incidence(l, m.branch_from[l]) = m.susceptance[l];
    incidence(l, m.branch_to[l]) = -m.susceptance[l];
  }
  return incidence * padded;
}

struct ConstraintViolation {
  std::string kind;  // "capacity" | "flow"
  std::string id;    // branch id or "total"
  double amount_mw = 0.0;
};

struct FeasibilityResult {
  bool feasible = false;
  Eigen::VectorXd dispatch_mw;  // per generator
  Eigen::VectorXd angle;        // per bus, reference at zero
  Eigen::VectorXd flow_mw;      // per branch
  std::vector<ConstraintViolation> violations;
};

// Decides whether some dispatch within bounds serves the given bus loads
// under the derated flow limits. Capacity is screened analytically; flow
// feasibility is the optimum of a least-squares violation program. The
// witness flows are cross-validated against the sensitivity-matrix route.
inline FeasibilityResult feasibility_check(const DCModel& m, const Eigen::VectorXd& bus_load_mw,
                                           double tol_mw = 1e-6) {
  const int nb = m.buses();
  const int nl = m.branches();
  const int ng = m.gens();
  if (bus_load_mw.size() != nb) throw_validation("bus load vector does not match model");
  auto comp = detail::bus_component(m.branch_from, m.branch_to, nb);
  if (*std::max_element(comp.begin(), comp.end()) > 0)
    throw_validation("feasibility check requires a connected network");

  FeasibilityResult res;
  double total = bus_load_mw.sum();
  double cap_max = 0.0, cap_min = 0.0;
  for (int g = 0; g < ng; ++g) {
    cap_max += m.p_max_mw[g];
    cap_min += m.p_min_mw[g];
  }
  if (total > cap_max + tol_mw) {
    res.violations.push_back({"capacity", "total", total - cap_max});
    return res;
  }
  if (total < cap_min - tol_mw) {
    res.violations.push_back({"capacity", "total", cap_min - total});
    return res;
  }

  // variables: p (ng), theta (nb), v (nl)
  const int n = ng + nb + nl;
  std::vector<Eigen::Triplet<double>> pt, at;
  std::vector<double> lo, hi;
  auto add_row = [&](double l, double u) {
    lo.push_back(l);
    hi.push_back(u);
    return static_cast<int>(lo.size()) - 1;
  };
  const int v0 = ng + nb;
  for (int l = 0; l < nl; ++l) pt.emplace_back(v0 + l, v0 + l, 2.0);

  for (int b = 0; b < nb; ++b) {
    int row = add_row(bus_load_mw(b), bus_load_mw(b));
    for (int g = 0; g < ng; ++g)
      if (m.gen_bus[g] == b) at.emplace_back(row, g, 1.0);
    for (int l = 0; l < nl; ++l) {
      if (m.branch_from[l] == b) {
        at.emplace_back(row, ng + m.branch_from[l], -m.susceptance[l]);
        at.emplace_back(row, ng + m.branch_to[l], m.susceptance[l]);
      } else if (m.branch_to[l] == b) {
        at.emplace_back(row, ng + m.branch_to[l], -m.susceptance[l]);
        at.emplace_back(row, ng + m.branch_from[l], m.susceptance[l]);
      }
    }
  }
  for (int l = 0; l < nl; ++l) {
    int row = add_row(-qp::kInf, m.limit_mw[l]);  // f - v <= limit
    at.emplace_back(row, ng + m.branch_from[l], m.susceptance[l]);
    at.emplace_back(row, ng + m.branch_to[l], -m.susceptance[l]);
    at.emplace_back(row, v0 + l, -1.0);
    row = add_row(-m.limit_mw[l], qp::kInf);  // f + v >= -limit
    at.emplace_back(row, ng + m.branch_from[l], m.susceptance[l]);
    at.emplace_back(row, ng + m.branch_to[l], -m.susceptance[l]);
    at.emplace_back(row, v0 + l, 1.0);
  }
  for (int g = 0; g < ng; ++g) {
    int row = add_row(m.p_min_mw[g], m.p_max_mw[g]);
    at.emplace_back(row, g, 1.0);
  }
  for (int l = 0; l < nl; ++l) {
    int row = add_row(0.0, qp::kInf);
    at.emplace_back(row, v0 + l, 1.0);
  }
  {
    int row = add_row(0.0, 0.0);
    at.emplace_back(row, ng + m.reference_bus, 1.0);
  }

  qp::Problem prob;
  prob.P.resize(n, n);
  prob.P.setFromTriplets(pt.begin(), pt.end());
  prob.q = Eigen::VectorXd::Zero(n);
  prob.A.resize(static_cast<int>(lo.size()), n);
  prob.A.setFromTriplets(at.begin(), at.end());
  prob.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), lo.size());
  prob.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), hi.size());

  qp::Solution sol = qp::solve(prob);
  if (sol.status != qp::Status::solved)
    throw_solver("feasibility check subproblem reported " + qp::to_string(sol.status));

  Eigen::VectorXd violation = sol.x.segment(v0, nl).cwiseMax(0.0);
  if (violation.lpNorm<Eigen::Infinity>() > tol_mw) {
    for (int l = 0; l < nl; ++l)
      if (violation(l) > tol_mw)
        res.violations.push_back({"flow", m.branch_ids[l], violation(l)});
    std::sort(res.violations.begin(), res.violations.end(),
              [](const auto& a, const auto& b) { return a.amount_mw > b.amount_mw; });
    return res;
  }

  res.feasible = true;
  res.dispatch_mw = sol.x.head(ng);
  res.angle = sol.x.segment(ng, nb);
  res.flow_mw.resize(nl);
  for (int l = 0; l < nl; ++l)
    res.flow_mw(l) = m.susceptance[l] * (res.angle(m.branch_from[l]) - res.angle(m.branch_to[l]));

  // second route: flows from injections through the sensitivity matrix
  Eigen::VectorXd injection = -bus_load_mw;
  for (int g = 0; g < ng; ++g) injection(m.gen_bus[g]) += res.dispatch_mw(g);
  Eigen::VectorXd flow_alt = ptdf_matrix(m) * injection;
  double gap = (flow_alt - res.flow_mw).lpNorm<Eigen::Infinity>();
  if (gap > std::max(tol_mw, 1e-9 * res.flow_mw.lpNorm<Eigen::Infinity>()))
    throw_solver("flow cross-validation mismatch of " + std::to_string(gap) + " MW");
  return res;
}

struct RestorationResult {
  Eigen::VectorXd restored_mw;  // per load, model order
  Eigen::VectorXd slack_mw;     // per load
  Eigen::VectorXd delta_mw;     // restored - disaggregated
  double objective = 0.0;       // |delta|_1 + sum of squared slacks
  double l1_change_mw = 0.0;
  double max_change_mw = 0.0;
  std::string status;  // "unchanged" or "solved"
  int qp_iterations = 0;
};

inline qp::Settings restore_solver_settings() {
  qp::Settings s;
  s.eps_abs = 1e-8;
  s.eps_rel = 1e-8;
  return s;
}

// Nearest DC-feasible load: minimizes the absolute change from the
// disaggregated values plus squared slacks on the per-load band spanned by
// the disaggregated and nominal values, while matching regional totals
// exactly and keeping some dispatch within bounds and derated limits.
inline RestorationResult restore(const DCModel& m, const Eigen::VectorXd& disagg_mw,
                                 const Eigen::VectorXd& nominal_mw,
                                 const std::map<std::string, double>& regional_totals_mw,
                                 const qp::Settings& qp_settings = restore_solver_settings()) {
  const int nload = m.loads();
  const int ng = m.gens();
  const int nb = m.buses();
  const int nl = m.branches();
  if (disagg_mw.size() != nload || nominal_mw.size() != nload)
    throw_validation("load vectors do not match model");

  std::vector<std::string> regions;
  for (const auto& [r, v] : regional_totals_mw) regions.push_back(r);
  std::map<std::string, double> region_sum;
  for (int i = 0; i < nload; ++i) region_sum[m.load_region[i]] += disagg_mw(i);
  for (const auto& [r, sum] : region_sum)
    if (!regional_totals_mw.count(r))
      throw_validation("no regional total supplied for region '" + r + "'");

  double total_demand = 0.0;
  for (const auto& [r, v] : regional_totals_mw) total_demand += v;
  double cap_max = 0.0;
  for (int g = 0; g < ng; ++g) cap_max += m.p_max_mw[g];
  if (total_demand > cap_max + 1e-6)
    throw_infeasible("regional totals (" + std::to_string(total_demand) +
                     " MW) exceed deliverable capacity (" + std::to_string(cap_max) + " MW)");

  // fast path: an already feasible, regionally exact input is optimal as-is
  bool sums_match = true;
  for (const auto& [r, sum] : region_sum) {
    double truth = regional_totals_mw.at(r);
    if (std::abs(sum - truth) > 1e-9 * std::max(1.0, std::abs(truth))) sums_match = false;
  }
  if (sums_match) {
    FeasibilityResult f = feasibility_check(m, m.bus_loads(disagg_mw));
    if (f.feasible) {
      RestorationResult out;
      out.restored_mw = disagg_mw;
      out.slack_mw = Eigen::VectorXd::Zero(nload);
      out.delta_mw = Eigen::VectorXd::Zero(nload);
      out.status = "unchanged";
      return out;
    }
  }

  // variables: up (nload), dn (nload), s (nload), p (ng), theta (nb)
  const int i_up = 0, i_dn = nload, i_s = 2 * nload, i_p = 3 * nload, i_th = 3 * nload + ng;
  const int n = 3 * nload + ng + nb;
  std::vector<Eigen::Triplet<double>> pt, at;
  for (int i = 0; i < nload; ++i) pt.emplace_back(i_s + i, i_s + i, 2.0);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < 2 * nload; ++i) q(i) = 1.0;

  std::vector<double> lo, hi;
  std::vector<std::string> label;
  auto add_row = [&](double l, double u, const std::string& name) {
    lo.push_back(l);
    hi.push_back(u);
    label.push_back(name);
    return static_cast<int>(lo.size()) - 1;
  };

  for (int b = 0; b < nb; ++b) {
    double fixed = 0.0;
    for (int i = 0; i < nload; ++i)
      if (m.load_bus[i] == b) fixed += disagg_mw(i);
    int row = add_row(fixed, fixed, "balance@" + m.bus_ids[b]);
    for (int g = 0; g < ng; ++g)
      if (m.gen_bus[g] == b) at.emplace_back(row, i_p + g, 1.0);
    for (int i = 0; i < nload; ++i)
      if (m.load_bus[i] == b) {
        at.emplace_back(row, i_up + i, -1.0);
        at.emplace_back(row, i_dn + i, 1.0);
      }
    for (int l = 0; l < nl; ++l) {
      if (m.branch_from[l] == b) {
        at.emplace_back(row, i_th + m.branch_from[l], -m.susceptance[l]);
        at.emplace_back(row, i_th + m.branch_to[l], m.susceptance[l]);
      } else if (m.branch_to[l] == b) {
        at.emplace_back(row, i_th + m.branch_to[l], -m.susceptance[l]);
        at.emplace_back(row, i_th + m.branch_from[l], m.susceptance[l]);
      }
    }
  }
  for (int l = 0; l < nl; ++l) {
    int row = add_row(-m.limit_mw[l], m.limit_mw[l], "flow@" + m.branch_ids[l]);
    at.emplace_back(row, i_th + m.branch_from[l], m.susceptance[l]);
    at.emplace_back(row, i_th + m.branch_to[l], -m.susceptance[l]);
  }
  for (const std::string& r : regions) {
    double rhs = regional_totals_mw.at(r) - (region_sum.count(r) ? region_sum.at(r) : 0.0);
    bool has_member = false;
    int row = add_row(rhs, rhs, "regional@" + r);
    for (int i = 0; i < nload; ++i)
      if (m.load_region[i] == r) {
        at.emplace_back(row, i_up + i, 1.0);
        at.emplace_back(row, i_dn + i, -1.0);
        has_member = true;
      }
    if (!has_member && std::abs(rhs) > 1e-9)
      throw_infeasible("regional total for '" + r + "' has no loads to carry it");
  }
  for (int i = 0; i < nload; ++i) {
    double hi_band = std::max(disagg_mw(i), nominal_mw(i)) - disagg_mw(i);
    double lo_band = std::min(disagg_mw(i), nominal_mw(i)) - disagg_mw(i);
    int row = add_row(-qp::kInf, hi_band, "band-upper@" + m.load_ids[i]);
    at.emplace_back(row, i_up + i, 1.0);
    at.emplace_back(row, i_dn + i, -1.0);
    at.emplace_back(row, i_s + i, -1.0);
    row = add_row(lo_band, qp::kInf, "band-lower@" + m.load_ids[i]);
    at.emplace_back(row, i_up + i, 1.0);
    at.emplace_back(row, i_dn + i, -1.0);
    at.emplace_back(row, i_s + i, 1.0);
    row = add_row(-disagg_mw(i), qp::kInf, "nonnegative@" + m.load_ids[i]);
    at.emplace_back(row, i_up + i, 1.0);
    at.emplace_back(row, i_dn + i, -1.0);
  }
  for (int i = 0; i < 3 * nload; ++i) {
    int row = add_row(0.0, qp::kInf, "var-bound");
    at.emplace_back(row, i, 1.0);
  }
  for (int g = 0; g < ng; ++g) {
    int row = add_row(m.p_min_mw[g], m.p_max_mw[g], "dispatch@" + m.gen_ids[g]);
    at.emplace_back(row, i_p + g, 1.0);
  }
  {
    int row = add_row(0.0, 0.0, "reference-angle");
    at.emplace_back(row, i_th + m.reference_bus, 1.0);
  }

  qp::Problem prob;
  prob.P.resize(n, n);
  prob.P.setFromTriplets(pt.begin(), pt.end());
  prob.q = q;
  prob.A.resize(static_cast<int>(lo.size()), n);
  prob.A.setFromTriplets(at.begin(), at.end());
  prob.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), lo.size());
  prob.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), hi.size());

  qp::Solution sol = qp::solve(prob, qp_settings);
  if (sol.status == qp::Status::primal_infeasible) {
    std::string worst;
    double worst_val = 0.0;
    for (int i = 0; i < sol.certificate.size(); ++i)
      if (std::abs(sol.certificate(i)) > worst_val) {
        worst_val = std::abs(sol.certificate(i));
        worst = label[i];
      }
    throw_infeasible("restoration proven infeasible (certificate peaks at " + worst + ")");
  }
  if (sol.status == qp::Status::max_iterations)
    throw_solver("restoration hit the iteration limit (residuals " +
                 std::to_string(sol.primal_residual) + ", " + std::to_string(sol.dual_residual) +
                 ")");
  if (sol.status != qp::Status::solved)
    throw_solver("restoration reported " + qp::to_string(sol.status));

  RestorationResult out;
  out.restored_mw.resize(nload);
  out.slack_mw = sol.x.segment(i_s, nload).cwiseMax(0.0);
  for (int i = 0; i < nload; ++i) {
    double v = disagg_mw(i) + sol.x(i_up + i) - sol.x(i_dn + i);
    out.restored_mw(i) = std::max(0.0, v);
  }
  out.delta_mw = out.restored_mw - disagg_mw;
  out.l1_change_mw = out.delta_mw.lpNorm<1>();
  out.max_change_mw = out.delta_mw.size() ? out.delta_mw.lpNorm<Eigen::Infinity>() : 0.0;
  out.objective = out.l1_change_mw + out.slack_mw.squaredNorm();
  out.status = "solved";
  out.qp_iterations = sol.iterations;
  return out;
}

struct PeriodReport {
  int period = 0;
  double objective = 0.0;
  double l1_change_mw = 0.0;
  double max_single_change_mw = 0.0;
  std::string status;
};

struct HorizonResult {
  ComponentSeries restored;
  std::vector<PeriodReport> reports;
};

// Independent per-period restorations over a work pool; results land in
// period order regardless of the parallelism degree.
inline HorizonResult restore_horizon(const std::function<const DCModel&(int)>& model_for_period,
                                     const ComponentSeries& series, const RegionalSeries& totals,
                                     int parallelism = 1) {
  const int T = series.period_count();
  if (totals.period_count() != T)
    throw_validation("regional totals and component series disagree on period count");
  if (totals.period_minutes != series.period_minutes)
    throw_validation("regional totals and component series disagree on granularity");

  HorizonResult result;
  result.restored = series;
  result.restored.lineage = Lineage::restored;
  result.reports.resize(T);

  // map series rows onto model load order once, using period 0's model
  const DCModel& m0 = model_for_period(0);
  std::map<std::string, int> series_row;
  for (int i = 0; i < series.component_count(); ++i) series_row[series.component_ids[i]] = i;
  std::vector<int> row_of_load(m0.loads());
  for (int i = 0; i < m0.loads(); ++i) {
    auto it = series_row.find(m0.load_ids[i]);
    if (it == series_row.end())
      throw_validation("model load '" + m0.load_ids[i] + "' missing from the component series");
    row_of_load[i] = it->second;
  }

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    while (true) {
      int t = next.fetch_add(1);
      if (t >= T || failed.load()) return;
      try {
        const DCModel& m = model_for_period(t);
        Eigen::VectorXd disagg(m.loads()), nominal(m.loads());
        for (int i = 0; i < m.loads(); ++i) {
          disagg(i) = series.values_mw(row_of_load[i], t);
          nominal(i) = m.load_nominal_mw[i];
        }
        std::map<std::string, double> region_totals;
        for (int r = 0; r < totals.region_count(); ++r)
          region_totals[totals.region_ids[r]] = totals.values_mw(r, t);
        RestorationResult res = restore(m, disagg, nominal, region_totals);
        for (int i = 0; i < m.loads(); ++i)
          result.restored.values_mw(row_of_load[i], t) = res.restored_mw(i);
        result.reports[t] = {t, res.objective, res.l1_change_mw, res.max_change_mw, res.status};
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = "period " + std::to_string(t) + ": " + ex.what();
      }
    }
  };

  int threads = std::max(1, parallelism);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw_infeasible(first_error);
  return result;
}

// Per-island restoration: each region's total is apportioned to islands by
// their share of the disaggregated values, then islands restore separately.
inline std::map<std::string, double> restore_partitioned(
    const std::vector<DCModel>& islands, const std::map<std::string, double>& disagg_by_id,
    const std::map<std::string, double>& nominal_by_id,
    const std::map<std::string, double>& regional_totals_mw) {
  std::map<std::string, double> region_grand;
  for (const DCModel& m : islands)
    for (int i = 0; i < m.loads(); ++i)
      region_grand[m.load_region[i]] += disagg_by_id.at(m.load_ids[i]);

  std::map<std::string, double> restored;
  for (const DCModel& m : islands) {
    if (m.loads() == 0) continue;
    Eigen::VectorXd disagg(m.loads()), nominal(m.loads());
    std::map<std::string, double> island_region_sum;
    for (int i = 0; i < m.loads(); ++i) {
      disagg(i) = disagg_by_id.at(m.load_ids[i]);
      nominal(i) = nominal_by_id.at(m.load_ids[i]);
      island_region_sum[m.load_region[i]] += disagg(i);
    }
    std::map<std::string, double> island_totals;
    for (const auto& [r, sum] : island_region_sum) {
      double grand = region_grand.at(r);
      double share = grand > 0 ? sum / grand : 0.0;
      island_totals[r] = regional_totals_mw.at(r) * share;
    }
    RestorationResult res = restore(m, disagg, nominal, island_totals);
    for (int i = 0; i < m.loads(); ++i) restored[m.load_ids[i]] = res.restored_mw(i);
  }
  return restored;
}

}  // namespace tsrecon
