#pragma once

// Investment-versus-market bilevel program and its decomposition. The model
// is carried in a compact block form
//
//   min f'x + sum_t N_t g_t' y_t
//   s.t. A x <= b,  and per scenario t:
//        (y_t, z_t) minimize w_t' y_t  s.t.  E y_t = h_t,
//                                            P y_t + Q z_t <= r_t - K x
//
// solved by column-and-constraint generation: a master problem over x plus
// duplicated scenario blocks and pooled primal-dual cuts, and two subproblem
// sweeps per iteration (scenario cost at fixed x, then the optimistic
// re-solve bounded by that cost). Dual variables of the cuts live inside the
// master; the bilinear product of x with the dual of the device rows is
// linearized exactly through bounded auxiliary variables since x is binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "facts/common.hpp"
#include "facts/devices.hpp"
#include "facts/market.hpp"
#include "facts/scenarios.hpp"

namespace facts {

struct BilevelOptions {
  int n_vsr_max = 2;            // reactor budget
  int n_pst_max = 2;            // shifter budget
  double spill_cost = 50.0;     // $/MWh on curtailed wind (upper level)
  double shed_cost = 5000.0;    // $/MWh on unserved load (both levels)
  double m_lambda = 1e5;        // dual bound for cut linearization
  double epsilon = 1e-3;        // relative UB-LB stopping gap
  int max_iter = 50;
  double mp_time_limit_s = 10800.0;
  std::vector<int> monitor_lines;  // empty: every line constrained
  std::map<int, double> wind_scale;
  const PtdfMatrix* ptdf = nullptr;  // optional precomputed factors

  void check() const {
    if (epsilon < 1e-6) throw ConfigError("stopping gap below 1e-6 is not supported");
    if (n_vsr_max < 0 || n_pst_max < 0) throw ConfigError("device budgets must be nonnegative");
    if (m_lambda <= 0) throw ConfigError("dual bound must be positive");
    if (max_iter < 1) throw ConfigError("need at least one iteration");
  }
};

using SparseCol = std::vector<std::pair<int, double>>;  // (column, coefficient)

// One scenario's lower level in block-matrix form, plus index maps back to
// the named quantities used for reporting.
struct CompactScenario {
  int id = 0;
  double hours = 0;
  int n_y = 0, n_z = 0;
  std::vector<std::string> y_names, z_names;
  std::vector<double> w;  // lower-level cost on y
  std::vector<double> g;  // upper-level cost on y (per hour)
  // equalities E y = h
  std::vector<SparseCol> E;
  std::vector<double> h;
  std::vector<std::string> eq_tags;
  // inequalities P y + Q z + K x <= r
  std::vector<SparseCol> P, Q, K;
  std::vector<double> r;
  std::vector<std::string> le_tags;
  // reporting maps (y columns)
  std::vector<int> gen_cols, wind_cols, spill_cols, shed_cols;
  std::vector<int> vsr_psi_cols, vsr_v_cols, pst_psi_cols;
  std::vector<int> vsr_u_zcols;  // -1 when the selector is folded away
  double total_load_mw = 0;
  std::vector<double> wind_avail_mw;
};

struct CompactForm {
  const NetworkCase* net = nullptr;
  DeviceCatalog catalog;
  std::vector<std::string> x_names;
  std::vector<double> f;  // annualized investment cost per x column
  // upper-level rows A x <= b (budgets and exclusivity)
  std::vector<SparseCol> A;
  std::vector<double> b;
  std::vector<std::string> a_tags;
  std::vector<CompactScenario> scen;

  int n_x() const { return int(x_names.size()); }
  bool x_feasible(const std::vector<int>& x) const {
    for (size_t i = 0; i < A.size(); ++i) {
      double lhs = 0;
      for (const auto& [j, c] : A[i]) lhs += c * x[j];
      if (lhs > b[i] + 1e-9) return false;
    }
    return true;
  }
};

// Flattens one build_lower_level model into block matrices. Continuous
// variables become y columns, binaries z columns; equality rows must touch
// neither binaries nor investment parameters.
inline CompactForm assemble_compact(const NetworkCase& c, const ScenarioSet& set,
                                    const DeviceCatalog& cat, const BilevelOptions& opt = {}) {
  opt.check();
  CompactForm cf;
  cf.net = &c;
  cf.catalog = cat;
  for (const auto& v : cat.vsr) {
    cf.x_names.push_back("delta_" + std::to_string(v.branch_id));
    cf.f.push_back(v.annual_cost);
  }
  for (const auto& p : cat.pst) {
    cf.x_names.push_back("alpha_" + std::to_string(p.branch_id));
    cf.f.push_back(p.annual_cost);
  }

  // budgets and exclusivity on shared candidate branches
  SparseCol vsr_sum, pst_sum;
  for (size_t i = 0; i < cat.vsr.size(); ++i) vsr_sum.push_back({int(i), 1.0});
  for (size_t i = 0; i < cat.pst.size(); ++i)
    pst_sum.push_back({int(cat.vsr.size() + i), 1.0});
  cf.A.push_back(vsr_sum);
  cf.b.push_back(double(opt.n_vsr_max));
  cf.a_tags.push_back("eq12b");
  cf.A.push_back(pst_sum);
  cf.b.push_back(double(opt.n_pst_max));
  cf.a_tags.push_back("eq12c");
  for (size_t i = 0; i < cat.vsr.size(); ++i)
    for (size_t j = 0; j < cat.pst.size(); ++j)
      if (cat.vsr[i].branch_id == cat.pst[j].branch_id) {
        cf.A.push_back({{int(i), 1.0}, {int(cat.vsr.size() + j), 1.0}});
        cf.b.push_back(1.0);
        cf.a_tags.push_back("eq12d_" + std::to_string(cat.vsr[i].branch_id));
      }

  for (const auto& s : set.scenarios) {
    MarketOptions mo;
    mo.formulation = Formulation::ShiftFactor;
    mo.shed_cost = opt.shed_cost;
    mo.wind_scale = opt.wind_scale;
    mo.monitor_lines = opt.monitor_lines;
    mo.ptdf = opt.ptdf;
    auto mm = build_lower_level(c, s, cat, mo);
    const Model& m = mm.model;
    if (m.n_params() != cf.n_x())
      throw Error("compact assembly: parameter count mismatch for scenario " +
                  std::to_string(s.id));
    for (int j = 0; j < m.n_params(); ++j)
      if (m.param(j) != cf.x_names[j])
        throw Error("compact assembly: investment column order drifted at '" + m.param(j) +
                    "'");

    CompactScenario cs;
    cs.id = s.id;
    cs.hours = s.hours;
    std::vector<int> col_of(m.n_vars(), -1);
    for (int j = 0; j < m.n_vars(); ++j) {
      const auto& vi = m.var(j);
      if (vi.kind == VarKind::Binary) {
        col_of[j] = cs.n_z++;
        cs.z_names.push_back(vi.name);
        if (m.objective_coef(j) != 0.0)
          throw Error("compact assembly: binary '" + vi.name + "' carries lower-level cost");
      } else {
        col_of[j] = cs.n_y++;
        cs.y_names.push_back(vi.name);
      }
    }
    cs.w.assign(cs.n_y, 0.0);
    cs.g.assign(cs.n_y, 0.0);
    for (int j = 0; j < m.n_vars(); ++j)
      if (m.var(j).kind == VarKind::Continuous) cs.w[col_of[j]] = m.objective_coef(j);
    for (const auto& r : m.rows()) {
      if (r.sense == RowSense::EQ) {
        SparseCol e;
        for (const auto& t : r.terms) {
          if (m.var(t.id).kind == VarKind::Binary)
            throw Error("compact assembly: equality row '" + r.tag + "' touches a binary");
          e.push_back({col_of[t.id], t.coef});
        }
        if (!r.x_terms.empty())
          throw Error("compact assembly: equality row '" + r.tag + "' touches x");
        cs.E.push_back(std::move(e));
        cs.h.push_back(r.rhs);
        cs.eq_tags.push_back(r.tag);
      } else if (r.sense == RowSense::LE) {
        SparseCol p, q, k;
        for (const auto& t : r.terms) {
          if (m.var(t.id).kind == VarKind::Binary)
            q.push_back({col_of[t.id], t.coef});
          else
            p.push_back({col_of[t.id], t.coef});
        }
        for (const auto& t : r.x_terms) k.push_back({t.id, t.coef});
        cs.P.push_back(std::move(p));
        cs.Q.push_back(std::move(q));
        cs.K.push_back(std::move(k));
        cs.r.push_back(r.rhs);
        cs.le_tags.push_back(r.tag);
      } else {
        throw Error("compact assembly: unexpected row sense in '" + r.tag + "'");
      }
    }
    for (int id : mm.gen_p) cs.gen_cols.push_back(col_of[id]);
    for (int id : mm.wind_g) cs.wind_cols.push_back(col_of[id]);
    for (int id : mm.wind_sp) cs.spill_cols.push_back(col_of[id]);
    for (int id : mm.shed) cs.shed_cols.push_back(col_of[id]);
    for (const auto& bv : mm.vsr_vars) {
      cs.vsr_psi_cols.push_back(col_of[bv.psi]);
      cs.vsr_v_cols.push_back(col_of[bv.v]);
      cs.vsr_u_zcols.push_back(bv.u >= 0 ? col_of[bv.u] : -1);
    }
    for (int id : mm.pst_psi) cs.pst_psi_cols.push_back(col_of[id]);
    for (int col : cs.spill_cols) cs.g[col] = opt.spill_cost;
    for (int col : cs.shed_cols) cs.g[col] = opt.shed_cost;
    for (double d : mm.load_mw) cs.total_load_mw += d;
    cs.wind_avail_mw = mm.wind_avail_mw;
    cf.scen.push_back(std::move(cs));
  }
  return cf;
}

namespace detail {

inline double kx_shift(const CompactScenario& cs, int row, const std::vector<int>& x) {
  double acc = 0;
  for (const auto& [j, c] : cs.K[row]) acc += c * x[j];
  return acc;
}

// Lower-level MILP of one scenario at fixed investments.
inline Model scenario_model(const CompactScenario& cs, const std::vector<int>& x,
                            const char* name) {
  Model m(name);
  std::vector<int> y(cs.n_y), z(cs.n_z);
  for (int j = 0; j < cs.n_y; ++j) y[j] = m.add_continuous(cs.y_names[j], -kInf, kInf);
  for (int j = 0; j < cs.n_z; ++j) z[j] = m.add_binary(cs.z_names[j]);
  LinExpr obj;
  for (int j = 0; j < cs.n_y; ++j)
    if (cs.w[j] != 0.0) obj.add(y[j], cs.w[j]);
  m.set_objective(obj);
  for (size_t i = 0; i < cs.E.size(); ++i) {
    LinExpr e;
    for (const auto& [j, c] : cs.E[i]) e.add(y[j], c);
    m.add_row(cs.eq_tags[i], e, RowSense::EQ, cs.h[i]);
  }
  for (size_t i = 0; i < cs.P.size(); ++i) {
    LinExpr e;
    for (const auto& [j, c] : cs.P[i]) e.add(y[j], c);
    for (const auto& [j, c] : cs.Q[i]) e.add(z[j], c);
    m.add_row(cs.le_tags[i], e, RowSense::LE, cs.r[i] - kx_shift(cs, int(i), x));
  }
  return m;
}

}  // namespace detail

struct ScenarioSolution {
  double w_cost = 0;  // lower-level objective
  double g_cost = 0;  // upper-level per-hour cost
  std::vector<double> y;
  std::vector<double> z;
};

// Scenario cost at fixed x: the market's own problem, solved to optimality.
inline double solve_sp1(const CompactForm& cf, int t, const std::vector<int>& x,
                        const SolveOptions& so = {}) {
  auto m = detail::scenario_model(cf.scen[t], x, "sp1");
  auto res = m.solve(so);
  if (res.status != SolveStatus::Optimal)
    throw SolveError("scenario subproblem ended " + std::string(status_name(res.status)) +
                     "; model written to " + m.dump_to_temp());
  return res.objective;
}

// Optimistic re-solve: cheapest upper-level outcome among the dispatches the
// market itself would accept at fixed x.
inline ScenarioSolution solve_sp2(const CompactForm& cf, int t, const std::vector<int>& x,
                                  double phi_t, const SolveOptions& so = {}) {
  const CompactScenario& cs = cf.scen[t];
  auto build = [&](double bound) {
    Model m = detail::scenario_model(cs, x, "sp2");
    LinExpr wrow;
    for (int j = 0; j < cs.n_y; ++j)
      if (cs.w[j] != 0.0) wrow.add(j, cs.w[j]);
    m.add_row("eq18b", wrow, RowSense::LE, bound);
    LinExpr obj;
    for (int j = 0; j < cs.n_y; ++j)
      if (cs.g[j] != 0.0) obj.add(j, cs.g[j]);
    m.set_objective(obj);
    return m;
  };
  Model m = build(phi_t);
  auto res = m.solve(so);
  if (res.status != SolveStatus::Optimal) {
    // the equal-cost bound can be a hair too tight in floating point
    m = build(phi_t * (1.0 + 1e-9) + 1e-9);
    res = m.solve(so);
    if (res.status != SolveStatus::Optimal)
      throw SolveError("optimistic re-solve ended " + std::string(status_name(res.status)) +
                       "; model written to " + m.dump_to_temp());
  }
  ScenarioSolution sol;
  sol.g_cost = res.objective;
  sol.y.assign(res.var_values.begin(), res.var_values.begin() + cs.n_y);
  sol.z.assign(res.var_values.begin() + cs.n_y, res.var_values.end());
  for (auto& zv : sol.z) zv = zv > 0.5 ? 1.0 : 0.0;
  for (int j = 0; j < cs.n_y; ++j) sol.w_cost += cs.w[j] * sol.y[j];
  return sol;
}

struct IterationRecord {
  int q = 0;
  double mp_value = 0;  // master optimum (raw)
  double lb = 0, ub = 0, gap = 0;
  double mp_seconds = 0, sp_seconds = 0;
  bool new_point = true;  // (x*, z*) unseen so far
};

struct CcgState {
  int q = 0;
  double lb = -kInf, ub = kInf;
  std::vector<int> x_best;
  std::vector<ScenarioSolution> best_sols;  // per scenario, at x_best
  // cut pool: pool[l][t] = binary realization of scenario t added at cut l
  std::vector<std::vector<std::vector<double>>> pool;
  std::vector<IterationRecord> log;
  std::string status = "running";
  double worst_lambda_frac = 0;  // max lambda / M over all master solves
  std::vector<std::string> warnings;
};

namespace detail {

struct MasterLayout {
  std::vector<int> x_ids;
  std::vector<std::vector<int>> y_ids, z_ids;       // [t]
  std::vector<std::vector<std::vector<int>>> lam;   // [l][t] -> lambda ids
};

// Master problem: investment plus duplicated scenario blocks, plus one
// primal-dual cut block per pooled realization.
inline Model build_master(const CompactForm& cf,
                          const std::vector<std::vector<std::vector<double>>>& pool,
                          const BilevelOptions& opt, MasterLayout& lay) {
  Model m("master");
  lay = MasterLayout{};
  LinExpr obj;
  for (int j = 0; j < cf.n_x(); ++j) {
    lay.x_ids.push_back(m.add_binary(cf.x_names[j]));
    if (cf.f[j] != 0.0) obj.add(lay.x_ids[j], cf.f[j]);
  }
  for (size_t i = 0; i < cf.A.size(); ++i) {
    LinExpr e;
    for (const auto& [j, c] : cf.A[i]) e.add(lay.x_ids[j], c);
    m.add_row(cf.a_tags[i], e, RowSense::LE, cf.b[i]);
  }
  for (size_t t = 0; t < cf.scen.size(); ++t) {
    const CompactScenario& cs = cf.scen[t];
    const std::string st = "t" + std::to_string(cs.id);
    std::vector<int> y(cs.n_y), z(cs.n_z);
    for (int j = 0; j < cs.n_y; ++j)
      y[j] = m.add_continuous(st + "_" + cs.y_names[j], -kInf, kInf);
    for (int j = 0; j < cs.n_z; ++j) z[j] = m.add_binary(st + "_" + cs.z_names[j]);
    lay.y_ids.push_back(y);
    lay.z_ids.push_back(z);
    for (int j = 0; j < cs.n_y; ++j)
      if (cs.g[j] != 0.0) obj.add(y[j], cs.hours * cs.g[j]);
    for (size_t i = 0; i < cs.E.size(); ++i) {
      LinExpr e;
      for (const auto& [j, c] : cs.E[i]) e.add(y[j], c);
      m.add_row(st + "_" + cs.eq_tags[i], e, RowSense::EQ, cs.h[i]);
    }
    for (size_t i = 0; i < cs.P.size(); ++i) {
      LinExpr e;
      for (const auto& [j, c] : cs.P[i]) e.add(y[j], c);
      for (const auto& [j, c] : cs.Q[i]) e.add(z[j], c);
      for (const auto& [j, c] : cs.K[i]) e.add(lay.x_ids[j], c);
      m.add_row(st + "_" + cs.le_tags[i], e, RowSense::LE, cs.r[i]);
    }
  }
  m.set_objective(obj);

  // pooled cuts: dual columns, stationarity, value row, product boxes
  const double M = opt.m_lambda;
  for (size_t l = 0; l < pool.size(); ++l) {
    lay.lam.emplace_back();
    for (size_t t = 0; t < cf.scen.size(); ++t) {
      const CompactScenario& cs = cf.scen[t];
      const std::vector<double>& zl = pool[l][t];
      const std::string pre = "t" + std::to_string(cs.id) + "_l" + std::to_string(l + 1);
      std::vector<int> lam(cs.P.size()), mu(cs.E.size());
      for (size_t i = 0; i < cs.P.size(); ++i)
        lam[i] = m.add_continuous(pre + "_lam" + std::to_string(i), 0.0, M);
      for (size_t i = 0; i < cs.E.size(); ++i)
        mu[i] = m.add_continuous(pre + "_mu" + std::to_string(i), -kInf, kInf);
      lay.lam.back().push_back(lam);

      // stationarity per y column: P'lam + E'mu = -w
      std::vector<LinExpr> stat(cs.n_y);
      for (size_t i = 0; i < cs.P.size(); ++i)
        for (const auto& [j, c] : cs.P[i]) stat[j].add(lam[i], c);
      for (size_t i = 0; i < cs.E.size(); ++i)
        for (const auto& [j, c] : cs.E[i]) stat[j].add(mu[i], c);
      for (int j = 0; j < cs.n_y; ++j)
        m.add_row("eq19b_" + pre + "_y" + std::to_string(j), stat[j], RowSense::EQ, -cs.w[j]);

      // value row: w'y~ <= (z'Q' - r')lam - h'mu + x'K'lam, with each
      // x_j*lam_i pinned to an auxiliary column by its box rows
      LinExpr cut;
      for (int j = 0; j < cs.n_y; ++j)
        if (cs.w[j] != 0.0) cut.add(lay.y_ids[t][j], cs.w[j]);
      for (size_t i = 0; i < cs.P.size(); ++i) {
        double qz = 0;
        for (const auto& [j, c] : cs.Q[i]) qz += c * zl[j];
        const double coef = qz - cs.r[i];
        if (coef != 0.0) cut.add(lam[i], -coef);
      }
      for (size_t i = 0; i < cs.E.size(); ++i)
        if (cs.h[i] != 0.0) cut.add(mu[i], cs.h[i]);
      for (size_t i = 0; i < cs.P.size(); ++i) {
        for (const auto& [j, kc] : cs.K[i]) {
          const std::string wn = pre + "_w" + std::to_string(i) + "x" + std::to_string(j);
          const int wv = m.add_continuous(wn, 0.0, M);
          LinExpr cap, below, above;
          cap.add(wv, 1.0);
          cap.add(lay.x_ids[j], -M);
          m.add_row(wn + "_cap", cap, RowSense::LE, 0.0);
          below.add(wv, 1.0);
          below.add(lam[i], -1.0);
          m.add_row(wn + "_le", below, RowSense::LE, 0.0);
          above.add(lam[i], 1.0);
          above.add(wv, -1.0);
          above.add(lay.x_ids[j], M);
          m.add_row(wn + "_lb", above, RowSense::LE, M);
          cut.add(wv, -kc);
        }
      }
      m.add_row("eq19a_" + pre, cut, RowSense::LE, 0.0);
    }
  }
  return m;
}

}  // namespace detail

struct MasterResult {
  std::vector<int> x;
  double value = 0;       // optimal master objective
  double best_bound = 0;  // proven bound (== value when solved to optimality)
  double max_lambda = 0;
  bool timed_out = false;
  double seconds = 0;
};

inline MasterResult solve_master(const CompactForm& cf,
                                 const std::vector<std::vector<std::vector<double>>>& pool,
                                 const BilevelOptions& opt) {
  detail::MasterLayout lay;
  Model m = detail::build_master(cf, pool, opt, lay);
  SolveOptions so;
  so.time_limit_s = opt.mp_time_limit_s;
  auto res = m.solve(so);
  if (res.status != SolveStatus::Optimal && res.status != SolveStatus::TimeLimit)
    throw SolveError("master problem ended " + std::string(status_name(res.status)) +
                     "; model written to " + m.dump_to_temp());
  MasterResult out;
  out.timed_out = res.status == SolveStatus::TimeLimit;
  out.value = res.objective;
  out.best_bound = res.best_bound;
  out.seconds = res.wall_seconds;
  for (int id : lay.x_ids) out.x.push_back(res.var_values[id] > 0.5 ? 1 : 0);
  for (const auto& per_t : lay.lam)
    for (const auto& lam : per_t)
      for (int id : lam) out.max_lambda = std::max(out.max_lambda, res.var_values[id]);

  // The cut blocks pin the duals to the follower's optimal face, which can be
  // unbounded under degeneracy; the solver may then park lambda at its box cap
  // even though an equivalent interior dual point exists. Re-solve with the
  // plan fixed and the objective anchored, minimizing the lambda mass, so the
  // cap audit only fires when every optimal dual point needs the cap.
  if (!out.timed_out && !lay.lam.empty() && out.max_lambda > 0.5 * opt.m_lambda) {
    Model polish = m;
    for (size_t j = 0; j < lay.x_ids.size(); ++j) polish.fix_var(lay.x_ids[j], out.x[j]);
    LinExpr anchor, lam_mass;
    for (int id = 0; id < polish.n_vars(); ++id) {
      const double c = polish.objective_coef(id);
      if (c != 0.0) anchor.add(id, c);
    }
    polish.add_row("mp_value_anchor", anchor, RowSense::LE,
                   res.objective - polish.objective_constant() +
                       1e-7 * std::max(1.0, std::abs(res.objective)));
    for (const auto& per_t : lay.lam)
      for (const auto& lam : per_t)
        for (int id : lam) lam_mass.add(id, 1.0);
    polish.set_objective(lam_mass);
    auto alt = polish.solve(so);
    if (alt.status == SolveStatus::Optimal) {
      double worst = 0;
      for (const auto& per_t : lay.lam)
        for (const auto& lam : per_t)
          for (int id : lam) worst = std::max(worst, alt.var_values[id]);
      out.max_lambda = worst;
    }
  }
  return out;
}

struct PlanReport {
  std::vector<int> x;
  std::map<int, int> vsr_build, pst_build;  // branch -> chosen
  double invest_vsr = 0, invest_pst = 0;    // annualized $
  double operating_cost = 0;                // spill/shed penalty $
  double objective = 0;                     // investment + penalty $
  std::map<int, double> farm_curtailment_mwh;
  double total_curtailment_mwh = 0;
  double total_shed_mwh = 0;
  double annual_load_mwh = 0, annual_wind_mwh = 0;
  double wind_penetration = 0;  // dispatched wind over load energy
  int iterations = 0;
  double gap = 0;
  std::string status = "ok";
  double mp_seconds = 0, sp_seconds = 0, wall_seconds = 0;
};

// Evaluates a fixed plan through SP1 + SP2 sweeps: the exact objective the
// bilevel program assigns to x, plus all reporting quantities.
inline PlanReport evaluate_plan(const CompactForm& cf, const std::vector<int>& x,
                                std::vector<ScenarioSolution>* keep = nullptr) {
  if (int(x.size()) != cf.n_x()) throw Error("plan vector length mismatch");
  PlanReport rep;
  rep.x = x;
  for (size_t j = 0; j < cf.catalog.vsr.size(); ++j) {
    rep.vsr_build[cf.catalog.vsr[j].branch_id] = x[j];
    if (x[j]) rep.invest_vsr += cf.catalog.vsr[j].annual_cost;
  }
  for (size_t j = 0; j < cf.catalog.pst.size(); ++j) {
    rep.pst_build[cf.catalog.pst[j].branch_id] = x[cf.catalog.vsr.size() + j];
    if (x[cf.catalog.vsr.size() + j]) rep.invest_pst += cf.catalog.pst[j].annual_cost;
  }
  for (size_t t = 0; t < cf.scen.size(); ++t) {
    const CompactScenario& cs = cf.scen[t];
    const double phi = solve_sp1(cf, int(t), x);
    auto sol = solve_sp2(cf, int(t), x, phi);
    rep.operating_cost += cs.hours * sol.g_cost;
    for (size_t wcol = 0; wcol < cs.spill_cols.size(); ++wcol) {
      const double mwh = cs.hours * std::max(0.0, sol.y[cs.spill_cols[wcol]]);
      rep.farm_curtailment_mwh[cf.net->wind_farms[wcol].id] += mwh;
      rep.total_curtailment_mwh += mwh;
    }
    for (int col : cs.shed_cols) rep.total_shed_mwh += cs.hours * std::max(0.0, sol.y[col]);
    for (int col : cs.wind_cols) rep.annual_wind_mwh += cs.hours * std::max(0.0, sol.y[col]);
    rep.annual_load_mwh += cs.hours * cs.total_load_mw;
    if (keep) keep->push_back(std::move(sol));
  }
  rep.objective = rep.invest_vsr + rep.invest_pst + rep.operating_cost;
  rep.wind_penetration =
      rep.annual_load_mwh > 0 ? rep.annual_wind_mwh / rep.annual_load_mwh : 0.0;
  return rep;
}

// Terminal big-M audit: reactor operating points must stay inside their
// compensation interval, tracking and product variables must not lean on
// their artificial bounds, and no cut dual may sit at the linearization cap.
inline std::vector<std::string> audit_big_m(const CompactForm& cf, const std::vector<int>& x,
                                            const std::vector<ScenarioSolution>& sols,
                                            double max_lambda, double m_lambda) {
  std::vector<std::string> warn;
  if (max_lambda >= m_lambda * (1.0 - 1e-6))
    warn.push_back("dual bound active at " + fmt_g(max_lambda) +
                   " - increase the dual cap");
  for (size_t t = 0; t < cf.scen.size(); ++t) {
    const CompactScenario& cs = cf.scen[t];
    for (size_t k = 0; k < cf.catalog.vsr.size(); ++k) {
      const auto& cand = cf.catalog.vsr[k];
      const double psi = sols[t].y[cs.vsr_psi_cols[k]];
      const double v = sols[t].y[cs.vsr_v_cols[k]];
      const std::string where =
          "scenario " + std::to_string(cs.id) + " branch " + std::to_string(cand.branch_id);
      if (x[k]) {
        if (std::abs(v) >= cand.m2 * (1.0 - 1e-6))
          warn.push_back("tracking variable at its bound in " + where);
        if (std::abs(v) > 1e-6) {
          const double db = psi / v;
          if (db < cand.dbmin - 1e-6 || db > cand.dbmax + 1e-6)
            warn.push_back("compensation " + fmt_g(db) + " outside range in " + where);
        } else if (std::abs(psi) > 1e-6) {
          warn.push_back("injection without flow in " + where);
        }
      } else {
        if (std::abs(psi) > 1e-6 || std::abs(v) > 1e-6)
          warn.push_back("unbuilt reactor active in " + where);
      }
    }
  }
  return warn;
}

struct CcgReport {
  PlanReport plan;
  CcgState state;
};

// Iteration log in fixed-width text, one record per pass.
inline std::string iteration_log_text(const CcgState& st) {
  std::ostringstream os;
  os << "iter          LB            UB        gap     MP s     SP s\n";
  for (const auto& it : st.log) {
    os << "  " << it.q << "  " << fmt_fixed(it.lb, 4) << "  " << fmt_fixed(it.ub, 4) << "  "
       << fmt_g(it.gap) << "  " << fmt_fixed(it.mp_seconds, 2) << "  "
       << fmt_fixed(it.sp_seconds, 2) << "\n";
  }
  os << "status: " << st.status << "\n";
  return os.str();
}

inline CcgReport run_ccg(const CompactForm& cf, const BilevelOptions& opt = {}) {
  opt.check();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  CcgState st;
  std::vector<int> prev_x;
  std::vector<std::vector<double>> prev_z;
  double mp_total = 0, sp_total = 0;
  bool have_incumbent = false;

  while (st.q < opt.max_iter) {
    auto mp = solve_master(cf, st.pool, opt);
    mp_total += mp.seconds;
    st.worst_lambda_frac = std::max(st.worst_lambda_frac, mp.max_lambda / opt.m_lambda);
    st.lb = std::max(st.lb, mp.best_bound);

    const auto sp0 = clock::now();
    std::vector<ScenarioSolution> sols;
    double cand = 0;
    for (int j = 0; j < cf.n_x(); ++j) cand += cf.f[j] * mp.x[j];
    std::vector<std::vector<double>> zs;
    for (size_t t = 0; t < cf.scen.size(); ++t) {
      const double phi = solve_sp1(cf, int(t), mp.x);
      auto sol = solve_sp2(cf, int(t), mp.x, phi);
      cand += cf.scen[t].hours * sol.g_cost;
      zs.push_back(sol.z);
      sols.push_back(std::move(sol));
    }
    const double sp_s = std::chrono::duration<double>(clock::now() - sp0).count();
    sp_total += sp_s;

    if (cand < st.ub) {
      st.ub = cand;
      st.x_best = mp.x;
      st.best_sols = sols;
      have_incumbent = true;
    }
    const double gap = std::abs(st.ub - st.lb) / std::max(std::abs(st.ub), 1e-12);
    const bool repeat = mp.x == prev_x && zs == prev_z;
    st.log.push_back({st.q + 1, mp.value, st.lb, st.ub, gap, mp.seconds, sp_s, !repeat});
    st.q += 1;

    if (gap <= opt.epsilon) {
      st.status = "converged";
      break;
    }
    if (mp.timed_out) {
      st.status = "time_limit";
      st.warnings.push_back("master timed out; bound is the best proven");
      break;
    }
    if (repeat) {
      st.status = "stalled";
      st.warnings.push_back("master and subproblems repeated without closing the gap");
      break;
    }
    st.pool.push_back(zs);
    prev_x = mp.x;
    prev_z = zs;
  }
  if (st.status == "running") st.status = "gap_not_closed";

  CcgReport rep;
  if (!have_incumbent) throw SolveError("no incumbent plan found");
  rep.plan = evaluate_plan(cf, st.x_best);
  rep.plan.iterations = st.q;
  rep.plan.gap = st.log.empty() ? 0.0 : st.log.back().gap;
  rep.plan.status = st.status;
  rep.plan.mp_seconds = mp_total;
  rep.plan.sp_seconds = sp_total;
  rep.plan.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  auto warn = audit_big_m(cf, st.x_best, st.best_sols, st.worst_lambda_frac * opt.m_lambda,
                          opt.m_lambda);
  st.warnings.insert(st.warnings.end(), warn.begin(), warn.end());
  rep.state = std::move(st);
  return rep;
}

// Exhaustive oracle over every feasible investment vector; ties resolve to
// the lexicographically smallest plan.
inline PlanReport brute_force_plan(const CompactForm& cf, const BilevelOptions& opt = {}) {
  opt.check();
  const int n = cf.n_x();
  if (n > 12) throw ConfigError("exhaustive search capped at 12 candidates");
  std::vector<int> best_x;
  double best = kInf;
  bool found = false;
  for (long mask = 0; mask < (1L << n); ++mask) {
    std::vector<int> x(n);
    for (int j = 0; j < n; ++j) x[j] = (mask >> j) & 1;
    if (!cf.x_feasible(x)) continue;
    double val = 0;
    for (int j = 0; j < n; ++j) val += cf.f[j] * x[j];
    for (size_t t = 0; t < cf.scen.size(); ++t) {
      const double phi = solve_sp1(cf, int(t), x);
      val += cf.scen[t].hours * solve_sp2(cf, int(t), x, phi).g_cost;
    }
    const double tol = 1e-9 * std::max(1.0, std::abs(val));
    if (!found || val < best - tol ||
        (std::abs(val - best) <= tol &&
         std::lexicographical_compare(x.begin(), x.end(), best_x.begin(), best_x.end()))) {
      best = val;
      best_x = x;
      found = true;
    }
  }
  if (!found) throw SolveError("no feasible investment vector");
  auto rep = evaluate_plan(cf, best_x);
  rep.status = "enumerated";
  return rep;
}

}  // namespace facts
