#pragma once

// Per-scenario market clearing. Builds plain DCOPF models (angle and
// shift-factor forms) and the device-aware lower-level problem: generation
// cost plus load-shedding penalty, wind with explicit spillage, flow limits
// on monitored lines, and device injection blocks whose build decisions
// enter as upper-level parameters. All continuous variables are free with
// explicit LE rows so the dual of every bound is a row dual.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "facts/common.hpp"
#include "facts/devices.hpp"
#include "facts/model.hpp"
#include "facts/network.hpp"
#include "facts/scenarios.hpp"

namespace facts {

enum class Formulation { ShiftFactor, Btheta };

inline Formulation parse_formulation(const std::string& s) {
  const auto t = to_lower(trim(s));
  if (t == "shift_factor" || t == "shift-factor" || t == "sf") return Formulation::ShiftFactor;
  if (t == "btheta" || t == "b-theta" || t == "angle") return Formulation::Btheta;
  throw ConfigError("unknown formulation '" + s + "' (want shift_factor or btheta)");
}

inline const char* formulation_name(Formulation f) {
  return f == Formulation::ShiftFactor ? "shift_factor" : "btheta";
}

// One scenario materialized to megawatts.
struct OperatingPoint {
  std::vector<double> load_mw;        // per case.loads order
  std::vector<double> wind_avail_mw;  // per case.wind_farms order
};

// Wind columns map to farms either one-to-one or as a single shared column;
// per-farm scale factors adjust the intensity before the capacity applies.
inline OperatingPoint resolve_operating_point(const NetworkCase& c, const Scenario& s,
                                              const std::map<int, double>& wind_scale = {}) {
  OperatingPoint op;
  for (size_t m = 0; m < c.loads.size(); ++m) op.load_mw.push_back(c.loads[m].peak * s.load);
  const size_t nf = c.wind_farms.size();
  if (nf > 0 && !s.wind.empty() && s.wind.size() != 1 && s.wind.size() != nf)
    throw ValidationError("scenario has " + std::to_string(s.wind.size()) +
                          " wind columns for " + std::to_string(nf) + " farms");
  for (size_t w = 0; w < nf; ++w) {
    const double intensity = s.wind.empty() ? 0.0 : (s.wind.size() == 1 ? s.wind[0] : s.wind[w]);
    double scale = 1.0;
    auto it = wind_scale.find(c.wind_farms[w].id);
    if (it != wind_scale.end()) scale = it->second;
    op.wind_avail_mw.push_back(wind_available_mw(c.wind_farms[w].capacity, intensity, scale));
  }
  return op;
}

struct MarketOptions {
  Formulation formulation = Formulation::ShiftFactor;
  bool include_wind = true;
  bool include_shedding = true;
  double shed_cost = 5000.0;          // $/MWh on involuntary shedding
  std::map<int, double> wind_scale;   // farm id -> intensity scale
  std::vector<int> monitor_lines;     // shift factor: explicit-flow subset; empty = all
  const PtdfMatrix* ptdf = nullptr;   // optional precomputed rows
};

struct MarketModel {
  Model model{"market"};
  Formulation formulation = Formulation::ShiftFactor;
  int scenario_id = 0;
  // variable ids, parallel to the case element lists
  std::vector<int> gen_p, wind_g, wind_sp, shed;
  std::vector<int> theta;              // per bus, angle form only
  std::vector<int> monitored;          // branch ids carrying flow variables
  std::map<int, int> flow_of;          // branch id -> flow variable
  std::vector<VsrBlockVars> vsr_vars;  // parallel to catalog.vsr
  std::vector<int> pst_psi;            // parallel to catalog.pst
  std::vector<int> delta_param, alpha_param;
  DeviceCatalog catalog;
  std::vector<double> load_mw, wind_avail_mw;
  const NetworkCase* net = nullptr;    // must outlive the model

  int n_x() const { return int(delta_param.size() + alpha_param.size()); }
  // Parameter vector in registration order: reactor decisions, then shifters.
  std::vector<double> pack_x(const std::vector<double>& deltas,
                             const std::vector<double>& alphas) const {
    if (deltas.size() != delta_param.size() || alphas.size() != alpha_param.size())
      throw ValidationError("build-decision vector length mismatch");
    std::vector<double> x = deltas;
    x.insert(x.end(), alphas.begin(), alphas.end());
    return x;
  }
};

namespace detail {

// Terms below this magnitude in distribution-factor rows are factorization
// noise; dropping them keeps the constraint matrix sparse.
constexpr double kPtdfDropTol = 1e-11;

inline void add_free(Model& m, std::vector<int>& out, const std::string& name) {
  out.push_back(m.add_continuous(name, -kInf, kInf));
}

}  // namespace detail

// Core builder. Plain models (no wind, no shedding, no devices) carry the
// snapshot-DCOPF row tags (eq31*/eq32*); anything richer uses the planning
// family (eq12*), with angle-form flow rows keeping their own tags.
inline MarketModel build_market_model(const NetworkCase& c, const Scenario& s,
                                      const DeviceCatalog& cat, const MarketOptions& opt = {}) {
  if (!c.validated()) throw ValidationError("case must be validated before building models");
  MarketModel mm;
  mm.formulation = opt.formulation;
  mm.scenario_id = s.id;
  mm.catalog = cat;
  mm.net = &c;
  mm.model = Model("market_s" + std::to_string(s.id));
  Model& m = mm.model;

  const auto op = resolve_operating_point(c, s, opt.wind_scale);
  mm.load_mw = op.load_mw;
  mm.wind_avail_mw = op.wind_avail_mw;
  const bool wind = opt.include_wind && !c.wind_farms.empty();
  const bool shed = opt.include_shedding && !c.loads.empty();
  const bool devices = !cat.vsr.empty() || !cat.pst.empty();
  const bool plain = !wind && !shed && !devices;
  const bool sf = opt.formulation == Formulation::ShiftFactor;

  // candidate lookup per branch
  std::map<int, int> vsr_on, pst_on;  // branch id -> catalog index
  for (size_t i = 0; i < cat.vsr.size(); ++i) {
    if (!c.has_branch(cat.vsr[i].branch_id))
      throw ValidationError("reactor candidate on unknown branch " +
                            std::to_string(cat.vsr[i].branch_id));
    vsr_on[cat.vsr[i].branch_id] = int(i);
  }
  for (size_t i = 0; i < cat.pst.size(); ++i) {
    if (!c.has_branch(cat.pst[i].branch_id))
      throw ValidationError("shifter candidate on unknown branch " +
                            std::to_string(cat.pst[i].branch_id));
    pst_on[cat.pst[i].branch_id] = int(i);
  }

  // monitored lines: explicit list union candidates, in case branch order;
  // the angle form always carries every line
  std::set<int> mon;
  if (sf && !opt.monitor_lines.empty()) {
    for (int id : opt.monitor_lines) {
      if (!c.has_branch(id))
        throw ValidationError("monitored line " + std::to_string(id) + " not in case");
      mon.insert(id);
    }
    for (const auto& [bid, idx] : vsr_on) mon.insert(bid);
    for (const auto& [bid, idx] : pst_on) mon.insert(bid);
  } else {
    for (const auto& b : c.branches) mon.insert(b.id);
  }
  for (const auto& b : c.branches)
    if (mon.count(b.id)) mm.monitored.push_back(b.id);

  // --- variables ---
  for (const auto& g : c.generators)
    detail::add_free(m, mm.gen_p, "pg_" + std::to_string(g.id));
  if (wind) {
    for (const auto& w : c.wind_farms)
      detail::add_free(m, mm.wind_g, "pw_" + std::to_string(w.id));
    for (const auto& w : c.wind_farms)
      detail::add_free(m, mm.wind_sp, "psp_" + std::to_string(w.id));
  }
  if (shed) {
    for (const auto& l : c.loads) detail::add_free(m, mm.shed, "shed_" + std::to_string(l.id));
  }
  std::vector<int> flow_vars;
  for (int bid : mm.monitored) {
    const int v = m.add_continuous("flow_" + std::to_string(bid), -kInf, kInf);
    flow_vars.push_back(v);
    mm.flow_of[bid] = v;
  }
  if (!sf) {
    for (const auto& b : c.buses)
      detail::add_free(m, mm.theta, "theta_" + std::to_string(b.id));
  }
  for (const auto& v : cat.vsr)
    mm.delta_param.push_back(m.add_parameter("delta_" + std::to_string(v.branch_id)));
  for (const auto& p : cat.pst)
    mm.alpha_param.push_back(m.add_parameter("alpha_" + std::to_string(p.branch_id)));

  // --- device blocks (they reference candidate-line flow variables) ---
  for (size_t i = 0; i < cat.vsr.size(); ++i) {
    const int fv = mm.flow_of.at(cat.vsr[i].branch_id);
    mm.vsr_vars.push_back(add_vsr_block(m, cat.vsr[i], fv, mm.delta_param[i],
                                        "vsr" + std::to_string(cat.vsr[i].branch_id)));
  }
  for (size_t i = 0; i < cat.pst.size(); ++i)
    mm.pst_psi.push_back(add_pst_block(m, cat.pst[i], mm.alpha_param[i],
                                       "pst" + std::to_string(cat.pst[i].branch_id)));

  // --- objective: generation cost plus shedding penalty ---
  LinExpr obj;
  for (size_t n = 0; n < c.generators.size(); ++n) obj.add(mm.gen_p[n], c.generators[n].cost);
  if (shed)
    for (size_t l = 0; l < c.loads.size(); ++l) obj.add(mm.shed[l], opt.shed_cost);
  m.set_objective(obj);

  // injection terms shared by both flow formulations
  auto bus_injectors = [&](int bus_id, LinExpr& e, double sign) {
    for (size_t n = 0; n < c.generators.size(); ++n)
      if (c.generators[n].bus == bus_id) e.add(mm.gen_p[n], sign);
    if (wind)
      for (size_t w = 0; w < c.wind_farms.size(); ++w)
        if (c.wind_farms[w].bus == bus_id) e.add(mm.wind_g[w], sign);
    if (shed)
      for (size_t l = 0; l < c.loads.size(); ++l)
        if (c.loads[l].bus == bus_id) e.add(mm.shed[l], sign);
  };
  auto fixed_load_at = [&](int bus_id) {
    double d = 0;
    for (size_t l = 0; l < c.loads.size(); ++l)
      if (c.loads[l].bus == bus_id) d += op.load_mw[l];
    return d;
  };

  if (sf) {
    // flow definitions through distribution factors
    PtdfMatrix local;
    const PtdfMatrix* H = opt.ptdf;
    if (H) {
      for (int bid : mm.monitored)
        if (!H->covers(bid))
          throw ValidationError("supplied distribution factors miss monitored line " +
                                std::to_string(bid));
    } else {
      local = compute_ptdf(c, mm.monitored);
      H = &local;
    }
    for (size_t r = 0; r < mm.monitored.size(); ++r) {
      const int bid = mm.monitored[r];
      const int hrow = H->row(bid);
      LinExpr e;
      e.add(flow_vars[r], 1.0);
      double rhs = 0;
      for (int i = 0; i < c.n_buses(); ++i) {
        const double h = H->h(hrow, i);
        if (std::abs(h) < detail::kPtdfDropTol) continue;
        bus_injectors(c.buses[i].id, e, -h);
        rhs -= h * fixed_load_at(c.buses[i].id);
      }
      // device transfers: -psi at the from bus, +psi at the to bus
      auto device_terms = [&](int cand_branch, int psi_var) {
        const Branch& cb = c.branches[c.branch_index(cand_branch)];
        const double hf = H->h(hrow, c.bus_index(cb.from));
        const double ht = H->h(hrow, c.bus_index(cb.to));
        const double coef = hf - ht;  // moves -(ht - hf) * psi to the left side
        if (std::abs(coef) >= detail::kPtdfDropTol) e.add(psi_var, coef);
      };
      for (size_t i = 0; i < cat.vsr.size(); ++i)
        device_terms(cat.vsr[i].branch_id, mm.vsr_vars[i].psi);
      for (size_t i = 0; i < cat.pst.size(); ++i)
        device_terms(cat.pst[i].branch_id, mm.pst_psi[i]);
      m.add_row((plain ? "eq32b_" : "eq12f_") + std::to_string(bid), e, RowSense::EQ, rhs);
    }
    // single system balance
    LinExpr bal;
    double total_load = 0;
    for (size_t n = 0; n < c.generators.size(); ++n) bal.add(mm.gen_p[n], 1.0);
    if (wind)
      for (size_t w = 0; w < c.wind_farms.size(); ++w) bal.add(mm.wind_g[w], 1.0);
    if (shed)
      for (size_t l = 0; l < c.loads.size(); ++l) bal.add(mm.shed[l], 1.0);
    for (double d : op.load_mw) total_load += d;
    m.add_row(plain ? "eq32c" : "eq12g", bal, RowSense::EQ, total_load);
  } else {
    // angle form: flow definitions, nodal balances, reference pin
    for (size_t r = 0; r < mm.monitored.size(); ++r) {
      const Branch& b = c.branches[c.branch_index(mm.monitored[r])];
      const double coef = c.base_mva / b.x;
      LinExpr e;
      e.add(flow_vars[r], 1.0);
      e.add(mm.theta[c.bus_index(b.from)], -coef);
      e.add(mm.theta[c.bus_index(b.to)], coef);
      m.add_row("eq31b_" + std::to_string(b.id), e, RowSense::EQ, 0.0);
    }
    for (const auto& bus : c.buses) {
      LinExpr e;
      bus_injectors(bus.id, e, 1.0);
      for (size_t r = 0; r < mm.monitored.size(); ++r) {
        const Branch& b = c.branches[c.branch_index(mm.monitored[r])];
        if (b.from == bus.id) e.add(flow_vars[r], -1.0);
        if (b.to == bus.id) e.add(flow_vars[r], 1.0);
      }
      auto device_terms = [&](int cand_branch, int psi_var) {
        const Branch& cb = c.branches[c.branch_index(cand_branch)];
        if (cb.from == bus.id) e.add(psi_var, -1.0);
        if (cb.to == bus.id) e.add(psi_var, 1.0);
      };
      for (size_t i = 0; i < cat.vsr.size(); ++i)
        device_terms(cat.vsr[i].branch_id, mm.vsr_vars[i].psi);
      for (size_t i = 0; i < cat.pst.size(); ++i)
        device_terms(cat.pst[i].branch_id, mm.pst_psi[i]);
      m.add_row("eq31c_" + std::to_string(bus.id), e, RowSense::EQ, fixed_load_at(bus.id));
    }
    LinExpr ref;
    ref.add(mm.theta[c.bus_index(c.reference_bus())], 1.0);
    m.add_row("eq31f", ref, RowSense::EQ, 0.0);
  }

  // --- wind coupling ---
  if (wind) {
    for (size_t w = 0; w < c.wind_farms.size(); ++w) {
      const std::string id = std::to_string(c.wind_farms[w].id);
      LinExpr def;
      def.add(mm.wind_sp[w], 1.0);
      def.add(mm.wind_g[w], 1.0);
      m.add_row("eq12h_" + id, def, RowSense::EQ, op.wind_avail_mw[w]);
      LinExpr ub, lb;
      ub.add(mm.wind_g[w], 1.0);
      m.add_row("eq12i_ub_" + id, ub, RowSense::LE, op.wind_avail_mw[w]);
      lb.add(mm.wind_g[w], -1.0);
      m.add_row("eq12i_lb_" + id, lb, RowSense::LE, 0.0);
    }
  }

  // --- generator limits ---
  for (size_t n = 0; n < c.generators.size(); ++n) {
    const std::string id = std::to_string(c.generators[n].id);
    const std::string fam = plain ? (sf ? "eq32d_" : "eq31d_") : "eq12j_";
    LinExpr ub, lb;
    ub.add(mm.gen_p[n], 1.0);
    m.add_row(fam + "ub_" + id, ub, RowSense::LE, c.generators[n].pmax);
    lb.add(mm.gen_p[n], -1.0);
    m.add_row(fam + "lb_" + id, lb, RowSense::LE, -c.generators[n].pmin);
  }

  // --- line limits on monitored lines ---
  for (size_t r = 0; r < mm.monitored.size(); ++r) {
    const int bid = mm.monitored[r];
    const Branch& b = c.branches[c.branch_index(bid)];
    const std::string id = std::to_string(bid);
    const bool has_v = vsr_on.count(bid) > 0;
    const bool has_p = pst_on.count(bid) > 0;
    auto limit_pair = [&](const std::string& family, int psi_var) {
      LinExpr ub, lb;
      ub.add(flow_vars[r], 1.0);
      lb.add(flow_vars[r], -1.0);
      if (psi_var >= 0) {
        ub.add(psi_var, 1.0);
        lb.add(psi_var, -1.0);
      }
      m.add_row(family + "_ub_" + id, ub, RowSense::LE, b.smax);
      m.add_row(family + "_lb_" + id, lb, RowSense::LE, b.smax);
    };
    if (!has_v && !has_p) {
      limit_pair(plain ? (sf ? "eq32e" : "eq31e") : "eq12k", -1);
    } else {
      if (has_v) limit_pair("eq12l", mm.vsr_vars[vsr_on[bid]].psi);
      if (has_p) limit_pair("eq12m", mm.pst_psi[pst_on[bid]]);
    }
  }

  // --- shedding limits ---
  if (shed) {
    for (size_t l = 0; l < c.loads.size(); ++l) {
      const std::string id = std::to_string(c.loads[l].id);
      LinExpr ub, lb;
      ub.add(mm.shed[l], 1.0);
      m.add_row("eq12n_ub_" + id, ub, RowSense::LE, op.load_mw[l]);
      lb.add(mm.shed[l], -1.0);
      m.add_row("eq12n_lb_" + id, lb, RowSense::LE, 0.0);
    }
  }
  return mm;
}

// Snapshot DCOPF per the appendix formulations; wind/shedding stay out
// unless the options turn them on.
inline MarketModel build_dcopf(const NetworkCase& c, const Scenario& s, Formulation f,
                               MarketOptions opt = MarketOptions{Formulation::ShiftFactor, false,
                                                                 false, 5000.0, {}, {}, nullptr}) {
  opt.formulation = f;
  return build_market_model(c, s, DeviceCatalog{}, opt);
}

// Device-aware lower level (one scenario): wind and shedding always present.
inline MarketModel build_lower_level(const NetworkCase& c, const Scenario& s,
                                     const DeviceCatalog& cat, MarketOptions opt = {}) {
  opt.include_wind = true;
  opt.include_shedding = true;
  return build_market_model(c, s, cat, opt);
}

struct MarketOutcome {
  SolveStatus status = SolveStatus::Error;
  double objective = 0;  // $/h
  std::vector<double> gen_mw, wind_mw, spill_mw, shed_mw;
  std::map<int, double> flow_mw;      // branch id -> uncompensated flow
  std::map<int, double> eff_flow_mw;  // branch id -> flow incl. device injection
  std::map<int, double> vsr_psi_mw, pst_psi_mw;
  std::map<int, double> vsr_db;         // implied relative susceptance change
  std::map<int, double> pst_angle_deg;  // implied shift angle
  double total_spill_mw = 0, total_shed_mw = 0;
  SolveResult raw;
};

inline MarketOutcome solve_market(const MarketModel& mm, const std::vector<double>& x = {},
                                  const SolveOptions& opt = {}) {
  Model inst = mm.model.n_params() > 0 ? mm.model.instantiate(x) : mm.model;
  auto res = inst.solve(opt);
  if (res.status != SolveStatus::Optimal) {
    const std::string dump = inst.dump_to_temp();
    throw SolveError(std::string("market clearing ended ") + status_name(res.status) +
                     "; model written to " + dump);
  }
  MarketOutcome out;
  out.status = res.status;
  out.objective = res.objective;
  out.raw = res;
  auto val = [&](int var) { return res.var_values[var]; };
  for (int v : mm.gen_p) out.gen_mw.push_back(val(v));
  for (int v : mm.wind_g) out.wind_mw.push_back(val(v));
  for (int v : mm.wind_sp) out.spill_mw.push_back(val(v));
  for (int v : mm.shed) out.shed_mw.push_back(val(v));
  for (double s : out.spill_mw) out.total_spill_mw += s;
  for (double s : out.shed_mw) out.total_shed_mw += s;
  for (const auto& [bid, fv] : mm.flow_of) {
    out.flow_mw[bid] = val(fv);
    out.eff_flow_mw[bid] = val(fv);
  }
  for (size_t i = 0; i < mm.catalog.vsr.size(); ++i) {
    const int bid = mm.catalog.vsr[i].branch_id;
    const double psi = val(mm.vsr_vars[i].psi);
    const double v = val(mm.vsr_vars[i].v);
    out.vsr_psi_mw[bid] = psi;
    out.eff_flow_mw[bid] += psi;
    out.vsr_db[bid] = std::abs(v) > 1e-6 ? psi / v : 0.0;
  }
  for (size_t i = 0; i < mm.catalog.pst.size(); ++i) {
    const int bid = mm.catalog.pst[i].branch_id;
    const double psi = val(mm.pst_psi[i]);
    out.pst_psi_mw[bid] = psi;
    out.eff_flow_mw[bid] += psi;
    const Branch& b = mm.net->branches[mm.net->branch_index(bid)];
    out.pst_angle_deg[bid] = psi * b.x / mm.net->base_mva * 180.0 / M_PI;
  }
  return out;
}

// Checks the physical invariants of an outcome; returns human-readable
// violation messages (empty when clean).
inline std::vector<std::string> check_market_outcome(const MarketModel& mm,
                                                     const MarketOutcome& out,
                                                     double tol = 1e-6) {
  std::vector<std::string> bad;
  const NetworkCase& c = *mm.net;
  for (size_t w = 0; w < mm.wind_g.size(); ++w) {
    const double gap = out.wind_mw[w] + out.spill_mw[w] - mm.wind_avail_mw[w];
    if (std::abs(gap) > tol)
      bad.push_back("wind split violated at farm " + std::to_string(c.wind_farms[w].id) +
                    " by " + fmt_g(gap) + " MW");
  }
  double balance = 0;
  for (double g : out.gen_mw) balance += g;
  for (double g : out.wind_mw) balance += g;
  for (double s : out.shed_mw) balance += s;
  for (double d : mm.load_mw) balance -= d;
  if (std::abs(balance) > tol) bad.push_back("system balance off by " + fmt_g(balance) + " MW");
  for (const auto& [bid, f] : out.eff_flow_mw) {
    const Branch& b = c.branches[c.branch_index(bid)];
    if (std::abs(f) > b.smax + tol)
      bad.push_back("line " + std::to_string(bid) + " carries " + fmt_g(f) + " MW beyond " +
                    fmt_g(b.smax));
  }
  return bad;
}

// Expected model dimensions for a given build, following the snapshot-DCOPF
// size table and extended for wind, shedding and device blocks.
struct ModelSize {
  int vars = 0, eqs = 0, ineqs = 0;
};

inline ModelSize expected_model_size(const NetworkCase& c, const DeviceCatalog& cat,
                                     const MarketOptions& opt, int monitored_count = -1) {
  const int nb = c.n_buses(), ng = int(c.generators.size());
  const int nw = opt.include_wind ? int(c.wind_farms.size()) : 0;
  const int nd = opt.include_shedding ? int(c.loads.size()) : 0;
  const bool sf = opt.formulation == Formulation::ShiftFactor;
  int nl = c.n_branches();
  if (sf && monitored_count >= 0) nl = monitored_count;
  ModelSize s;
  if (sf) {
    s.vars = ng + nl;
    s.eqs = nl + 1;
    s.ineqs = 2 * nl + 2 * ng;
  } else {
    s.vars = nb + nl + ng;
    s.eqs = nl + nb + 1;
    s.ineqs = 2 * nl + 2 * ng;
  }
  s.vars += 2 * nw + nd;
  s.eqs += nw;
  s.ineqs += 2 * nw + 2 * nd;
  std::set<int> vlines, plines;
  for (const auto& v : cat.vsr) {
    s.vars += v.fixed_direction == 0 ? 3 : 2;
    s.ineqs += 8;
    vlines.insert(v.branch_id);
  }
  for (const auto& p : cat.pst) {
    s.vars += 1;
    s.ineqs += 2;
    plines.insert(p.branch_id);
  }
  // a line holding both candidate kinds carries both limit pairs
  for (int bid : vlines)
    if (plines.count(bid)) s.ineqs += 2;
  return s;
}

}  // namespace facts
