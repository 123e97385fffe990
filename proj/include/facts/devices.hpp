#pragma once

// Series compensation devices. A switchable series reactor changes a line's
// susceptance within a relative range [db_min, db_max] and injects
// psi = db * P at the line ends; a phase shifter injects a bounded flow
// directly. Both are linearized with big-M blocks whose selection variable
// (delta / alpha) stays an upper-level parameter inside market models.

#include <cmath>
#include <string>
#include <vector>

#include "facts/common.hpp"
#include "facts/model.hpp"
#include "facts/network.hpp"

namespace facts {

struct DeviceParams {
  double comp_min_frac = -0.7;   // reactance compensation range, fraction of x_k
  double comp_max_frac = 0.2;
  double angle_max_deg = 10.0;   // symmetric phase-shift range
  double m1_scale = 2.0;         // M1 = m1_scale * max|db| * smax
  double m2_scale = 3.5;         // M2 = m2_scale * smax
  double rate = 0.05;            // yearly interest rate
  int lifetime_years = 5;
  double pst_cost_per_kva = 100.0;
};

struct CompensationBounds {
  double dbmin, dbmax;  // susceptance change relative to b_k
};

// Susceptance range induced by a reactance compensation range. With the
// compensating reactance x_c in [cmin*x_k, cmax*x_k], the relative change
// db = -x_c/(x_k + x_c) lands in [-cmax/(1+cmax), -cmin/(1+cmin)], which is
// independent of x_k.
inline CompensationBounds delta_b_bounds(double comp_min_frac, double comp_max_frac) {
  if (!(comp_min_frac > -1.0))
    throw ValidationError("compensation lower fraction must exceed -1 (full cancellation)");
  if (comp_max_frac < comp_min_frac)
    throw ValidationError("compensation range is empty");
  CompensationBounds b;
  b.dbmin = -comp_max_frac / (1.0 + comp_max_frac);
  b.dbmax = -comp_min_frac / (1.0 + comp_min_frac);
  return b;
}

struct BigM {
  double m1, m2;
};

inline BigM big_m_values(const CompensationBounds& b, double smax_mw, double m1_scale = 2.0,
                         double m2_scale = 3.5) {
  BigM m;
  m.m1 = m1_scale * std::max(std::abs(b.dbmin), std::abs(b.dbmax)) * smax_mw;
  m.m2 = m2_scale * smax_mw;
  return m;
}

// Capital recovery factor d(1+d)^n / ((1+d)^n - 1).
inline double annualization_factor(double rate, int lifetime_years) {
  if (lifetime_years <= 0) throw ValidationError("device lifetime must be positive");
  if (rate < 0) throw ValidationError("negative interest rate");
  if (rate == 0) return 1.0 / lifetime_years;
  const double g = std::pow(1.0 + rate, lifetime_years);
  return rate * g / (g - 1.0);
}

// Phase shifter: flat $/kVA on the line rating.
inline double pst_total_cost(double smax_mva, double per_kva = 100.0) {
  return per_kva * smax_mva * 1000.0;
}

// Reactor sizing: rating that the device must compensate, in MVar.
inline double vsr_size_mvar(double smax_mva, double base_mva, double x_comp_max_pu) {
  if (base_mva <= 0) throw ValidationError("base MVA must be positive");
  return smax_mva * smax_mva / base_mva * x_comp_max_pu;
}

// Unit cost in $/kVar as a quadratic in the device size (MVar).
inline double vsr_unit_cost_per_kvar(double size_mvar) {
  return 0.0015 * size_mvar * size_mvar - 0.713 * size_mvar + 153.75;
}

inline double vsr_total_cost(double size_mvar) {
  return vsr_unit_cost_per_kvar(size_mvar) * size_mvar * 1000.0;
}

struct VsrCandidate {
  int branch_id = -1;
  double dbmin = 0, dbmax = 0;  // relative susceptance change
  double m1 = 0, m2 = 0;
  double annual_cost = 0;       // $
  int fixed_direction = 0;      // 0 free, +1 flow >= 0, -1 flow <= 0
};

struct PstCandidate {
  int branch_id = -1;
  double psi_min_mw = 0, psi_max_mw = 0;
  double annual_cost = 0;       // $
};

inline VsrCandidate make_vsr(const NetworkCase& c, int branch_id, const DeviceParams& p = {}) {
  const Branch& br = c.branches[c.branch_index(branch_id)];
  const auto bounds = delta_b_bounds(p.comp_min_frac, p.comp_max_frac);
  const auto bigm = big_m_values(bounds, br.smax, p.m1_scale, p.m2_scale);
  VsrCandidate v;
  v.branch_id = branch_id;
  v.dbmin = bounds.dbmin;
  v.dbmax = bounds.dbmax;
  v.m1 = bigm.m1;
  v.m2 = bigm.m2;
  const double xbar = std::max(std::abs(p.comp_min_frac), std::abs(p.comp_max_frac)) * br.x;
  const double size = vsr_size_mvar(br.smax, c.base_mva, xbar);
  v.annual_cost = vsr_total_cost(size) * annualization_factor(p.rate, p.lifetime_years);
  return v;
}

inline PstCandidate make_pst(const NetworkCase& c, int branch_id, const DeviceParams& p = {}) {
  const Branch& br = c.branches[c.branch_index(branch_id)];
  if (p.angle_max_deg <= 0) throw ValidationError("phase-shift range must be positive");
  const double theta = p.angle_max_deg * M_PI / 180.0;
  PstCandidate d;
  d.branch_id = branch_id;
  // injection bound b_k * theta in system MW
  d.psi_max_mw = (1.0 / br.x) * theta * c.base_mva;
  d.psi_min_mw = -d.psi_max_mw;
  d.annual_cost =
      pst_total_cost(br.smax, p.pst_cost_per_kva) * annualization_factor(p.rate, p.lifetime_years);
  return d;
}

struct DeviceCatalog {
  std::vector<VsrCandidate> vsr;
  std::vector<PstCandidate> pst;
};

inline DeviceCatalog build_catalog(const NetworkCase& c, const std::vector<int>& vsr_branches,
                                   const std::vector<int>& pst_branches,
                                   const DeviceParams& p = {}) {
  DeviceCatalog cat;
  std::vector<int> seen;
  for (int id : vsr_branches) {
    for (int s : seen)
      if (s == id)
        throw ValidationError("duplicate reactor candidate on branch " + std::to_string(id));
    seen.push_back(id);
    cat.vsr.push_back(make_vsr(c, id, p));
  }
  seen.clear();
  for (int id : pst_branches) {
    for (int s : seen)
      if (s == id)
        throw ValidationError("duplicate shifter candidate on branch " + std::to_string(id));
    seen.push_back(id);
    cat.pst.push_back(make_pst(c, id, p));
  }
  return cat;
}

// --- model blocks -----------------------------------------------------------
// All rows are emitted as LE constraints so lower-level duals keep a single
// sign convention. The selection variable enters through the row's parameter
// part, so instantiating the model at a chosen build plan fixes the blocks.

// Phase shifter injection bounds: psi in alpha * [psi_min, psi_max].
// Returns the psi variable id; emits rows <prefix>_shift_ub / _lb.
inline int add_pst_block(Model& m, const PstCandidate& c, int alpha_param,
                         const std::string& prefix) {
  const int psi = m.add_continuous(prefix + "_psi", -kInf, kInf);
  LinExpr ub, lb, xu, xl;
  ub.add(psi, 1.0);
  xu.add(alpha_param, -c.psi_max_mw);
  m.add_row(prefix + "_shift_ub", ub, RowSense::LE, 0.0, xu);
  lb.add(psi, -1.0);
  xl.add(alpha_param, c.psi_min_mw);
  m.add_row(prefix + "_shift_lb", lb, RowSense::LE, 0.0, xl);
  return psi;
}

struct VsrBlockVars {
  int psi = -1;  // injected flow change
  int v = -1;    // linearized delta * flow
  int u = -1;    // flow-sign selector, -1 when the direction is fixed
};

// Reactor injection block: psi = db * P for db in [dbmin, dbmax] when the
// device is built, psi = 0 otherwise. delta enters as a parameter; u is a
// lower-level binary unless the candidate's flow direction was fixed, in
// which case its value is folded into the right-hand sides.
inline VsrBlockVars add_vsr_block(Model& m, const VsrCandidate& c, int flow_var, int delta_param,
                                  const std::string& prefix) {
  VsrBlockVars vars;
  vars.psi = m.add_continuous(prefix + "_psi", -kInf, kInf);
  vars.v = m.add_continuous(prefix + "_v", -kInf, kInf);
  double u_fixed = 0;
  bool have_u = c.fixed_direction == 0;
  if (have_u)
    vars.u = m.add_binary(prefix + "_u");
  else
    u_fixed = c.fixed_direction > 0 ? 0.0 : 1.0;
  const int psi = vars.psi, v = vars.v;

  auto le = [&](const std::string& tag, LinExpr e, double rhs, double delta_coef) {
    LinExpr x;
    if (delta_coef != 0) x.add(delta_param, delta_coef);
    m.add_row(prefix + tag, e, RowSense::LE, rhs, x);
  };
  LinExpr e;

  // |v| <= M2 * delta
  e = {};
  e.add(v, 1.0);
  le("_gate_ub", e, 0.0, -c.m2);
  e = {};
  e.add(v, -1.0);
  le("_gate_lb", e, 0.0, -c.m2);

  // |v - P| <= M2 * (1 - delta)
  e = {};
  e.add(v, 1.0);
  e.add(flow_var, -1.0);
  le("_track_ub", e, c.m2, c.m2);
  e = {};
  e.add(flow_var, 1.0);
  e.add(v, -1.0);
  le("_track_lb", e, c.m2, c.m2);

  // forward side: dbmin*v - M1*u <= psi <= dbmax*v + M1*u
  auto with_u = [&](LinExpr ex, double ucoef, double rhs) {
    if (have_u)
      ex.add(vars.u, ucoef);
    else
      rhs -= ucoef * u_fixed;
    return std::make_pair(ex, rhs);
  };
  e = {};
  e.add(psi, 1.0);
  e.add(v, -c.dbmax);
  {
    auto [ex, rhs] = with_u(e, -c.m1, 0.0);
    le("_fwd_ub", ex, rhs, 0.0);
  }
  e = {};
  e.add(v, c.dbmin);
  e.add(psi, -1.0);
  {
    auto [ex, rhs] = with_u(e, -c.m1, 0.0);
    le("_fwd_lb", ex, rhs, 0.0);
  }

  // reverse side: dbmax*v - M1*(1-u) <= psi <= dbmin*v + M1*(1-u)
  e = {};
  e.add(psi, 1.0);
  e.add(v, -c.dbmin);
  {
    auto [ex, rhs] = with_u(e, c.m1, c.m1);
    le("_rev_ub", ex, rhs, 0.0);
  }
  e = {};
  e.add(v, c.dbmax);
  e.add(psi, -1.0);
  {
    auto [ex, rhs] = with_u(e, c.m1, c.m1);
    le("_rev_lb", ex, rhs, 0.0);
  }
  return vars;
}

}  // namespace facts
