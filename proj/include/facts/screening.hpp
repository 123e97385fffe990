#pragma once

// Pre-processing heuristics for candidate selection and model reduction:
// reactance sensitivities of the market cost, weighted candidate ranking,
// flow-direction fixing for reactor selector binaries, monitored-line
// selection by peak loading, and the post-hoc audit that re-checks excluded
// lines after planning.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "facts/common.hpp"
#include "facts/market.hpp"

namespace facts {

struct ScreeningOptions {
  int top_n = 10;                    // candidate list length
  double loading_threshold = 0.60;   // monitored-line cutoff
  double direction_deadband = 1e-3;  // fraction of smax; smaller flows stay free
  double fd_step_frac = 0.01;        // reactance perturbation, fraction of x_k
  bool fd_consistency = true;        // repeat at h/2 and record the gap
  double shed_cost = 5000.0;
  std::map<int, double> wind_scale;
};

// Devices-off market clearing used throughout the screening pass.
inline MarketOutcome screening_solve(const NetworkCase& c, const Scenario& s,
                                     const ScreeningOptions& opt) {
  MarketOptions mo;
  mo.formulation = Formulation::Btheta;
  mo.shed_cost = opt.shed_cost;
  mo.wind_scale = opt.wind_scale;
  auto mm = build_market_model(c, s, {}, mo);
  return solve_market(mm);
}

// d(cost)/d(x_k) for every branch in one scenario, by central differences of
// the devices-off market cost. Each probe re-solves the snapshot with the
// branch reactance moved by +/- h.
inline std::vector<double> reactance_sensitivity(const NetworkCase& c, const Scenario& s,
                                                 const ScreeningOptions& opt = {},
                                                 double step_frac = -1.0) {
  const double frac = step_frac > 0 ? step_frac : opt.fd_step_frac;
  std::vector<double> eta;
  eta.reserve(c.branches.size());
  for (size_t k = 0; k < c.branches.size(); ++k) {
    const double h = frac * c.branches[k].x;
    NetworkCase up = c, dn = c;
    up.branches[k].x += h;
    dn.branches[k].x -= h;
    up.validate();
    dn.validate();
    const double cu = screening_solve(up, s, opt).objective;
    const double cd = screening_solve(dn, s, opt).objective;
    eta.push_back((cu - cd) / (2.0 * h));
  }
  return eta;
}

struct RankedBranch {
  int branch_id;
  double weighted_eta;  // sum over scenarios of N_t |eta_kt x_k|
};

// Hour-weighted absolute sensitivities, descending; ties break on branch id.
inline std::vector<RankedBranch> weighted_rank(const NetworkCase& c,
                                               const std::vector<std::vector<double>>& eta_per_scen,
                                               const std::vector<double>& hours, int top_n) {
  if (eta_per_scen.size() != hours.size())
    throw ValidationError("sensitivity rows do not match scenario weights");
  std::vector<RankedBranch> rank;
  for (size_t k = 0; k < c.branches.size(); ++k) {
    double acc = 0;
    for (size_t t = 0; t < hours.size(); ++t) {
      if (eta_per_scen[t].size() != c.branches.size())
        throw ValidationError("sensitivity vector length mismatch");
      acc += hours[t] * std::abs(eta_per_scen[t][k] * c.branches[k].x);
    }
    rank.push_back({c.branches[k].id, acc});
  }
  std::sort(rank.begin(), rank.end(), [](const RankedBranch& a, const RankedBranch& b) {
    if (a.weighted_eta != b.weighted_eta) return a.weighted_eta > b.weighted_eta;
    return a.branch_id < b.branch_id;
  });
  if (top_n >= 0 && int(rank.size()) > top_n) rank.resize(top_n);
  return rank;
}

enum class DirectionVerdict { Free, FixedPositive, FixedNegative };

inline const char* verdict_name(DirectionVerdict v) {
  switch (v) {
    case DirectionVerdict::FixedPositive: return "fixed-positive";
    case DirectionVerdict::FixedNegative: return "fixed-negative";
    default: return "free";
  }
}

// A candidate's flow sign must clear the dead-band with the same sign in
// every scenario before its selector binary is fixed.
inline std::map<int, DirectionVerdict> fix_flow_directions(
    const NetworkCase& c, const std::vector<MarketOutcome>& outcomes,
    const std::vector<int>& candidate_branches, double deadband_frac = 1e-3) {
  std::map<int, DirectionVerdict> verdicts;
  for (int bid : candidate_branches) {
    const Branch& b = c.branches[c.branch_index(bid)];
    const double band = deadband_frac * b.smax;
    bool all_pos = true, all_neg = true;
    for (const auto& out : outcomes) {
      const double f = out.flow_mw.at(bid);
      if (!(f > band)) all_pos = false;
      if (!(f < -band)) all_neg = false;
    }
    verdicts[bid] = all_pos   ? DirectionVerdict::FixedPositive
                    : all_neg ? DirectionVerdict::FixedNegative
                              : DirectionVerdict::Free;
  }
  return verdicts;
}

struct LineLoading {
  int branch_id;
  double max_frac;  // max |flow|/smax over scenarios
};

// Candidates plus every other line whose loading ever reaches the threshold.
inline std::vector<int> select_monitored_lines(const NetworkCase& c,
                                               const std::vector<MarketOutcome>& outcomes,
                                               const std::vector<int>& candidate_branches,
                                               double threshold,
                                               std::vector<LineLoading>* loadings = nullptr) {
  std::set<int> cand(candidate_branches.begin(), candidate_branches.end());
  std::vector<int> monitored;
  for (const auto& b : c.branches) {
    double frac = 0;
    for (const auto& out : outcomes)
      frac = std::max(frac, std::abs(out.flow_mw.at(b.id)) / b.smax);
    if (loadings) loadings->push_back({b.id, frac});
    if (cand.count(b.id) || frac >= threshold) monitored.push_back(b.id);
  }
  return monitored;
}

struct ScreeningReport {
  std::vector<std::vector<double>> eta;      // [scenario][branch]
  std::vector<double> fd_gap;                // per scenario: max relative h vs h/2 drift
  std::vector<RankedBranch> vsr_rank, pst_rank;
  std::map<int, DirectionVerdict> directions;  // per VSR candidate
  std::vector<int> monitored;
  std::vector<LineLoading> loadings;
  std::vector<MarketOutcome> base_outcomes;    // devices-off, per scenario
};

// Full pass: devices-off solves, sensitivities, both rankings, direction
// verdicts for the reactor list, and the monitored set.
inline ScreeningReport run_screening(const NetworkCase& c, const ScenarioSet& scen,
                                     const ScreeningOptions& opt = {}) {
  ScreeningReport rep;
  std::vector<double> hours;
  for (const auto& s : scen.scenarios) {
    MarketOptions mo;
    mo.formulation = Formulation::Btheta;
    mo.shed_cost = opt.shed_cost;
    mo.wind_scale = opt.wind_scale;
    auto mm = build_market_model(c, s, {}, mo);
    rep.base_outcomes.push_back(solve_market(mm));
    rep.eta.push_back(reactance_sensitivity(c, s, opt));
    if (opt.fd_consistency) {
      auto half = reactance_sensitivity(c, s, opt, opt.fd_step_frac / 2.0);
      double gap = 0;
      for (size_t k = 0; k < half.size(); ++k)
        gap = std::max(gap, std::abs(rep.eta.back()[k] - half[k]) /
                                std::max(1.0, std::abs(half[k])));
      rep.fd_gap.push_back(gap);
    }
    hours.push_back(s.hours);
  }
  rep.vsr_rank = weighted_rank(c, rep.eta, hours, opt.top_n);
  rep.pst_rank = rep.vsr_rank;  // same cost-sensitivity heuristic drives both lists
  std::vector<int> vsr_ids;
  for (const auto& r : rep.vsr_rank) vsr_ids.push_back(r.branch_id);
  rep.directions = fix_flow_directions(c, rep.base_outcomes, vsr_ids, opt.direction_deadband);
  rep.monitored = select_monitored_lines(c, rep.base_outcomes, vsr_ids, opt.loading_threshold,
                                         &rep.loadings);
  return rep;
}

// Applies direction verdicts to a catalog built from the ranked candidates.
inline void apply_directions(DeviceCatalog& cat, const std::map<int, DirectionVerdict>& verdicts) {
  for (auto& v : cat.vsr) {
    auto it = verdicts.find(v.branch_id);
    if (it == verdicts.end()) continue;
    v.fixed_direction = it->second == DirectionVerdict::FixedPositive   ? +1
                        : it->second == DirectionVerdict::FixedNegative ? -1
                                                                        : 0;
  }
}

struct AuditViolation {
  int scenario_id;
  int branch_id;
  double flow_mw;
  double smax_mw;
};

// Post-hoc audit of the monitored-line reduction: re-dispatch each scenario
// on the reduced model at the final build plan, then recompute every line
// flow from the full factor matrix and flag excluded-line overloads.
inline std::vector<AuditViolation> audit_reduction(const NetworkCase& c, const ScenarioSet& scen,
                                                   const DeviceCatalog& cat,
                                                   const std::vector<int>& monitored,
                                                   const std::vector<double>& x,
                                                   const MarketOptions& base_opt = {},
                                                   double tol = 1e-6) {
  std::vector<AuditViolation> bad;
  auto Hfull = compute_ptdf(c);
  std::set<int> mon;
  for (const auto& s : scen.scenarios) {
    MarketOptions mo = base_opt;
    mo.formulation = Formulation::ShiftFactor;
    mo.monitor_lines = monitored;
    auto mm = build_lower_level(c, s, cat, mo);
    // candidate lines are always joined into the constrained set
    mon.insert(mm.monitored.begin(), mm.monitored.end());
    auto out = solve_market(mm, x);
    // nodal injections from the reduced dispatch
    std::vector<double> inj(c.n_buses(), 0.0);
    for (size_t n = 0; n < c.generators.size(); ++n)
      inj[c.bus_index(c.generators[n].bus)] += out.gen_mw[n];
    for (size_t w = 0; w < c.wind_farms.size(); ++w)
      inj[c.bus_index(c.wind_farms[w].bus)] += out.wind_mw[w];
    for (size_t l = 0; l < c.loads.size(); ++l)
      inj[c.bus_index(c.loads[l].bus)] += out.shed_mw[l] - mm.load_mw[l];
    // device transfer pairs
    auto transfer = [&](int bid, double psi) {
      const Branch& b = c.branches[c.branch_index(bid)];
      inj[c.bus_index(b.from)] -= psi;
      inj[c.bus_index(b.to)] += psi;
    };
    for (const auto& [bid, psi] : out.vsr_psi_mw) transfer(bid, psi);
    for (const auto& [bid, psi] : out.pst_psi_mw) transfer(bid, psi);
    for (const auto& b : c.branches) {
      double f = 0;
      const int row = Hfull.row(b.id);
      for (int i = 0; i < c.n_buses(); ++i) f += Hfull.h(row, i) * inj[i];
      // device injection adds to the physical flow on its own line
      auto iv = out.vsr_psi_mw.find(b.id);
      if (iv != out.vsr_psi_mw.end()) f += iv->second;
      auto ip = out.pst_psi_mw.find(b.id);
      if (ip != out.pst_psi_mw.end()) f += ip->second;
      if (std::abs(f) > b.smax + tol && !mon.count(b.id))
        bad.push_back({s.id, b.id, f, b.smax});
    }
  }
  return bad;
}

// Structured text export: rankings, verdicts, monitored set.
inline std::string screening_report_text(const NetworkCase& c, const ScreeningReport& rep) {
  std::ostringstream os;
  os << "candidate ranking (hour-weighted |cost sensitivity|, $)\n";
  os << "  rank  branch  from-to      weight\n";
  for (size_t i = 0; i < rep.vsr_rank.size(); ++i) {
    const Branch& b = c.branches[c.branch_index(rep.vsr_rank[i].branch_id)];
    os << "  " << fmt_fixed(double(i + 1), 0) << "     " << b.id << "      " << b.from << "-"
       << b.to << "      " << fmt_fixed(rep.vsr_rank[i].weighted_eta, 2) << "\n";
  }
  os << "flow directions\n";
  for (const auto& [bid, v] : rep.directions)
    os << "  branch " << bid << ": " << verdict_name(v) << "\n";
  os << "monitored lines (" << rep.monitored.size() << " of " << c.n_branches() << ")\n  ";
  for (size_t i = 0; i < rep.monitored.size(); ++i)
    os << rep.monitored[i] << (i + 1 < rep.monitored.size() ? " " : "\n");
  if (!rep.fd_gap.empty()) {
    double worst = *std::max_element(rep.fd_gap.begin(), rep.fd_gap.end());
    os << "sensitivity step-halving drift: " << fmt_g(worst) << "\n";
  }
  return os.str();
}

}  // namespace facts
