#pragma once

// Human-readable and machine-readable renderings of planning results: the
// fixed-width plan report, per-iteration CSV, per-scenario curtailment CSV,
// a JSON mirror of all of it, and the single-snapshot dispatch dump.

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "facts/bilevel.hpp"
#include "facts/market.hpp"

namespace facts {

namespace detail {

inline std::string money_m(double dollars) { return fmt_fixed(dollars / 1e6, 4) + " M$"; }

inline void branch_list_line(std::ostream& os, const char* label,
                             const std::map<int, int>& build, int budget) {
  int built = 0;
  std::ostringstream ids;
  for (const auto& [branch, on] : build)
    if (on) {
      ids << (built ? ", " : "") << "branch " << branch;
      ++built;
    }
  os << "  " << label << built << " of budget " << budget;
  if (built) os << "  (" << ids.str() << ")";
  os << "\n";
}

}  // namespace detail

inline std::string plan_report_text(const PlanReport& plan, const CcgState& st,
                                    const std::vector<std::string>& header,
                                    const std::vector<std::string>& warnings,
                                    int n_vsr_budget, int n_pst_budget) {
  std::ostringstream os;
  os << "transmission device plan\n";
  for (const auto& line : header) os << "  " << line << "\n";
  os << "\n";

  os << "placements\n";
  detail::branch_list_line(os, "series reactors   ", plan.vsr_build, n_vsr_budget);
  detail::branch_list_line(os, "phase shifters    ", plan.pst_build, n_pst_budget);
  os << "\n";

  os << "annual costs\n";
  os << "  reactor investment   " << std::setw(14) << detail::money_m(plan.invest_vsr) << "\n";
  os << "  shifter investment   " << std::setw(14) << detail::money_m(plan.invest_pst) << "\n";
  os << "  operating penalty    " << std::setw(14) << detail::money_m(plan.operating_cost)
     << "\n";
  os << "  total objective      " << std::setw(14) << detail::money_m(plan.objective) << "\n";
  os << "\n";

  os << "annual energy\n";
  os << "  load served          " << fmt_fixed(plan.annual_load_mwh - plan.total_shed_mwh, 1)
     << " MWh\n";
  os << "  load shed            " << fmt_fixed(plan.total_shed_mwh, 1) << " MWh\n";
  os << "  wind dispatched      " << fmt_fixed(plan.annual_wind_mwh, 1) << " MWh\n";
  os << "  wind curtailed       " << fmt_fixed(plan.total_curtailment_mwh, 1) << " MWh\n";
  for (const auto& [farm, mwh] : plan.farm_curtailment_mwh)
    os << "    farm " << farm << "            " << fmt_fixed(mwh, 1) << " MWh\n";
  os << "  wind penetration     " << fmt_fixed(plan.wind_penetration, 4) << "\n";
  os << "\n";

  os << "algorithm\n";
  os << "  status " << plan.status << ", " << plan.iterations << " iterations, gap "
     << fmt_g(plan.gap) << "\n";
  os << "  master " << fmt_fixed(plan.mp_seconds, 2) << " s, subproblems "
     << fmt_fixed(plan.sp_seconds, 2) << " s, wall " << fmt_fixed(plan.wall_seconds, 2)
     << " s\n";
  os << "\n" << iteration_log_text(st);

  if (!warnings.empty()) {
    os << "\nwarnings\n";
    for (const auto& w : warnings) os << "  " << w << "\n";
  }
  return os.str();
}

inline nlohmann::json plan_report_json(const PlanReport& plan, const CcgState& st,
                                       const std::vector<std::string>& header,
                                       const std::vector<std::string>& warnings) {
  nlohmann::json j;
  j["header"] = header;
  j["plan"]["x"] = plan.x;
  for (const auto& [branch, on] : plan.vsr_build)
    j["plan"]["vsr"][std::to_string(branch)] = on;
  for (const auto& [branch, on] : plan.pst_build)
    j["plan"]["pst"][std::to_string(branch)] = on;
  j["costs"]["invest_vsr"] = plan.invest_vsr;
  j["costs"]["invest_pst"] = plan.invest_pst;
  j["costs"]["operating"] = plan.operating_cost;
  j["costs"]["objective"] = plan.objective;
  j["energy"]["load_mwh"] = plan.annual_load_mwh;
  j["energy"]["shed_mwh"] = plan.total_shed_mwh;
  j["energy"]["wind_mwh"] = plan.annual_wind_mwh;
  j["energy"]["curtailed_mwh"] = plan.total_curtailment_mwh;
  for (const auto& [farm, mwh] : plan.farm_curtailment_mwh)
    j["energy"]["curtailed_per_farm_mwh"][std::to_string(farm)] = mwh;
  j["energy"]["wind_penetration"] = plan.wind_penetration;
  j["algorithm"]["status"] = plan.status;
  j["algorithm"]["iterations"] = plan.iterations;
  j["algorithm"]["gap"] = plan.gap;
  j["algorithm"]["mp_seconds"] = plan.mp_seconds;
  j["algorithm"]["sp_seconds"] = plan.sp_seconds;
  j["algorithm"]["wall_seconds"] = plan.wall_seconds;
  j["iterations"] = nlohmann::json::array();
  for (const auto& it : st.log)
    j["iterations"].push_back({{"iter", it.q},
                               {"lb", it.lb},
                               {"ub", it.ub},
                               {"gap", it.gap},
                               {"mp_seconds", it.mp_seconds},
                               {"sp_seconds", it.sp_seconds},
                               {"new_point", it.new_point}});
  j["warnings"] = warnings;
  return j;
}

inline void write_iterations_csv(std::ostream& os, const CcgState& st) {
  os << "iter,lb,ub,gap,mp_seconds,sp_seconds,new_point\n";
  for (const auto& it : st.log)
    os << it.q << "," << fmt_full(it.lb) << "," << fmt_full(it.ub) << "," << fmt_full(it.gap)
       << "," << fmt_full(it.mp_seconds) << "," << fmt_full(it.sp_seconds) << ","
       << (it.new_point ? 1 : 0) << "\n";
}

// Per-scenario dispatch series at the final plan, one row per scenario:
// everything needed for curtailment-by-scenario charts.
inline void write_curtailment_csv(std::ostream& os, const CompactForm& cf,
                                  const std::vector<ScenarioSolution>& sols) {
  if (sols.size() != cf.scen.size())
    throw Error("curtailment series needs one solution per scenario");
  os << "scenario,hours,load_mw,wind_available_mw,wind_dispatched_mw,wind_spilled_mw,"
        "load_shed_mw";
  for (const auto& farm : cf.net->wind_farms) os << ",spill_farm" << farm.id << "_mw";
  os << "\n";
  for (size_t t = 0; t < cf.scen.size(); ++t) {
    const auto& cs = cf.scen[t];
    const auto& y = sols[t].y;
    double avail = 0, wind = 0, spill = 0, shed = 0;
    for (double a : cs.wind_avail_mw) avail += a;
    for (int col : cs.wind_cols) wind += std::max(0.0, y[col]);
    for (int col : cs.spill_cols) spill += std::max(0.0, y[col]);
    for (int col : cs.shed_cols) shed += std::max(0.0, y[col]);
    os << cs.id << "," << fmt_full(cs.hours) << "," << fmt_full(cs.total_load_mw) << ","
       << fmt_full(avail) << "," << fmt_full(wind) << "," << fmt_full(spill) << ","
       << fmt_full(shed);
    for (int col : cs.spill_cols) os << "," << fmt_full(std::max(0.0, y[col]));
    os << "\n";
  }
}

// Single-snapshot dispatch dump for the dcopf command.
inline std::string market_outcome_text(const MarketModel& mm, const MarketOutcome& out) {
  const NetworkCase& c = *mm.net;
  std::ostringstream os;
  os << "market clearing, scenario " << mm.scenario_id << " ("
     << (mm.formulation == Formulation::ShiftFactor ? "shift-factor" : "btheta")
     << " formulation)\n";
  os << "  objective " << fmt_fixed(out.objective, 4) << " $/h\n\n";

  os << "generation\n";
  for (size_t n = 0; n < c.generators.size(); ++n)
    os << "  gen " << std::setw(3) << c.generators[n].id << "  bus " << std::setw(3)
       << c.generators[n].bus << "  " << std::setw(10) << fmt_fixed(out.gen_mw[n], 3)
       << " MW  at " << fmt_g(c.generators[n].cost) << " $/MWh\n";

  if (!out.wind_mw.empty()) {
    os << "\nwind\n";
    for (size_t w = 0; w < c.wind_farms.size(); ++w)
      os << "  farm " << std::setw(2) << c.wind_farms[w].id << "  bus " << std::setw(3)
         << c.wind_farms[w].bus << "  available " << std::setw(9)
         << fmt_fixed(mm.wind_avail_mw[w], 3) << " MW  dispatched " << std::setw(9)
         << fmt_fixed(out.wind_mw[w], 3) << " MW  spilled " << std::setw(9)
         << fmt_fixed(out.spill_mw[w], 3) << " MW\n";
  }
  if (!out.shed_mw.empty()) {
    os << "\nshedding\n";
    for (size_t l = 0; l < c.loads.size(); ++l)
      os << "  load " << std::setw(2) << c.loads[l].id << "  bus " << std::setw(3)
         << c.loads[l].bus << "  demand " << std::setw(9) << fmt_fixed(mm.load_mw[l], 3)
         << " MW  shed " << std::setw(9) << fmt_fixed(out.shed_mw[l], 3) << " MW\n";
  }

  os << "\nflows (* binding)\n";
  for (const auto& b : c.branches) {
    auto it = out.eff_flow_mw.find(b.id);
    if (it == out.eff_flow_mw.end()) continue;  // outside the monitored set
    const double f = it->second;
    const bool binding = std::abs(f) >= b.smax - 1e-6;
    os << "  line " << std::setw(3) << b.id << "  " << std::setw(3) << b.from << " -> "
       << std::setw(3) << b.to << "  " << std::setw(10) << fmt_fixed(f, 3) << " / "
       << std::setw(8) << fmt_fixed(b.smax, 1) << " MW" << (binding ? "  *" : "") << "\n";
  }

  bool any_dev = !out.vsr_psi_mw.empty() || !out.pst_psi_mw.empty();
  if (any_dev) {
    os << "\ndevice injections\n";
    for (const auto& [branch, psi] : out.vsr_psi_mw)
      os << "  reactor branch " << branch << "  psi " << fmt_fixed(psi, 3) << " MW  db "
         << fmt_fixed(out.vsr_db.at(branch), 4) << "\n";
    for (const auto& [branch, psi] : out.pst_psi_mw)
      os << "  shifter branch " << branch << "  psi " << fmt_fixed(psi, 3) << " MW  angle "
         << fmt_fixed(out.pst_angle_deg.at(branch), 3) << " deg\n";
  }
  return os.str();
}

}  // namespace facts
