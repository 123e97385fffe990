#pragma once

// Subcommand implementations behind the planning tool. Each cmd_* consumes a
// validated RunConfig, runs one workflow end to end, writes its report files
// under output_dir, and returns the structured result for callers that want
// to inspect it in process. Exit-code policy lives in run_guarded.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "facts/config.hpp"
#include "facts/matpower.hpp"
#include "facts/report.hpp"
#include "facts/screening.hpp"

namespace facts {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,  // unusable input: config, case, scenario, or argument
  kExitSolver = 3,  // a clearing or master solve failed outright
  kExitGap = 4,     // finished without certifying the stopping gap
};

// Maps the error hierarchy onto process exit codes; everything a user can fix
// by editing inputs exits 2, internal solve failures exit 3.
inline int run_guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SolveError& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

// Config assembly with the override chain: file keys, then --set pairs, then
// dedicated flags (already mapped to their key names by the caller).
inline RunConfig load_run_config(const std::string& config_path,
                                 const std::vector<std::string>& set_pairs,
                                 const std::vector<std::pair<std::string, std::string>>& flags) {
  KeyValues kv;
  if (!config_path.empty()) kv = KeyValues::parse_file(config_path);
  for (const auto& pair : set_pairs) {
    auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + pair + "'");
    kv.set(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
  }
  for (const auto& [key, value] : flags) kv.set(key, value);
  return make_run_config(kv);
}

namespace detail {

inline ScenarioSet load_scenarios(const RunConfig& cfg) {
  if (!cfg.scenario_path.empty()) return read_scenario_file(cfg.scenario_path);
  if (!cfg.profiles_path.empty())
    return build_scenario_set(read_profiles_file(cfg.profiles_path), cfg.clusters, cfg.seed);
  throw ConfigError("no scenario source: set scenarios= or profiles=");
}

inline std::filesystem::path output_file(const RunConfig& cfg, const std::string& name) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

inline std::vector<int> ranked_ids(const std::vector<RankedBranch>& rank, int top_n) {
  std::vector<int> ids;
  for (const auto& r : rank) {
    if (int(ids.size()) >= top_n) break;
    ids.push_back(r.branch_id);
  }
  return ids;
}

}  // namespace detail

struct PlanRun {
  PlanReport plan;
  CcgState state;
  ScreeningReport screen;
  std::vector<int> vsr_candidates, pst_candidates;
  std::vector<std::string> header, warnings;
  int exit_code = kExitOk;
};

// Full planning workflow: case -> scenarios -> candidate screening ->
// catalog -> column-and-constraint generation -> reports.
inline PlanRun cmd_plan(const RunConfig& cfg, std::ostream& log) {
  if (cfg.case_path.empty()) throw ConfigError("no network case: set case=");
  NetworkCase net = NetworkCase::parse_file(cfg.case_path);
  ScenarioSet scen = detail::load_scenarios(cfg);
  log << "case " << cfg.case_path << ": " << net.n_buses() << " buses, "
      << net.branches.size() << " branches; " << scen.scenarios.size() << " scenarios\n";

  PlanRun run;
  const bool screened = cfg.vsr_auto || cfg.pst_auto;
  if (screened) {
    log << "screening candidate branches\n";
    run.screen = run_screening(net, scen, cfg.screening);
    detail::write_text_file(detail::output_file(cfg, "screening_report.txt"),
                            screening_report_text(net, run.screen));
  } else {
    // pinned lists still need devices-off clearings for directions and the
    // monitored set, but not the sensitivity probes
    for (const auto& s : scen.scenarios)
      run.screen.base_outcomes.push_back(screening_solve(net, s, cfg.screening));
  }
  run.vsr_candidates = cfg.vsr_auto
                           ? detail::ranked_ids(run.screen.vsr_rank, cfg.screening.top_n)
                           : cfg.vsr_candidates;
  run.pst_candidates = cfg.pst_auto
                           ? detail::ranked_ids(run.screen.pst_rank, cfg.screening.top_n)
                           : cfg.pst_candidates;
  // direction verdicts and the monitored set always reflect the final lists
  std::vector<int> watch = run.vsr_candidates;
  watch.insert(watch.end(), run.pst_candidates.begin(), run.pst_candidates.end());
  run.screen.directions = fix_flow_directions(net, run.screen.base_outcomes, run.vsr_candidates,
                                              cfg.screening.direction_deadband);
  run.screen.loadings.clear();
  run.screen.monitored = select_monitored_lines(net, run.screen.base_outcomes, watch,
                                                cfg.screening.loading_threshold,
                                                &run.screen.loadings);

  DeviceCatalog cat = build_catalog(net, run.vsr_candidates, run.pst_candidates, cfg.device);
  if (cfg.fix_directions) apply_directions(cat, run.screen.directions);

  BilevelOptions bopt;
  bopt.n_vsr_max = cfg.n_vsr_max;
  bopt.n_pst_max = cfg.n_pst_max;
  bopt.spill_cost = cfg.spill_cost;
  bopt.shed_cost = cfg.shed_cost;
  bopt.m_lambda = cfg.m_lambda;
  bopt.epsilon = cfg.epsilon;
  bopt.max_iter = cfg.max_iter;
  bopt.mp_time_limit_s = cfg.mp_time_limit_s;
  bopt.wind_scale = cfg.wind_scale;
  if (cfg.monitor_reduction) bopt.monitor_lines = run.screen.monitored;

  CompactForm cf = assemble_compact(net, scen, cat, bopt);
  log << "solving: " << cf.n_x() << " build decisions, " << scen.scenarios.size()
      << " scenario blocks\n";
  CcgReport ccg = run_ccg(cf, bopt);
  run.plan = ccg.plan;
  run.state = std::move(ccg.state);
  run.warnings = run.state.warnings;

  if (cfg.monitor_reduction) {
    // re-check every unmodeled line at the chosen plan
    MarketOptions base;
    base.shed_cost = cfg.shed_cost;
    base.wind_scale = cfg.wind_scale;
    std::vector<double> xd(run.plan.x.begin(), run.plan.x.end());
    for (const auto& v : audit_reduction(net, scen, cat, run.screen.monitored, xd, base))
      run.warnings.push_back("scenario " + std::to_string(v.scenario_id) + " line " +
                             std::to_string(v.branch_id) + " reaches " +
                             fmt_fixed(v.flow_mw, 1) + " MW over its " +
                             fmt_fixed(v.smax_mw, 1) + " MW rating");
  }

  run.header = config_echo(cfg);
  run.header.push_back("scenarios " + std::to_string(scen.scenarios.size()) + ", " +
                       fmt_g(scen.total_hours()) + " h represented");

  detail::write_text_file(
      detail::output_file(cfg, "plan_report.txt"),
      plan_report_text(run.plan, run.state, run.header, run.warnings, cfg.n_vsr_max,
                       cfg.n_pst_max));
  detail::write_text_file(
      detail::output_file(cfg, "plan_report.json"),
      plan_report_json(run.plan, run.state, run.header, run.warnings).dump(2) + "\n");
  {
    std::ofstream os(detail::output_file(cfg, "iterations.csv"));
    write_iterations_csv(os, run.state);
  }
  {
    std::ofstream os(detail::output_file(cfg, "curtailment.csv"));
    write_curtailment_csv(os, cf, run.state.best_sols);
  }
  log << "status " << run.state.status << ", objective "
      << detail::money_m(run.plan.objective) << ", reports in " << cfg.output_dir << "\n";
  run.exit_code = run.state.status == "converged" ? kExitOk : kExitGap;
  return run;
}

// Devices-off clearing of one scenario, full constraint set, for inspecting
// dispatch, flows, and curtailment before any investment.
inline MarketOutcome cmd_dcopf(const RunConfig& cfg, int scenario_id, std::ostream& log) {
  if (cfg.case_path.empty()) throw ConfigError("no network case: set case=");
  NetworkCase net = NetworkCase::parse_file(cfg.case_path);
  ScenarioSet scen = detail::load_scenarios(cfg);
  const Scenario* pick = nullptr;
  for (const auto& s : scen.scenarios)
    if (scenario_id < 0 ? pick == nullptr : s.id == scenario_id) pick = &s;
  if (!pick) throw ConfigError("scenario " + std::to_string(scenario_id) + " not in the set");

  MarketOptions mo;
  mo.formulation = cfg.formulation;
  mo.shed_cost = cfg.shed_cost;
  mo.wind_scale = cfg.wind_scale;
  MarketModel mm = build_market_model(net, *pick, {}, mo);
  MarketOutcome out = solve_market(mm);
  const std::string text = market_outcome_text(mm, out);
  detail::write_text_file(
      detail::output_file(cfg, "dcopf_scenario" + std::to_string(pick->id) + ".txt"), text);
  log << text;
  return out;
}

// Screening pass alone: rankings, direction verdicts, monitored set.
inline ScreeningReport cmd_screen(const RunConfig& cfg, std::ostream& log) {
  if (cfg.case_path.empty()) throw ConfigError("no network case: set case=");
  NetworkCase net = NetworkCase::parse_file(cfg.case_path);
  ScenarioSet scen = detail::load_scenarios(cfg);
  ScreeningReport rep = run_screening(net, scen, cfg.screening);
  const std::string text = screening_report_text(net, rep);
  detail::write_text_file(detail::output_file(cfg, "screening_report.txt"), text);
  log << text;
  return rep;
}

// MATPOWER case conversion into the native text format.
inline NetworkCase cmd_import(const std::string& in_path, const std::string& out_path,
                              std::ostream& log) {
  NetworkCase net = import_matpower_file(in_path);
  std::ofstream os(out_path);
  if (!os) throw Error("cannot write " + out_path);
  os << case_to_text(net);
  log << "imported " << net.n_buses() << " buses, " << net.branches.size() << " branches, "
      << net.generators.size() << " generators to " << out_path << "\n";
  return net;
}

}  // namespace facts
