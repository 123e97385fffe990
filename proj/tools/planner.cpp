// Command-line front end: argument parsing and dispatch only; the command
// bodies live in the library so tests can drive them in process.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "facts/cli.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> set_pairs;
  std::vector<std::pair<std::string, std::string>> flags;
};

// Dedicated flags shadow config keys; remember only the ones the user typed.
void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("-c,--config", a.config_path, "key = value configuration file");
  cmd->add_option("--set", a.set_pairs, "override one configuration key (key=value)")
      ->take_all();
  auto key_flag = [cmd, &a](const std::string& names, const std::string& key,
                            const std::string& help) {
    cmd->add_option_function<std::string>(
        names, [&a, key](const std::string& v) { a.flags.emplace_back(key, v); }, help);
  };
  key_flag("--case", "case", "network case file");
  key_flag("--scenarios", "scenarios", "pre-reduced scenario table");
  key_flag("--profiles", "profiles", "hourly profile file to cluster");
  key_flag("--out", "output_dir", "report directory");
  key_flag("--clusters", "scenario.clusters", "number of representative scenarios");
  key_flag("--seed", "scenario.seed", "clustering seed");
  key_flag("--nv", "budget.vsr", "reactor budget");
  key_flag("--np", "budget.pst", "shifter budget");
  key_flag("--epsilon", "ccg.epsilon", "relative stopping gap");
  key_flag("--max-iter", "ccg.max_iter", "iteration cap");
  key_flag("--time-limit", "ccg.mp_time_limit_s", "master time limit, seconds");
  key_flag("--formulation", "market.formulation", "btheta or shift_factor");
  key_flag("--fix-directions", "reduce.fix_directions", "selector fixing on/off");
  key_flag("--monitor-lines", "reduce.monitor_lines", "monitored-line reduction on/off");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transmission series-device planning under wind uncertainty"};
  app.require_subcommand(1);

  CommonArgs plan_args, dcopf_args, screen_args;
  int dcopf_scenario = -1;
  std::string import_in, import_out = "case.txt";

  CLI::App* plan = app.add_subcommand("plan", "co-optimize reactor and shifter placement");
  add_common(plan, plan_args);
  CLI::App* dcopf = app.add_subcommand("dcopf", "devices-off clearing of one scenario");
  add_common(dcopf, dcopf_args);
  dcopf->add_option("--scenario", dcopf_scenario, "scenario id (default: first)");
  CLI::App* screen = app.add_subcommand("screen", "rank candidate branches");
  add_common(screen, screen_args);
  CLI::App* import = app.add_subcommand("import-case", "convert a MATPOWER .m case");
  import->add_option("input", import_in, "MATPOWER case file")->required();
  import->add_option("-o,--output", import_out, "native case file to write");

  CLI11_PARSE(app, argc, argv);

  return facts::run_guarded(std::cerr, [&]() -> int {
    if (plan->parsed()) {
      auto cfg = facts::load_run_config(plan_args.config_path, plan_args.set_pairs,
                                        plan_args.flags);
      return facts::cmd_plan(cfg, std::cout).exit_code;
    }
    if (dcopf->parsed()) {
      auto cfg = facts::load_run_config(dcopf_args.config_path, dcopf_args.set_pairs,
                                        dcopf_args.flags);
      facts::cmd_dcopf(cfg, dcopf_scenario, std::cout);
      return facts::kExitOk;
    }
    if (screen->parsed()) {
      auto cfg = facts::load_run_config(screen_args.config_path, screen_args.set_pairs,
                                        screen_args.flags);
      facts::cmd_screen(cfg, std::cout);
      return facts::kExitOk;
    }
    facts::cmd_import(import_in, import_out, std::cout);
    return facts::kExitOk;
  });
}
