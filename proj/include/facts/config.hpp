#pragma once

// Run configuration: a flat key=value file plus command-line overrides,
// resolved into one validated options bundle for the pipeline commands.
//
//   # paths
//   case = data/case6.txt
//   scenarios = data/table1_scenarios.csv   (pre-reduced table)
//   profiles = data/profiles.csv            (hourly; alternative to the above)
//   output_dir = out
//   scenario.clusters = 18
//   scenario.seed = 1
//
//   # plan economics
//   budget.vsr = 2
//   budget.pst = 2
//   cost.spill_per_mwh = 50
//   cost.shed_per_mwh = 5000
//   cost.pst_per_kva = 100
//   finance.rate = 0.05
//   finance.lifetime = 5
//
//   # devices
//   vsr.candidates = auto        (or branch ids: "3 8")
//   pst.candidates = auto
//   vsr.comp_min_frac = -0.7
//   vsr.comp_max_frac = 0.2
//   pst.angle_deg = 10
//   bigm.m1_scale = 2.0
//   bigm.m2_scale = 3.5
//
//   # screening
//   screen.top_n = 10
//   screen.loading_threshold = 0.60
//   screen.direction_deadband = 0.001
//   screen.fd_step_frac = 0.01
//
//   # algorithm
//   ccg.epsilon = 0.001
//   ccg.max_iter = 50
//   ccg.mp_time_limit_s = 10800
//   ccg.m_lambda = 1e5
//   solver.threads = 1
//
//   # model shape
//   market.formulation = shift-factor    (or btheta; dcopf command only)
//   reduce.fix_directions = true
//   reduce.monitor_lines = true
//   wind.scale.<farm_id> = 0.9           (per-farm intensity factor)

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "facts/common.hpp"
#include "facts/devices.hpp"
#include "facts/market.hpp"
#include "facts/screening.hpp"

namespace facts {

struct KeyValues {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv[key] = value; }

  static KeyValues parse(std::istream& in, const std::string& filename = "<stream>") {
    KeyValues out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(filename + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(filename + ":" + std::to_string(lineno) + ": empty key");
      if (out.has(key))
        throw ConfigError(filename + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                          "'");
      out.kv[key] = value;
    }
    return out;
  }

  static KeyValues parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    return parse(f, path);
  }
};

namespace detail {

inline bool config_bool(const std::string& v, const std::string& key) {
  const std::string s = to_lower(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

// numeric parsing with bad values reported as configuration errors
inline long config_int(const std::string& v, const std::string& key) {
  try {
    return parse_int(v, "key '" + key + "'");
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

inline double config_num(const std::string& v, const std::string& key) {
  try {
    return parse_double(v, "key '" + key + "'");
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
}

// "auto", an id list ("3 8" or "3,8"), or empty for no candidates
inline bool config_candidates(const std::string& v, const std::string& key,
                              std::vector<int>& ids) {
  ids.clear();
  if (to_lower(trim(v)) == "auto") return true;
  std::string body = v;
  for (char& ch : body)
    if (ch == ',') ch = ' ';
  for (const auto& tok : tokenize(body))
    ids.push_back(int(config_int(tok, key)));
  return false;
}

}  // namespace detail

struct RunConfig {
  // inputs and outputs
  std::string case_path;
  std::string scenario_path;  // pre-reduced scenario table
  std::string profiles_path;  // hourly profiles to cluster
  std::string output_dir = ".";
  int clusters = 18;
  std::uint64_t seed = 1;

  // plan economics
  int n_vsr_max = 2, n_pst_max = 2;
  double spill_cost = 50.0, shed_cost = 5000.0;
  DeviceParams device;

  // candidate lists; empty with auto set means screening decides
  bool vsr_auto = true, pst_auto = true;
  std::vector<int> vsr_candidates, pst_candidates;

  // screening and algorithm controls
  ScreeningOptions screening;
  double epsilon = 1e-3;
  int max_iter = 50;
  double mp_time_limit_s = 10800.0;
  double m_lambda = 1e5;
  int threads = 1;

  // model shape
  Formulation formulation = Formulation::ShiftFactor;
  bool fix_directions = true;
  bool monitor_reduction = true;
  std::map<int, double> wind_scale;

  void validate() const {
    if (epsilon < 1e-6) throw ConfigError("ccg.epsilon below 1e-6 is not supported");
    if (n_vsr_max < 0 || n_pst_max < 0) throw ConfigError("device budgets must be nonnegative");
    if (max_iter < 1) throw ConfigError("ccg.max_iter must be at least 1");
    if (m_lambda <= 0) throw ConfigError("ccg.m_lambda must be positive");
    if (clusters < 1) throw ConfigError("scenario.clusters must be at least 1");
    if (screening.top_n < 1) throw ConfigError("screen.top_n must be at least 1");
    if (threads < 1) throw ConfigError("solver.threads must be at least 1");
    if (spill_cost < 0 || shed_cost <= 0) throw ConfigError("penalty prices must be positive");
    if (device.rate <= 0 || device.lifetime_years < 1)
      throw ConfigError("finance parameters must be positive");
    if (!scenario_path.empty() && !profiles_path.empty())
      throw ConfigError("set either 'scenarios' or 'profiles', not both");
    for (const auto& [farm, scale] : wind_scale)
      if (scale < 0)
        throw ConfigError("wind.scale." + std::to_string(farm) + " must be nonnegative");
  }
};

inline RunConfig make_run_config(const KeyValues& k) {
  RunConfig c;
  std::set<std::string> seen;
  auto str = [&](const char* key, std::string& out) {
    if (k.has(key)) {
      out = k.kv.at(key);
      seen.insert(key);
    }
  };
  auto num = [&](const char* key, double& out) {
    if (k.has(key)) {
      out = detail::config_num(k.kv.at(key), key);
      seen.insert(key);
    }
  };
  auto whole = [&](const char* key, int& out) {
    if (k.has(key)) {
      out = int(detail::config_int(k.kv.at(key), key));
      seen.insert(key);
    }
  };
  auto flag = [&](const char* key, bool& out) {
    if (k.has(key)) {
      out = detail::config_bool(k.kv.at(key), key);
      seen.insert(key);
    }
  };

  str("case", c.case_path);
  str("scenarios", c.scenario_path);
  str("profiles", c.profiles_path);
  str("output_dir", c.output_dir);
  whole("scenario.clusters", c.clusters);
  if (k.has("scenario.seed")) {
    c.seed = std::uint64_t(detail::config_int(k.kv.at("scenario.seed"), "scenario.seed"));
    seen.insert("scenario.seed");
  }

  whole("budget.vsr", c.n_vsr_max);
  whole("budget.pst", c.n_pst_max);
  num("cost.spill_per_mwh", c.spill_cost);
  num("cost.shed_per_mwh", c.shed_cost);
  num("cost.pst_per_kva", c.device.pst_cost_per_kva);
  num("finance.rate", c.device.rate);
  int lifetime = c.device.lifetime_years;
  whole("finance.lifetime", lifetime);
  c.device.lifetime_years = lifetime;

  if (k.has("vsr.candidates")) {
    c.vsr_auto = detail::config_candidates(k.kv.at("vsr.candidates"), "vsr.candidates",
                                           c.vsr_candidates);
    seen.insert("vsr.candidates");
  }
  if (k.has("pst.candidates")) {
    c.pst_auto = detail::config_candidates(k.kv.at("pst.candidates"), "pst.candidates",
                                           c.pst_candidates);
    seen.insert("pst.candidates");
  }
  num("vsr.comp_min_frac", c.device.comp_min_frac);
  num("vsr.comp_max_frac", c.device.comp_max_frac);
  num("pst.angle_deg", c.device.angle_max_deg);
  num("bigm.m1_scale", c.device.m1_scale);
  num("bigm.m2_scale", c.device.m2_scale);

  whole("screen.top_n", c.screening.top_n);
  num("screen.loading_threshold", c.screening.loading_threshold);
  num("screen.direction_deadband", c.screening.direction_deadband);
  num("screen.fd_step_frac", c.screening.fd_step_frac);

  num("ccg.epsilon", c.epsilon);
  whole("ccg.max_iter", c.max_iter);
  num("ccg.mp_time_limit_s", c.mp_time_limit_s);
  num("ccg.m_lambda", c.m_lambda);
  whole("solver.threads", c.threads);

  if (k.has("market.formulation")) {
    const std::string f = to_lower(k.kv.at("market.formulation"));
    if (f == "shift-factor" || f == "shift_factor" || f == "sf")
      c.formulation = Formulation::ShiftFactor;
    else if (f == "btheta" || f == "b-theta")
      c.formulation = Formulation::Btheta;
    else
      throw ConfigError("key 'market.formulation': expected shift-factor or btheta, got '" +
                        k.kv.at("market.formulation") + "'");
    seen.insert("market.formulation");
  }
  flag("reduce.fix_directions", c.fix_directions);
  flag("reduce.monitor_lines", c.monitor_reduction);

  for (const auto& [key, value] : k.kv) {
    const std::string pre = "wind.scale.";
    if (key.rfind(pre, 0) == 0) {
      const int farm = int(detail::config_int(key.substr(pre.size()), key));
      c.wind_scale[farm] = detail::config_num(value, key);
      seen.insert(key);
    }
  }
  for (const auto& [key, value] : k.kv)
    if (!seen.count(key)) throw ConfigError("unknown config key '" + key + "'");

  c.screening.shed_cost = c.shed_cost;
  c.screening.wind_scale = c.wind_scale;
  c.validate();
  return c;
}

// Report-header echo of the settings that shape a run.
inline std::vector<std::string> config_echo(const RunConfig& c) {
  std::vector<std::string> out;
  out.push_back("case: " + c.case_path);
  if (!c.scenario_path.empty()) out.push_back("scenarios: " + c.scenario_path);
  if (!c.profiles_path.empty())
    out.push_back("profiles: " + c.profiles_path + " (clusters " + std::to_string(c.clusters) +
                  ", seed " + std::to_string(c.seed) + ")");
  out.push_back("budgets: " + std::to_string(c.n_vsr_max) + " reactors, " +
                std::to_string(c.n_pst_max) + " shifters");
  out.push_back("penalties: " + fmt_g(c.spill_cost) + " $/MWh spill, " + fmt_g(c.shed_cost) +
                " $/MWh shed");
  out.push_back(std::string("candidates: reactors ") +
                (c.vsr_auto ? "auto" : std::to_string(c.vsr_candidates.size()) + " pinned") +
                ", shifters " +
                (c.pst_auto ? "auto" : std::to_string(c.pst_candidates.size()) + " pinned"));
  out.push_back(std::string("reductions: direction fixing ") +
                (c.fix_directions ? "on" : "off") + ", line monitoring " +
                (c.monitor_reduction ? "on" : "off"));
  out.push_back("stopping gap: " + fmt_g(c.epsilon) + ", max iterations " +
                std::to_string(c.max_iter));
  return out;
}

}  // namespace facts
