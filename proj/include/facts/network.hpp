#pragma once

// Transmission network data: case schema, parsing/validation, branch
// susceptances, PTDF (shift-factor) matrices, and reference-bus DC flow
// solves. Susceptances are stored positive: b_k = 1/x_k with x_k > 0.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "facts/common.hpp"

namespace facts {

struct Bus {
  int id;
  bool reference = false;
};

struct Branch {
  int id;
  int from, to;   // bus ids
  double x;       // series reactance, p.u. (> 0)
  double smax;    // thermal limit, MW (> 0)
};

struct Generator {
  int id;
  int bus;
  double cost;  // $/MWh
  double pmin, pmax;  // MW
};

struct Load {
  int id;
  int bus;
  double peak;  // MW
};

struct WindFarm {
  int id;
  int bus;
  double capacity;  // MW
};

class NetworkCase {
 public:
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<WindFarm> wind_farms;

  // Build index maps and check every schema rule; throws ValidationError.
  void validate() {
    bus_idx_.clear();
    branch_idx_.clear();
    gen_idx_.clear();
    load_idx_.clear();
    wind_idx_.clear();
    if (buses.empty()) throw ValidationError("case has no buses");
    if (base_mva <= 0) throw ValidationError("base_mva must be positive");
    int refs = 0;
    for (int i = 0; i < int(buses.size()); ++i) {
      if (!bus_idx_.emplace(buses[i].id, i).second)
        throw ValidationError("duplicate bus id " + std::to_string(buses[i].id));
      if (buses[i].reference) ++refs;
    }
    if (refs != 1)
      throw ValidationError("exactly one reference bus required, found " + std::to_string(refs));
    for (int i = 0; i < int(branches.size()); ++i) {
      const Branch& b = branches[i];
      if (!branch_idx_.emplace(b.id, i).second)
        throw ValidationError("duplicate branch id " + std::to_string(b.id));
      if (!bus_idx_.count(b.from) || !bus_idx_.count(b.to))
        throw ValidationError("branch " + std::to_string(b.id) + " references unknown bus");
      if (b.from == b.to)
        throw ValidationError("branch " + std::to_string(b.id) + " is a self-loop");
      if (b.x <= 0)
        throw ValidationError("nonpositive reactance on branch " + std::to_string(b.id));
      if (b.smax <= 0)
        throw ValidationError("nonpositive thermal limit on branch " + std::to_string(b.id));
    }
    for (int i = 0; i < int(generators.size()); ++i) {
      const Generator& g = generators[i];
      if (!gen_idx_.emplace(g.id, i).second)
        throw ValidationError("duplicate generator id " + std::to_string(g.id));
      if (!bus_idx_.count(g.bus))
        throw ValidationError("generator " + std::to_string(g.id) + " references unknown bus");
      if (g.pmin < 0)
        throw ValidationError("negative minimum output on generator " + std::to_string(g.id));
      if (g.pmax < g.pmin)
        throw ValidationError("generator " + std::to_string(g.id) + " has pmax below pmin");
    }
    for (int i = 0; i < int(loads.size()); ++i) {
      const Load& l = loads[i];
      if (!load_idx_.emplace(l.id, i).second)
        throw ValidationError("duplicate load id " + std::to_string(l.id));
      if (!bus_idx_.count(l.bus))
        throw ValidationError("load " + std::to_string(l.id) + " references unknown bus");
      if (l.peak < 0)
        throw ValidationError("negative peak on load " + std::to_string(l.id));
    }
    for (int i = 0; i < int(wind_farms.size()); ++i) {
      const WindFarm& w = wind_farms[i];
      if (!wind_idx_.emplace(w.id, i).second)
        throw ValidationError("duplicate wind farm id " + std::to_string(w.id));
      if (!bus_idx_.count(w.bus))
        throw ValidationError("wind farm " + std::to_string(w.id) + " references unknown bus");
      if (w.capacity <= 0)
        throw ValidationError("nonpositive capacity on wind farm " + std::to_string(w.id));
    }
    check_connected();
    validated_ = true;
  }

  bool validated() const { return validated_; }

  int n_buses() const { return int(buses.size()); }
  int n_branches() const { return int(branches.size()); }

  int bus_index(int id) const { return at(bus_idx_, id, "bus"); }
  int branch_index(int id) const { return at(branch_idx_, id, "branch"); }
  int gen_index(int id) const { return at(gen_idx_, id, "generator"); }
  int load_index(int id) const { return at(load_idx_, id, "load"); }
  int wind_index(int id) const { return at(wind_idx_, id, "wind farm"); }
  bool has_branch(int id) const { return branch_idx_.count(id) > 0; }

  int reference_bus() const {
    for (const auto& b : buses)
      if (b.reference) return b.id;
    throw ValidationError("no reference bus");
  }

  static NetworkCase parse(std::istream& in, const std::string& filename = "<stream>");
  static NetworkCase parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open case file '" + path + "'");
    return parse(f, path);
  }

 private:
  bool validated_ = false;
  std::unordered_map<int, int> bus_idx_, branch_idx_, gen_idx_, load_idx_, wind_idx_;

  static int at(const std::unordered_map<int, int>& m, int id, const char* what) {
    auto it = m.find(id);
    if (it == m.end())
      throw ValidationError(std::string("unknown ") + what + " id " + std::to_string(id));
    return it->second;
  }

  void check_connected() const {
    if (buses.empty()) return;
    std::unordered_map<int, std::vector<int>> adj;
    for (const auto& b : branches) {
      adj[b.from].push_back(b.to);
      adj[b.to].push_back(b.from);
    }
    std::vector<int> stack{buses[0].id};
    std::set<int> seen{buses[0].id};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (seen.insert(w).second) stack.push_back(w);
    }
    if (int(seen.size()) != n_buses()) throw ValidationError("network not connected");
  }
};

// --- case file parsing ----------------------------------------------------
//
//   # comment
//   base_mva 100
//   [buses]        id [ref]
//   [branches]     id from to x_pu smax_mw
//   [generators]   id bus cost_per_mwh pmin_mw pmax_mw
//   [loads]        id bus peak_mw
//   [wind_farms]   id bus capacity_mw

inline NetworkCase NetworkCase::parse(std::istream& in, const std::string& filename) {
  NetworkCase c;
  std::string line, section;
  int lineno = 0;
  auto where = [&](const std::string& field) {
    return filename + ":" + std::to_string(lineno) + " (" + field + ")";
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where("section") + ": unterminated section header");
      section = to_lower(trim(line.substr(1, line.size() - 2)));
      if (section != "buses" && section != "branches" && section != "generators" &&
          section != "loads" && section != "wind_farms")
        throw ParseError(where("section") + ": unknown section '" + section + "'");
      continue;
    }
    const auto tok = tokenize(line);
    if (section.empty()) {
      if (to_lower(tok[0]) == "base_mva" && tok.size() == 2) {
        c.base_mva = parse_double(tok[1], where("base_mva"));
        continue;
      }
      throw ParseError(where("header") + ": expected 'base_mva <value>' or a section header");
    }
    if (section == "buses") {
      if (tok.size() < 1 || tok.size() > 2)
        throw ParseError(where("bus") + ": expected 'id [ref]'");
      Bus b;
      b.id = int(parse_int(tok[0], where("bus id")));
      if (tok.size() == 2) {
        if (to_lower(tok[1]) != "ref")
          throw ParseError(where("bus flag") + ": expected 'ref', got '" + tok[1] + "'");
        b.reference = true;
      }
      c.buses.push_back(b);
    } else if (section == "branches") {
      if (tok.size() != 5)
        throw ParseError(where("branch") + ": expected 'id from to x_pu smax_mw'");
      Branch b;
      b.id = int(parse_int(tok[0], where("branch id")));
      b.from = int(parse_int(tok[1], where("branch from")));
      b.to = int(parse_int(tok[2], where("branch to")));
      b.x = parse_double(tok[3], where("branch x"));
      b.smax = parse_double(tok[4], where("branch smax"));
      c.branches.push_back(b);
    } else if (section == "generators") {
      if (tok.size() != 5)
        throw ParseError(where("generator") + ": expected 'id bus cost pmin pmax'");
      Generator g;
      g.id = int(parse_int(tok[0], where("generator id")));
      g.bus = int(parse_int(tok[1], where("generator bus")));
      g.cost = parse_double(tok[2], where("generator cost"));
      g.pmin = parse_double(tok[3], where("generator pmin"));
      g.pmax = parse_double(tok[4], where("generator pmax"));
      c.generators.push_back(g);
    } else if (section == "loads") {
      if (tok.size() != 3) throw ParseError(where("load") + ": expected 'id bus peak_mw'");
      Load l;
      l.id = int(parse_int(tok[0], where("load id")));
      l.bus = int(parse_int(tok[1], where("load bus")));
      l.peak = parse_double(tok[2], where("load peak"));
      c.loads.push_back(l);
    } else if (section == "wind_farms") {
      if (tok.size() != 3)
        throw ParseError(where("wind farm") + ": expected 'id bus capacity_mw'");
      WindFarm w;
      w.id = int(parse_int(tok[0], where("wind id")));
      w.bus = int(parse_int(tok[1], where("wind bus")));
      w.capacity = parse_double(tok[2], where("wind capacity"));
      c.wind_farms.push_back(w);
    }
  }
  c.validate();
  return c;
}

inline std::string case_to_text(const NetworkCase& c) {
  std::ostringstream os;
  os << "base_mva " << fmt_g(c.base_mva) << "\n\n[buses]\n";
  for (const auto& b : c.buses) os << b.id << (b.reference ? " ref" : "") << "\n";
  os << "\n[branches]\n";
  for (const auto& b : c.branches)
    os << b.id << " " << b.from << " " << b.to << " " << fmt_g(b.x) << " " << fmt_g(b.smax)
       << "\n";
  os << "\n[generators]\n";
  for (const auto& g : c.generators)
    os << g.id << " " << g.bus << " " << fmt_g(g.cost) << " " << fmt_g(g.pmin) << " "
       << fmt_g(g.pmax) << "\n";
  os << "\n[loads]\n";
  for (const auto& l : c.loads) os << l.id << " " << l.bus << " " << fmt_g(l.peak) << "\n";
  os << "\n[wind_farms]\n";
  for (const auto& w : c.wind_farms) os << w.id << " " << w.bus << " " << fmt_g(w.capacity) << "\n";
  return os.str();
}

// b_k = 1/x_k, in case order
inline std::vector<double> branch_susceptance(const NetworkCase& c) {
  std::vector<double> b;
  b.reserve(c.branches.size());
  for (const auto& br : c.branches) {
    if (br.x <= 0)
      throw ValidationError("nonpositive reactance on branch " + std::to_string(br.id));
    b.push_back(1.0 / br.x);
  }
  return b;
}

namespace detail {

// Reduced nodal susceptance matrix (reference row/column removed) and the
// mapping bus index -> reduced index. Shared by PTDF and flow solves.
struct ReducedSystem {
  Eigen::MatrixXd B;            // (n-1) x (n-1)
  std::vector<int> red_index;   // bus idx -> reduced idx, ref -> -1
  Eigen::LLT<Eigen::MatrixXd> llt;
};

inline ReducedSystem build_reduced(const NetworkCase& c) {
  const int n = c.n_buses();
  const int ref = c.bus_index(c.reference_bus());
  ReducedSystem rs;
  rs.red_index.assign(n, -1);
  int k = 0;
  for (int i = 0; i < n; ++i)
    if (i != ref) rs.red_index[i] = k++;
  rs.B = Eigen::MatrixXd::Zero(n - 1, n - 1);
  for (const auto& br : c.branches) {
    const double b = 1.0 / br.x;
    const int i = rs.red_index[c.bus_index(br.from)];
    const int j = rs.red_index[c.bus_index(br.to)];
    if (i >= 0) rs.B(i, i) += b;
    if (j >= 0) rs.B(j, j) += b;
    if (i >= 0 && j >= 0) {
      rs.B(i, j) -= b;
      rs.B(j, i) -= b;
    }
  }
  rs.llt.compute(rs.B);
  if (rs.llt.info() != Eigen::Success)
    throw ValidationError("islanded network: reduced susceptance matrix is singular");
  return rs;
}

}  // namespace detail

// Power-transfer distribution factors for a set of monitored branches.
// Factorizes the reduced susceptance matrix once and back-solves per branch.
// Row order follows `monitored_branch_ids`; the reference-bus column is zero.
struct PtdfMatrix {
  Eigen::MatrixXd h;            // monitored x buses (case bus order)
  std::vector<int> monitored;   // branch ids, row order
  std::map<int, int> row_of;    // branch id -> row

  bool covers(int branch_id) const { return row_of.count(branch_id) > 0; }
  int row(int branch_id) const {
    auto it = row_of.find(branch_id);
    if (it == row_of.end())
      throw ValidationError("branch " + std::to_string(branch_id) + " not in PTDF rows");
    return it->second;
  }
};

inline PtdfMatrix compute_ptdf(const NetworkCase& c, const std::vector<int>& monitored_ids) {
  auto rs = detail::build_reduced(c);
  const int n = c.n_buses();
  PtdfMatrix out;
  out.monitored = monitored_ids;
  out.h = Eigen::MatrixXd::Zero(int(monitored_ids.size()), n);
  for (int r = 0; r < int(monitored_ids.size()); ++r) {
    const Branch& br = c.branches[c.branch_index(monitored_ids[r])];
    if (!out.row_of.emplace(br.id, r).second)
      throw ValidationError("duplicate monitored branch id " + std::to_string(br.id));
    const double b = 1.0 / br.x;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n - 1);
    const int fi = rs.red_index[c.bus_index(br.from)];
    const int ti = rs.red_index[c.bus_index(br.to)];
    if (fi >= 0) rhs(fi) += b;
    if (ti >= 0) rhs(ti) -= b;
    const Eigen::VectorXd w = rs.llt.solve(rhs);
    for (int i = 0; i < n; ++i) {
      const int ri = rs.red_index[i];
      out.h(r, i) = ri >= 0 ? w(ri) : 0.0;
    }
  }
  return out;
}

inline PtdfMatrix compute_ptdf(const NetworkCase& c) {
  std::vector<int> all;
  for (const auto& b : c.branches) all.push_back(b.id);
  return compute_ptdf(c, all);
}

// Reference-bus DC flow solve: injections (MW, case bus order, balanced) to
// branch flows (MW, case branch order). theta_ref = 0.
inline std::vector<double> btheta_flows(const NetworkCase& c,
                                        const std::vector<double>& injections_mw) {
  const int n = c.n_buses();
  if (int(injections_mw.size()) != n)
    throw ValidationError("injection vector length does not match bus count");
  double sum = 0, linf = 0;
  for (double p : injections_mw) {
    sum += p;
    linf = std::max(linf, std::abs(p));
  }
  if (std::abs(sum) > 1e-6 * std::max(1.0, linf))
    throw ValidationError("injections not balanced: sum = " + fmt_g(sum) + " MW");
  auto rs = detail::build_reduced(c);
  Eigen::VectorXd p(n - 1);
  for (int i = 0; i < n; ++i)
    if (rs.red_index[i] >= 0) p(rs.red_index[i]) = injections_mw[i];
  const Eigen::VectorXd theta = rs.llt.solve(p);  // MW-scaled angles
  auto ang = [&](int bus_idx) {
    const int r = rs.red_index[bus_idx];
    return r >= 0 ? theta(r) : 0.0;
  };
  std::vector<double> flows;
  flows.reserve(c.branches.size());
  for (const auto& br : c.branches) {
    const double b = 1.0 / br.x;
    flows.push_back(b * (ang(c.bus_index(br.from)) - ang(c.bus_index(br.to))));
  }
  return flows;
}

}  // namespace facts
