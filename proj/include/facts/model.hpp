#pragma once

// Model layer: named variables, tagged rows, linear objective, and solves
// through the LP/MILP engine. Rows may carry terms in upper-level parameters
// (the investment binaries); instantiate() folds a parameter vector into the
// right-hand sides, which is how per-scenario models are bound to a plan.
//
// Dual convention: SolveResult::row_duals are shadow prices, i.e. the
// derivative of the optimal objective with respect to the row's active bound
// in its stated sense. For a minimization with row a'x >= b binding, the dual
// is >= 0. Layers that need multipliers satisfying  c + P'l + E'm = 0, l >= 0
// for rows stored as <=, negate these shadow prices.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "facts/common.hpp"
#include "facts/lp.hpp"
#include "facts/milp.hpp"

namespace facts {

enum class VarKind { Continuous, Binary };
enum class RowSense { LE, GE, EQ };
enum class SolveStatus { Optimal, Infeasible, Unbounded, TimeLimit, Error };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::TimeLimit: return "time-limit";
    case SolveStatus::Error: return "error";
  }
  return "?";
}

struct LinTerm {
  int id;
  double coef;
};

// Small linear-expression builder over variable (or parameter) ids.
class LinExpr {
 public:
  LinExpr() = default;
  explicit LinExpr(double c) : constant_(c) {}

  LinExpr& add(int id, double coef) {
    if (!std::isfinite(coef)) throw Error("LinExpr::add: non-finite coefficient");
    if (coef != 0.0) terms_.push_back({id, coef});
    return *this;
  }
  LinExpr& add_constant(double c) {
    if (!std::isfinite(c)) throw Error("LinExpr::add_constant: non-finite constant");
    constant_ += c;
    return *this;
  }
  LinExpr& add(const LinExpr& o) {
    for (const auto& t : o.terms_) terms_.push_back(t);
    constant_ += o.constant_;
    return *this;
  }

  // merge duplicate ids, drop zeros
  std::vector<LinTerm> canonical() const {
    std::map<int, double> acc;
    for (const auto& t : terms_) acc[t.id] += t.coef;
    std::vector<LinTerm> out;
    out.reserve(acc.size());
    for (auto& [id, c] : acc)
      if (c != 0.0) out.push_back({id, c});
    return out;
  }
  const std::vector<LinTerm>& raw_terms() const { return terms_; }
  double constant() const { return constant_; }
  bool empty() const { return terms_.empty(); }

 private:
  std::vector<LinTerm> terms_;
  double constant_ = 0;
};

struct VarInfo {
  std::string name;
  double lb, ub;
  VarKind kind;
};

struct RowInfo {
  std::string tag;
  RowSense sense;
  double rhs;
  std::vector<LinTerm> terms;    // variable terms
  std::vector<LinTerm> x_terms;  // parameter terms (moved to rhs on instantiate)
};

struct SolveOptions {
  std::string backend = "simplex";
  double mip_gap = 1e-6;
  double time_limit_s = 0;  // 0: none
  int threads = 1;          // the built-in backend is single-threaded
};

struct SolveResult {
  SolveStatus status = SolveStatus::Error;
  double objective = 0;
  double best_bound = -kInf;  // MILP lower bound (== objective for LPs)
  std::vector<double> var_values;
  std::vector<double> row_duals;      // shadow prices; empty for MILPs
  std::vector<double> reduced_costs;  // per variable; empty for MILPs
  bool has_duals = false;
  double mip_gap = 0;
  double wall_seconds = 0;
  long iterations = 0;
  long nodes = 0;
};

class Model {
 public:
  explicit Model(std::string name = "model") : name_(std::move(name)) {}

  int add_continuous(const std::string& name, double lb, double ub) {
    return add_var(name, lb, ub, VarKind::Continuous);
  }
  int add_binary(const std::string& name) { return add_var(name, 0.0, 1.0, VarKind::Binary); }

  int add_parameter(const std::string& name) {
    if (!param_ids_.emplace(name, int(params_.size())).second)
      throw Error("Model::add_parameter: duplicate parameter '" + name + "'");
    params_.push_back(name);
    return int(params_.size()) - 1;
  }

  int add_row(const std::string& tag, const LinExpr& expr, RowSense sense, double rhs,
              const LinExpr& x_part = {}) {
    if (!std::isfinite(rhs)) throw Error("Model::add_row: non-finite rhs in row '" + tag + "'");
    RowInfo r;
    r.tag = tag;
    r.sense = sense;
    r.rhs = rhs - expr.constant() - x_part.constant();
    r.terms = expr.canonical();
    r.x_terms = x_part.canonical();
    for (const auto& t : r.terms)
      if (t.id < 0 || t.id >= int(vars_.size()))
        throw Error("Model::add_row: unknown variable id in row '" + tag + "'");
    for (const auto& t : r.x_terms)
      if (t.id < 0 || t.id >= int(params_.size()))
        throw Error("Model::add_row: unknown parameter id in row '" + tag + "'");
    rows_.push_back(std::move(r));
    return int(rows_.size()) - 1;
  }

  void set_objective(const LinExpr& expr) {
    obj_.assign(vars_.size(), 0.0);
    obj_constant_ = expr.constant();
    for (const auto& t : expr.canonical()) {
      if (t.id < 0 || t.id >= int(vars_.size()))
        throw Error("Model::set_objective: unknown variable id");
      obj_[t.id] = t.coef;
    }
  }

  // --- queries ---------------------------------------------------------
  const std::string& name() const { return name_; }
  int n_vars() const { return int(vars_.size()); }
  int n_params() const { return int(params_.size()); }
  const std::string& param(int id) const { return params_.at(id); }
  int n_rows() const { return int(rows_.size()); }
  const VarInfo& var(int id) const { return vars_.at(id); }
  const RowInfo& row(int id) const { return rows_.at(id); }
  const std::vector<RowInfo>& rows() const { return rows_; }
  const std::vector<VarInfo>& vars() const { return vars_; }
  double objective_coef(int id) const { return id < int(obj_.size()) ? obj_[id] : 0.0; }
  double objective_constant() const { return obj_constant_; }

  int var_id(const std::string& name) const {
    auto it = var_ids_.find(name);
    if (it == var_ids_.end()) throw Error("Model: unknown variable '" + name + "'");
    return it->second;
  }
  bool has_var(const std::string& name) const { return var_ids_.count(name) > 0; }

  std::vector<int> rows_with_tag(const std::string& tag) const {
    std::vector<int> out;
    for (int i = 0; i < int(rows_.size()); ++i)
      if (rows_[i].tag == tag) out.push_back(i);
    return out;
  }
  std::vector<int> rows_with_tag_prefix(const std::string& prefix) const {
    std::vector<int> out;
    for (int i = 0; i < int(rows_.size()); ++i)
      if (rows_[i].tag.rfind(prefix, 0) == 0) out.push_back(i);
    return out;
  }

  int n_binary() const {
    int c = 0;
    for (const auto& v : vars_)
      if (v.kind == VarKind::Binary) ++c;
    return c;
  }
  int n_eq_rows() const {
    int c = 0;
    for (const auto& r : rows_)
      if (r.sense == RowSense::EQ) ++c;
    return c;
  }
  int n_ineq_rows() const { return n_rows() - n_eq_rows(); }

  // --- transforms ------------------------------------------------------

  // Fold a parameter vector into the right-hand sides.
  Model instantiate(const std::vector<double>& x) const {
    if (int(x.size()) != n_params())
      throw Error("Model::instantiate: parameter vector size mismatch");
    Model m = *this;
    for (auto& r : m.rows_) {
      for (const auto& t : r.x_terms) r.rhs -= t.coef * x[t.id];
      r.x_terms.clear();
    }
    m.params_.clear();
    m.param_ids_.clear();
    return m;
  }

  void fix_var(int id, double value) {
    vars_.at(id).lb = value;
    vars_.at(id).ub = value;
  }

  // --- solving ---------------------------------------------------------

  SolveResult solve(const SolveOptions& opt = {}) const {
    check_solvable(opt);
    lp::Problem p = to_lp();
    std::vector<int> ints;
    for (int j = 0; j < n_vars(); ++j)
      if (vars_[j].kind == VarKind::Binary && vars_[j].ub - vars_[j].lb > 1e-12)
        ints.push_back(j);
    if (ints.empty()) return solve_lp_path(p, opt);

    lp::MipOptions mo;
    mo.gap_rel = opt.mip_gap;
    mo.time_limit_s = opt.time_limit_s;
    auto r = lp::solve_mip(p, ints, mo);
    SolveResult out;
    out.status = map_status(r.status);
    out.objective = r.objective + obj_constant_;
    out.best_bound = r.best_bound + obj_constant_;
    out.var_values = r.x;
    out.mip_gap = r.gap;
    out.wall_seconds = r.seconds;
    out.iterations = r.lp_iterations;
    out.nodes = r.nodes;
    return out;
  }

  // Fix every integer variable (from `fixings` or its current bounds), solve
  // the resulting LP, and return duals. Strong duality is asserted on every
  // extraction; a violated certificate raises SolveError.
  SolveResult fix_and_dualize(const std::map<int, double>& fixings,
                              const SolveOptions& opt = {}) const {
    check_solvable(opt);
    Model m = *this;
    for (auto& [id, v] : fixings) {
      if (id < 0 || id >= n_vars()) throw Error("Model::fix_and_dualize: unknown variable id");
      m.fix_var(id, v);
    }
    for (int j = 0; j < m.n_vars(); ++j) {
      if (m.vars_[j].kind == VarKind::Binary && m.vars_[j].ub - m.vars_[j].lb > 1e-12)
        throw Error("Model::fix_and_dualize: integer variable '" + m.vars_[j].name +
                    "' left unfixed");
    }
    lp::Problem p = m.to_lp();
    return m.solve_lp_path(p, opt);
  }

  // Deterministic LP-format dump with tagged rows.
  std::string write_lp() const {
    std::ostringstream os;
    os << "\\ " << name_ << "\n";
    os << "Minimize\n obj:";
    bool first = true;
    for (int j = 0; j < n_vars(); ++j) {
      const double c = objective_coef(j);
      if (c == 0.0) continue;
      emit_term(os, c, vars_[j].name, first);
      first = false;
    }
    if (first) os << " 0 " << (n_vars() ? vars_[0].name : "zero");
    os << "\nSubject To\n";
    for (const auto& r : rows_) {
      os << " " << r.tag << ":";
      bool f2 = true;
      for (const auto& t : r.terms) {
        emit_term(os, t.coef, vars_[t.id].name, f2);
        f2 = false;
      }
      for (const auto& t : r.x_terms) {
        emit_term(os, t.coef, "param_" + params_[t.id], f2);
        f2 = false;
      }
      if (f2) os << " 0 " << (n_vars() ? vars_[0].name : "zero");
      os << (r.sense == RowSense::LE ? " <= " : r.sense == RowSense::GE ? " >= " : " = ")
         << fmt_g(r.rhs) << "\n";
    }
    os << "Bounds\n";
    for (const auto& v : vars_) {
      if (v.lb == v.ub) {
        os << " " << v.name << " = " << fmt_g(v.lb) << "\n";
      } else if (!std::isfinite(v.lb) && !std::isfinite(v.ub)) {
        os << " " << v.name << " free\n";
      } else {
        os << " " << (std::isfinite(v.lb) ? fmt_g(v.lb) : "-inf") << " <= " << v.name
           << " <= " << (std::isfinite(v.ub) ? fmt_g(v.ub) : "+inf") << "\n";
      }
    }
    bool any_bin = false;
    for (const auto& v : vars_)
      if (v.kind == VarKind::Binary) {
        if (!any_bin) os << "Binaries\n";
        any_bin = true;
        os << " " << v.name << "\n";
      }
    os << "End\n";
    return os.str();
  }

  std::string dump_to_temp() const {
    std::string path = "/tmp/" + name_ + "_dump.lp";
    FILE* f = std::fopen(path.c_str(), "w");
    if (!f) return "(dump failed: " + path + ")";
    const std::string text = write_lp();
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
    return path;
  }

 private:
  std::string name_;
  std::vector<VarInfo> vars_;
  std::vector<std::string> params_;
  std::vector<RowInfo> rows_;
  std::vector<double> obj_;
  double obj_constant_ = 0;
  std::unordered_map<std::string, int> var_ids_;
  std::unordered_map<std::string, int> param_ids_;

  int add_var(const std::string& name, double lb, double ub, VarKind kind) {
    if (std::isnan(lb) || std::isnan(ub))
      throw Error("Model::add_var: NaN bound on '" + name + "'");
    if (!var_ids_.emplace(name, int(vars_.size())).second)
      throw Error("Model::add_var: duplicate variable '" + name + "'");
    vars_.push_back({name, lb, ub, kind});
    obj_.push_back(0.0);
    return int(vars_.size()) - 1;
  }

  void check_solvable(const SolveOptions& opt) const {
    if (opt.backend != "simplex")
      throw ConfigError("solver backend '" + opt.backend +
                        "' is not available; this build provides 'simplex' behind the "
                        "Model::solve interface");
    if (n_params() > 0)
      throw Error("Model::solve: model has unbound parameters; call instantiate() first");
  }

  static SolveStatus map_status(lp::Status s) {
    switch (s) {
      case lp::Status::Optimal: return SolveStatus::Optimal;
      case lp::Status::Infeasible: return SolveStatus::Infeasible;
      case lp::Status::Unbounded: return SolveStatus::Unbounded;
      case lp::Status::TimeLimit: return SolveStatus::TimeLimit;
      default: return SolveStatus::Error;
    }
  }

  lp::Problem to_lp() const {
    lp::Problem p;
    for (const auto& v : vars_) p.add_col(0.0, v.lb, v.ub);
    for (int j = 0; j < n_vars(); ++j) p.cost[j] = objective_coef(j);
    for (const auto& r : rows_) {
      if (!r.x_terms.empty())
        throw Error("Model: row '" + r.tag + "' still carries parameter terms");
      std::vector<std::pair<int, double>> terms;
      terms.reserve(r.terms.size());
      for (const auto& t : r.terms) terms.push_back({t.id, t.coef});
      double lo = -kInf, hi = kInf;
      if (r.sense != RowSense::LE) lo = r.rhs;
      if (r.sense != RowSense::GE) hi = r.rhs;
      p.add_row(terms, lo, hi);
    }
    return p;
  }

  SolveResult solve_lp_path(const lp::Problem& p, const SolveOptions& opt) const {
    lp::Options o;
    o.time_limit_s = opt.time_limit_s;
    auto s = lp::solve(p, o);
    SolveResult out;
    out.status = map_status(s.status);
    out.objective = s.objective + obj_constant_;
    out.best_bound = out.objective;
    out.var_values = s.x;
    out.wall_seconds = s.seconds;
    out.iterations = s.iterations;
    if (s.status == lp::Status::Optimal) {
      out.row_duals = s.row_dual;
      out.reduced_costs = s.col_dual;
      out.has_duals = true;
      assert_strong_duality(p, s);
    }
    return out;
  }

  // Certificate: dual objective assembled from the bound sides selected by
  // the multiplier signs must equal the primal objective.
  void assert_strong_duality(const lp::Problem& p, const lp::Solution& s) const {
    double scale = 1.0;
    for (double v : s.x) scale = std::max(scale, std::abs(v));
    const double ztol = 1e-9 * std::max(1.0, scale);
    double dual_obj = 0;
    for (int i = 0; i < p.nrows(); ++i) {
      const double y = s.row_dual[i];
      if (std::abs(y) <= ztol) continue;
      const double side = y > 0 ? p.row_lo[i] : p.row_hi[i];
      if (!std::isfinite(side))
        throw SolveError("strong duality check failed in '" + name_ +
                         "': multiplier on an open row bound");
      dual_obj += y * side;
    }
    for (int j = 0; j < p.ncols; ++j) {
      const double dj = s.col_dual[j];
      if (std::abs(dj) <= ztol) continue;
      const double side = dj > 0 ? p.lb[j] : p.ub[j];
      if (!std::isfinite(side))
        throw SolveError("strong duality check failed in '" + name_ +
                         "': reduced cost on an open variable bound");
      dual_obj += dj * side;
    }
    const double ref = std::max({1.0, std::abs(s.objective), std::abs(dual_obj)});
    if (std::abs(dual_obj - s.objective) > 1e-6 * ref)
      throw SolveError("strong duality check failed in '" + name_ + "': primal " +
                       fmt_g(s.objective) + " vs dual " + fmt_g(dual_obj));
  }

  static void emit_term(std::ostringstream& os, double c, const std::string& name, bool first) {
    if (c < 0) {
      os << (first ? " -" : " - ") << fmt_g(-c) << " " << name;
    } else {
      os << (first ? " " : " + ") << fmt_g(c) << " " << name;
    }
  }
};

}  // namespace facts
