#pragma once

// Branch-and-bound MILP layer over the LP engine. Best-first search with a
// deterministic node order, an initial rounding dive for an early incumbent,
// warm-started child LPs (parent basis), and most-fractional branching.

#include <cmath>
#include <memory>
#include <queue>
#include <vector>

#include "facts/lp.hpp"

namespace facts::lp {

struct MipOptions {
  Options lp;
  double int_tol = 1e-6;
  double gap_rel = 1e-6;
  double gap_abs = 1e-9;
  double time_limit_s = 0;  // 0: none
  long max_nodes = 200000;
};

struct MipResult {
  Status status = Status::Error;
  double objective = 0;
  double best_bound = -facts::kInf;
  double gap = 0;
  std::vector<double> x;
  long nodes = 0;
  long lp_iterations = 0;
  double seconds = 0;
};

namespace detail {

struct MipNode {
  std::vector<double> lb, ub;
  std::vector<int> basis;
  double bound;  // parent LP value, valid lower bound for the subtree
  long id;
};

struct NodeOrder {
  bool operator()(const std::shared_ptr<MipNode>& a, const std::shared_ptr<MipNode>& b) const {
    if (a->bound != b->bound) return a->bound > b->bound;  // min-heap on bound
    return a->id > b->id;
  }
};

inline int most_fractional(const std::vector<double>& x, const std::vector<int>& int_cols,
                           double int_tol) {
  int pick = -1;
  double best = int_tol;
  for (int j : int_cols) {
    const double f = std::abs(x[j] - std::round(x[j]));
    if (f > best + 1e-15) {
      best = f;
      pick = j;
    }
  }
  return pick;
}

}  // namespace detail

inline MipResult solve_mip(const Problem& p, const std::vector<int>& int_cols,
                           const MipOptions& opt = {}) {
  using detail::MipNode;
  WallTimer timer;
  MipResult res;

  auto lp_opts = [&](void) {
    Options o = opt.lp;
    if (opt.time_limit_s > 0) {
      const double left = opt.time_limit_s - timer.seconds();
      o.time_limit_s = std::max(left, 0.01);
    }
    return o;
  };

  auto is_integral = [&](const std::vector<double>& x) {
    for (int j : int_cols)
      if (std::abs(x[j] - std::round(x[j])) > opt.int_tol) return false;
    return true;
  };

  // root
  auto root = std::make_shared<MipNode>();
  root->lb = p.lb;
  root->ub = p.ub;
  root->bound = -facts::kInf;
  root->id = 0;

  Solution rsol = solve(p, lp_opts(), &root->lb, &root->ub, nullptr, &root->basis);
  res.nodes = 1;
  res.lp_iterations = rsol.iterations;
  if (rsol.status != Status::Optimal) {
    res.status = rsol.status;
    res.seconds = timer.seconds();
    return res;
  }
  root->bound = rsol.objective;
  res.best_bound = rsol.objective;

  double incumbent = facts::kInf;
  std::vector<double> inc_x;
  auto accept = [&](const std::vector<double>& x, double obj) {
    if (obj < incumbent - 1e-12) {
      incumbent = obj;
      inc_x = x;
      for (int j : int_cols) inc_x[j] = std::round(inc_x[j]);
    }
  };

  if (int_cols.empty() || is_integral(rsol.x)) {
    accept(rsol.x, rsol.objective);
    res.status = Status::Optimal;
    res.objective = incumbent;
    res.best_bound = rsol.objective;
    res.x = inc_x;
    res.seconds = timer.seconds();
    return res;
  }

  // rounding dive for an early incumbent: repeatedly fix the most fractional
  // variable to its nearest integer and re-solve
  {
    std::vector<double> dlb = root->lb, dub = root->ub;
    std::vector<int> basis = root->basis;
    Solution cur = rsol;
    for (size_t step = 0; step < int_cols.size(); ++step) {
      if (is_integral(cur.x)) {
        accept(cur.x, cur.objective);
        break;
      }
      int j = detail::most_fractional(cur.x, int_cols, opt.int_tol);
      if (j < 0) {
        accept(cur.x, cur.objective);
        break;
      }
      double v = std::round(cur.x[j]);
      if (std::abs(cur.x[j] - v) > 0.5 - 1e-9) v = std::floor(cur.x[j]);  // exact halves go down
      dlb[j] = v;
      dub[j] = v;
      std::vector<int> nbasis;
      Solution nsol = solve(p, lp_opts(), &dlb, &dub, &basis, &nbasis);
      res.lp_iterations += nsol.iterations;
      if (nsol.status != Status::Optimal) break;
      cur = nsol;
      basis = nbasis;
    }
  }

  std::priority_queue<std::shared_ptr<MipNode>, std::vector<std::shared_ptr<MipNode>>,
                      detail::NodeOrder>
      open;
  long next_id = 1;
  {
    const int j = detail::most_fractional(rsol.x, int_cols, opt.int_tol);
    const double f = rsol.x[j];
    auto down = std::make_shared<MipNode>(*root);
    down->ub[j] = std::floor(f);
    down->id = next_id++;
    auto up = std::make_shared<MipNode>(*root);
    up->lb[j] = std::ceil(f);
    up->id = next_id++;
    open.push(down);
    open.push(up);
  }

  auto cutoff = [&](void) {
    return incumbent - std::max(opt.gap_abs, opt.gap_rel * std::abs(incumbent));
  };
  Status final_status = Status::Optimal;

  while (!open.empty()) {
    res.best_bound = std::min(open.top()->bound, incumbent);
    if (std::isfinite(incumbent)) {
      const double gap = (incumbent - res.best_bound) / std::max(1.0, std::abs(incumbent));
      if (gap <= opt.gap_rel) break;
    }
    if (opt.time_limit_s > 0 && timer.seconds() > opt.time_limit_s) {
      final_status = Status::TimeLimit;
      break;
    }
    if (res.nodes >= opt.max_nodes) {
      final_status = Status::IterLimit;
      break;
    }

    auto node = open.top();
    open.pop();
    if (node->bound >= cutoff()) continue;

    std::vector<int> basis;
    Solution sol = solve(p, lp_opts(), &node->lb, &node->ub, &node->basis, &basis);
    ++res.nodes;
    res.lp_iterations += sol.iterations;
    if (sol.status == Status::Infeasible) continue;
    if (sol.status != Status::Optimal) {
      final_status = sol.status;
      break;
    }
    if (sol.objective >= cutoff()) continue;
    if (is_integral(sol.x)) {
      accept(sol.x, sol.objective);
      continue;
    }
    const int j = detail::most_fractional(sol.x, int_cols, opt.int_tol);
    const double f = sol.x[j];
    auto down = std::make_shared<MipNode>();
    down->lb = node->lb;
    down->ub = node->ub;
    down->basis = basis;
    down->bound = sol.objective;
    down->ub[j] = std::floor(f);
    down->id = next_id++;
    auto up = std::make_shared<MipNode>();
    up->lb = node->lb;
    up->ub = node->ub;
    up->basis = std::move(basis);
    up->bound = sol.objective;
    up->lb[j] = std::ceil(f);
    up->id = next_id++;
    open.push(std::move(down));
    open.push(std::move(up));
  }

  if (open.empty()) res.best_bound = incumbent;
  else res.best_bound = std::min(open.top()->bound, incumbent);

  res.seconds = timer.seconds();
  if (!std::isfinite(incumbent)) {
    // no feasible point found
    if (final_status == Status::Optimal) {
      res.status = Status::Infeasible;
    } else {
      res.status = final_status;
    }
    return res;
  }
  res.objective = incumbent;
  res.x = inc_x;
  res.gap = (incumbent - res.best_bound) / std::max(1.0, std::abs(incumbent));
  res.status = final_status;
  return res;
}

}  // namespace facts::lp
