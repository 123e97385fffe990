#pragma once

// Self-contained LP engine: bounded-variable primal simplex with a dense,
// explicitly maintained basis inverse. Sized for the desk-scale models this
// toolkit builds (hundreds to a few thousand rows), not a general solver.
//
//   min  c'x   s.t.   lo <= Ax <= hi,   lb <= x <= ub
//
// Each row i gets a logical variable r_i = a_i'x bounded by [lo_i, hi_i],
// giving the working system [A | -I](x, r) = 0 with an always-invertible
// all-logical starting basis. Phase 1 drives out-of-bound basics feasible
// with the classic composite infeasibility objective; phase 2 is a plain
// bounded-variable primal simplex. Dantzig pricing with an automatic switch
// to Bland's rule after a degeneracy stall guarantees termination.
//
// Dual values are reported as shadow prices: row_dual[i] = d(objective)/d(rhs)
// with respect to the row's active bound. LP optimality is certified by the
// usual conditions (reduced-cost signs + complementary slackness), which the
// test-suite checks independently on random instances.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "facts/common.hpp"

namespace facts::lp {

enum class Status { Optimal, Infeasible, Unbounded, IterLimit, TimeLimit, Error };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterLimit: return "iteration-limit";
    case Status::TimeLimit: return "time-limit";
    case Status::Error: return "error";
  }
  return "?";
}

struct Problem {
  int ncols = 0;
  std::vector<double> cost, lb, ub;
  std::vector<double> row_lo, row_hi;
  // rows as CSR triplets
  std::vector<int> row_start{0};
  std::vector<int> row_col;
  std::vector<double> row_val;

  int add_col(double c, double l, double u) {
    if (std::isnan(c) || std::isnan(l) || std::isnan(u))
      throw Error("lp::Problem::add_col: NaN in column data");
    if (l > u + 1e-12) throw Error("lp::Problem::add_col: lower bound exceeds upper bound");
    cost.push_back(c);
    lb.push_back(l);
    ub.push_back(u);
    return ncols++;
  }

  int add_row(const std::vector<std::pair<int, double>>& terms, double lo, double hi) {
    if (lo > hi + 1e-12) throw Error("lp::Problem::add_row: row lower bound exceeds upper bound");
    for (auto& [j, v] : terms) {
      if (j < 0 || j >= ncols) throw Error("lp::Problem::add_row: column index out of range");
      if (!std::isfinite(v)) throw Error("lp::Problem::add_row: non-finite coefficient");
      row_col.push_back(j);
      row_val.push_back(v);
    }
    row_start.push_back(int(row_col.size()));
    row_lo.push_back(lo);
    row_hi.push_back(hi);
    return int(row_lo.size()) - 1;
  }

  int nrows() const { return int(row_lo.size()); }
};

struct Solution {
  Status status = Status::Error;
  double objective = 0;
  std::vector<double> x;          // structural values
  std::vector<double> row_value;  // row activities a_i'x
  std::vector<double> row_dual;   // shadow prices
  std::vector<double> col_dual;   // reduced costs
  long iterations = 0;
  double seconds = 0;
};

struct Options {
  double feas_tol = 1e-7;
  double opt_tol = 1e-7;
  double pivot_tol = 1e-8;
  long max_iters = -1;     // -1: derived from problem size
  double time_limit_s = 0; // 0: none
};

namespace detail {

enum class VStat : unsigned char { Basic, AtLower, AtUpper, Free };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Simplex {
 public:
  Simplex(const Problem& p, const Options& opt, const std::vector<double>* lb_over,
          const std::vector<double>* ub_over)
      : p_(p), opt_(opt), m_(p.nrows()), n_(p.ncols), nall_(m_ + p.ncols) {
    // bounds and costs over structurals + logicals
    lbv_.resize(nall_);
    ubv_.resize(nall_);
    costv_.assign(nall_, 0.0);
    const std::vector<double>& lb = lb_over ? *lb_over : p.lb;
    const std::vector<double>& ub = ub_over ? *ub_over : p.ub;
    for (int j = 0; j < n_; ++j) {
      lbv_[j] = lb[j];
      ubv_[j] = ub[j];
      costv_[j] = p.cost[j];
    }
    for (int i = 0; i < m_; ++i) {
      lbv_[n_ + i] = p.row_lo[i];
      ubv_[n_ + i] = p.row_hi[i];
    }
    build_columns();
  }

  Solution run(const std::vector<int>* warm, std::vector<int>* out_basis) {
    WallTimer timer;
    Solution sol;
    for (int j = 0; j < nall_; ++j) {
      if (lbv_[j] > ubv_[j] + 1e-12) {
        sol.status = Status::Infeasible;
        finalize(sol, timer);
        return sol;
      }
    }
    init_basis(warm);
    long max_iters = opt_.max_iters > 0 ? opt_.max_iters : 5000 + 50L * nall_;
    int phase = 1;
    long degen_streak = 0;
    bool bland = false;
    Status result = Status::Error;

    Eigen::VectorXd y(m_), w(m_);
    while (true) {
      if (sol.iterations >= max_iters) {
        result = Status::IterLimit;
        break;
      }
      if (opt_.time_limit_s > 0 && (sol.iterations & 63) == 0 &&
          timer.seconds() > opt_.time_limit_s) {
        result = Status::TimeLimit;
        break;
      }
      if (phase == 1 && max_violation() <= opt_.feas_tol) phase = 2;

      // pricing vector y = Binv' * c_B for the current phase cost
      y.setZero();
      for (int i = 0; i < m_; ++i) {
        const double cb = phase == 2 ? costv_[basis_[i]] : phase1_cost(basis_[i]);
        if (cb != 0.0) y += cb * binv_.row(i).transpose();
      }

      // entering variable
      int enter = -1, sigma = 0;
      double best = 0;
      for (int j = 0; j < nall_; ++j) {
        const VStat st = vstat_[j];
        if (st == VStat::Basic) continue;
        if (ubv_[j] - lbv_[j] <= 1e-12) continue;  // fixed
        const double d = (phase == 2 ? costv_[j] : 0.0) - dot_column(j, y);
        int dir = 0;
        if (st == VStat::AtLower && d < -opt_.opt_tol) dir = +1;
        else if (st == VStat::AtUpper && d > opt_.opt_tol) dir = -1;
        else if (st == VStat::Free && std::abs(d) > opt_.opt_tol) dir = d < 0 ? +1 : -1;
        if (dir == 0) continue;
        if (bland) {
          enter = j;
          sigma = dir;
          break;
        }
        if (std::abs(d) > best + 1e-15) {
          best = std::abs(d);
          enter = j;
          sigma = dir;
        }
      }
      if (enter < 0) {
        if (phase == 1) {
          if (max_violation() <= opt_.feas_tol) { phase = 2; continue; }
          result = Status::Infeasible;
        } else {
          result = Status::Optimal;
        }
        break;
      }

      // direction through the basis: w = Binv * A_enter
      ftran(enter, w);

      // ratio test
      double theta = facts::kInf;
      int leave_pos = -1;   // basis position, or -1 for a bound flip
      double leave_to = 0;  // bound the leaving variable lands on
      bool leave_upper = false;
      const double range = ubv_[enter] - lbv_[enter];
      if (std::isfinite(range)) theta = range;
      double best_piv = 0;
      for (int i = 0; i < m_; ++i) {
        const double wi = w(i);
        if (std::abs(wi) <= opt_.pivot_tol) continue;
        const int b = basis_[i];
        const double rate = -sigma * wi;  // d(x_b)/d(theta)
        const double xv = xval_[b];
        double limit = facts::kInf;
        double to = 0;
        bool hit_upper = false;
        if (phase == 1 && xv < lbv_[b] - opt_.feas_tol) {
          if (rate > 0) { limit = (lbv_[b] - xv) / rate; to = lbv_[b]; }
        } else if (phase == 1 && xv > ubv_[b] + opt_.feas_tol) {
          if (rate < 0) { limit = (xv - ubv_[b]) / (-rate); to = ubv_[b]; hit_upper = true; }
        } else if (rate < 0) {
          if (std::isfinite(lbv_[b])) { limit = (xv - lbv_[b]) / (-rate); to = lbv_[b]; }
        } else {
          if (std::isfinite(ubv_[b])) { limit = (ubv_[b] - xv) / rate; to = ubv_[b]; hit_upper = true; }
        }
        if (limit >= theta + 1e-9) continue;
        const bool strictly_better = limit < theta - 1e-9;
        if (strictly_better || leave_pos < 0 ||
            (!bland && std::abs(wi) > best_piv) ||
            (bland && leave_pos >= 0 && b < basis_[leave_pos])) {
          if (strictly_better || leave_pos < 0) theta = std::max(limit, 0.0);
          leave_pos = i;
          leave_to = to;
          leave_upper = hit_upper;
          best_piv = std::abs(wi);
        }
      }

      if (!std::isfinite(theta)) {
        if (phase == 2) {
          result = Status::Unbounded;
        } else {
          // cannot happen for consistent data; retry once after refactoring
          if (refactor_retries_++ < 2) { refactorize(); continue; }
          result = Status::Error;
        }
        break;
      }

      if (theta <= 1e-11) ++degen_streak; else degen_streak = 0;
      if (!bland && degen_streak > 400 + nall_) bland = true;

      // apply the step
      if (theta > 0) {
        for (int i = 0; i < m_; ++i) {
          const double wi = w(i);
          if (wi != 0.0) xval_[basis_[i]] += (-sigma * wi) * theta;
        }
        xval_[enter] += sigma * theta;
      }

      ++sol.iterations;
      if (leave_pos < 0) {
        // bound flip: entering moves across its range, basis unchanged
        vstat_[enter] = sigma > 0 ? VStat::AtUpper : VStat::AtLower;
        xval_[enter] = sigma > 0 ? ubv_[enter] : lbv_[enter];
        continue;
      }

      const int leaving = basis_[leave_pos];
      xval_[leaving] = leave_to;  // land exactly on the bound
      vstat_[leaving] = leave_upper ? VStat::AtUpper : VStat::AtLower;
      basis_[leave_pos] = enter;
      vstat_[enter] = VStat::Basic;

      // basis inverse update: Bnew^-1 = E^-1 * Binv with pivot w(leave_pos)
      const double piv = w(leave_pos);
      if (std::abs(piv) < opt_.pivot_tol) {
        refactorize();
        continue;
      }
      binv_.row(leave_pos) /= piv;
      for (int i = 0; i < m_; ++i) {
        if (i == leave_pos) continue;
        const double f = w(i);
        if (f != 0.0) binv_.row(i) -= f * binv_.row(leave_pos);
      }
      if (++pivots_since_refactor_ >= 512) refactorize();
    }

    sol.status = result;
    if (result == Status::Optimal) extract(sol);
    if (out_basis) *out_basis = basis_;
    finalize(sol, timer);
    return sol;
  }

 private:
  const Problem& p_;
  Options opt_;
  int m_, n_, nall_;
  std::vector<double> lbv_, ubv_, costv_;
  // structural columns (CSC built from the CSR rows)
  std::vector<int> col_start_, col_row_;
  std::vector<double> col_val_;
  std::vector<int> basis_;
  std::vector<VStat> vstat_;
  std::vector<double> xval_;
  RowMatrix binv_;
  long pivots_since_refactor_ = 0;
  int refactor_retries_ = 0;

  void build_columns() {
    col_start_.assign(n_ + 1, 0);
    for (int c : p_.row_col) col_start_[c + 1]++;
    for (int j = 0; j < n_; ++j) col_start_[j + 1] += col_start_[j];
    col_row_.resize(p_.row_col.size());
    col_val_.resize(p_.row_col.size());
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (int i = 0; i < m_; ++i) {
      for (int k = p_.row_start[i]; k < p_.row_start[i + 1]; ++k) {
        const int j = p_.row_col[k];
        col_row_[fill[j]] = i;
        col_val_[fill[j]] = p_.row_val[k];
        ++fill[j];
      }
    }
  }

  double phase1_cost(int var) const {
    const double v = xval_[var];
    if (v < lbv_[var] - opt_.feas_tol) return -1.0;
    if (v > ubv_[var] + opt_.feas_tol) return +1.0;
    return 0.0;
  }

  double max_violation() const {
    double s = 0;
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[i];
      if (xval_[b] < lbv_[b]) s = std::max(s, lbv_[b] - xval_[b]);
      else if (xval_[b] > ubv_[b]) s = std::max(s, xval_[b] - ubv_[b]);
    }
    return s;
  }

  // y := y (dense, size m); returns a_j . y including logical columns
  double dot_column(int j, const Eigen::VectorXd& y) const {
    if (j >= n_) return -y(j - n_);
    double s = 0;
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) s += col_val_[k] * y(col_row_[k]);
    return s;
  }

  void ftran(int j, Eigen::VectorXd& w) const {
    if (j >= n_) {
      w = -binv_.col(j - n_);
      return;
    }
    w.setZero();
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k)
      w += col_val_[k] * binv_.col(col_row_[k]);
  }

  void init_basis(const std::vector<int>* warm) {
    vstat_.assign(nall_, VStat::AtLower);
    xval_.assign(nall_, 0.0);
    basis_.clear();
    bool use_warm = false;
    if (warm && int(warm->size()) == m_) {
      std::vector<char> seen(nall_, 0);
      use_warm = true;
      for (int b : *warm) {
        if (b < 0 || b >= nall_ || seen[b]) { use_warm = false; break; }
        seen[b] = 1;
      }
      if (use_warm) basis_ = *warm;
    }
    if (!use_warm) {
      basis_.resize(m_);
      for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
    }
    for (int i = 0; i < m_; ++i) vstat_[basis_[i]] = VStat::Basic;
    for (int j = 0; j < nall_; ++j) {
      if (vstat_[j] == VStat::Basic) continue;
      if (std::isfinite(lbv_[j])) {
        vstat_[j] = VStat::AtLower;
        xval_[j] = lbv_[j];
      } else if (std::isfinite(ubv_[j])) {
        vstat_[j] = VStat::AtUpper;
        xval_[j] = ubv_[j];
      } else {
        vstat_[j] = VStat::Free;
        xval_[j] = 0.0;
      }
    }
    if (!factorize()) {
      // singular warm basis: fall back to the all-logical basis
      for (int i = 0; i < m_; ++i) vstat_[basis_[i]] = VStat::AtLower;
      basis_.resize(m_);
      for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
      for (int i = 0; i < m_; ++i) vstat_[n_ + i] = VStat::Basic;
      for (int j = 0; j < nall_; ++j) {
        if (vstat_[j] == VStat::Basic) continue;
        if (std::isfinite(lbv_[j])) { vstat_[j] = VStat::AtLower; xval_[j] = lbv_[j]; }
        else if (std::isfinite(ubv_[j])) { vstat_[j] = VStat::AtUpper; xval_[j] = ubv_[j]; }
        else { vstat_[j] = VStat::Free; xval_[j] = 0.0; }
      }
      factorize();
    }
    compute_basics();
  }

  // rebuild binv_ from the basis columns; false if singular
  bool factorize() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[i];
      if (b >= n_) {
        B(b - n_, i) = -1.0;
      } else {
        for (int k = col_start_[b]; k < col_start_[b + 1]; ++k)
          B(col_row_[k], i) = col_val_[k];
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    const double det = std::abs(lu.determinant());
    if (!(det > 0) || !std::isfinite(det)) return false;
    Eigen::MatrixXd inv = lu.solve(Eigen::MatrixXd::Identity(m_, m_));
    if (!inv.allFinite()) return false;
    binv_ = inv;
    pivots_since_refactor_ = 0;
    return true;
  }

  void compute_basics() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < nall_; ++j) {
      if (vstat_[j] == VStat::Basic || xval_[j] == 0.0) continue;
      if (j >= n_) {
        rhs(j - n_) += xval_[j];
      } else {
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k)
          rhs(col_row_[k]) -= col_val_[k] * xval_[j];
      }
    }
    Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < m_; ++i) xval_[basis_[i]] = xb(i);
  }

  void refactorize() {
    if (!factorize()) return;  // keep going with the updated inverse
    compute_basics();
  }

  void extract(Solution& sol) {
    // polish: recompute basics from the factorization to shed pivot drift
    refactorize();
    sol.x.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) sol.x[j] = xval_[j];
    sol.row_value.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double s = 0;
      for (int k = p_.row_start[i]; k < p_.row_start[i + 1]; ++k)
        s += p_.row_val[k] * sol.x[p_.row_col[k]];
      sol.row_value[i] = s;
    }
    double obj = 0;
    for (int j = 0; j < n_; ++j) obj += p_.cost[j] * sol.x[j];
    sol.objective = obj;

    Eigen::VectorXd y = Eigen::VectorXd::Zero(m_);
    for (int i = 0; i < m_; ++i) {
      const double cb = costv_[basis_[i]];
      if (cb != 0.0) y += cb * binv_.row(i).transpose();
    }
    sol.row_dual.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) sol.row_dual[i] = y(i);
    sol.col_dual.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      if (vstat_[j] == VStat::Basic) continue;
      sol.col_dual[j] = costv_[j] - dot_column(j, y);
    }
  }

  void finalize(Solution& sol, const WallTimer& t) { sol.seconds = t.seconds(); }
};

}  // namespace detail

inline Solution solve(const Problem& p, const Options& opt = {},
                      const std::vector<double>* lb_over = nullptr,
                      const std::vector<double>* ub_over = nullptr,
                      const std::vector<int>* warm_basis = nullptr,
                      std::vector<int>* out_basis = nullptr) {
  detail::Simplex s(p, opt, lb_over, ub_over);
  return s.run(warm_basis, out_basis);
}

}  // namespace facts::lp
