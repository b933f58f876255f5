// Dense bounded-variable tableau engine shared by the LP and QP solvers.
//
// Problem form (minimization):
//   min  c'x + sum_j q_j x_j^2      q_j >= 0
//   s.t. row_lo <= A x <= row_hi
//        lo <= x <= hi
//
// Every row i gets a logical column z_i with A_i x - z_i = 0 and bounds
// [row_lo_i, row_hi_i]. Phase 1 adds one artificial per violated row and
// minimizes their sum. Phase 2 is a reduced-gradient active-set method: the
// free (superbasic) set is grown one column at a time by pricing, moved along
// the Newton direction of the reduced quadratic, and shrunk by the ratio test.
// With q = 0 the superbasic set never exceeds one column and every step is a
// primal simplex pivot or bound flip.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cfdea/core.hpp"

namespace cfdea::detail {

enum class EngineStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct EngineProblem {
  const Matrix* a = nullptr;  // m x n
  std::vector<double> row_lo;
  std::vector<double> row_hi;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> cost;
  std::vector<double> quad;  // empty means all zero
};

struct EngineOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_every = 64;
  long max_iterations = 0;  // 0 picks a size-based default
};

struct EngineResult {
  EngineStatus status = EngineStatus::kOptimal;
  std::vector<double> x;
  std::vector<double> row_duals;  // reduced gradient of each logical column
  std::vector<double> reduced;    // reduced gradient of structural columns
  double objective = 0.0;
  long iterations = 0;
};

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi sweeps.
/// On return `a` is destroyed, `values[i]` pairs with column i of `vectors`.
inline void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& values,
                         std::vector<double>& vectors) {
  vectors.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) vectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    if (off < 1e-300) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = vectors[k * n + p];
          const double vkq = vectors[k * n + q];
          vectors[k * n + p] = c * vkp - s * vkq;
          vectors[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  values.resize(n);
  for (int i = 0; i < n; ++i) values[i] = a[i * n + i];
}

class TableauEngine {
 public:
  TableauEngine(const EngineProblem& p, EngineOptions opts) : p_(p), opts_(opts) {
    m_ = static_cast<int>(p.a->rows());
    n_ = static_cast<int>(p.a->cols());
    require(static_cast<int>(p.lo.size()) == n_ && static_cast<int>(p.hi.size()) == n_ &&
                static_cast<int>(p.cost.size()) == n_,
            "engine: column data size mismatch");
    require(static_cast<int>(p.row_lo.size()) == m_ && static_cast<int>(p.row_hi.size()) == m_,
            "engine: row data size mismatch");
    require(p.quad.empty() || static_cast<int>(p.quad.size()) == n_,
            "engine: quadratic size mismatch");
    has_quad_ = std::any_of(p.quad.begin(), p.quad.end(), [](double q) { return q > 0.0; });
  }

  EngineResult solve() {
    EngineResult res;
    if (opts_.max_iterations <= 0)
      opts_.max_iterations = 200L * (m_ + n_) + 5000;
    for (int j = 0; j < n_; ++j) {
      if (p_.lo[j] > p_.hi[j] + opts_.feasibility_tol) {
        res.status = EngineStatus::kInfeasible;
        return res;
      }
    }
    for (int i = 0; i < m_; ++i) {
      if (p_.row_lo[i] > p_.row_hi[i] + opts_.feasibility_tol) {
        res.status = EngineStatus::kInfeasible;
        return res;
      }
    }
    setup();
    if (num_art_ > 0) {
      phase_ = 1;
      const EngineStatus st = iterate();
      if (st == EngineStatus::kIterationLimit) {
        res.status = st;
        res.iterations = iterations_;
        return res;
      }
      double infeas = 0.0;
      for (int j = art_begin_; j < total_; ++j) infeas += std::abs(x_[j]);
      double scale = 1.0;
      for (int i = 0; i < m_; ++i) {
        if (std::isfinite(p_.row_lo[i])) scale = std::max(scale, std::abs(p_.row_lo[i]));
        if (std::isfinite(p_.row_hi[i])) scale = std::max(scale, std::abs(p_.row_hi[i]));
      }
      if (infeas > 1e-9 * scale * std::max(1, num_art_)) {
        res.status = EngineStatus::kInfeasible;
        res.iterations = iterations_;
        return res;
      }
      retire_artificials();
    }
    phase_ = 2;
    const EngineStatus st = iterate();
    res.status = st;
    res.iterations = iterations_;
    if (st != EngineStatus::kOptimal) return res;
    refactor();
    extract(res);
    return res;
  }

 private:
  enum class ColState : std::uint8_t { kBasic, kLower, kUpper, kFree, kSuper };

  double& t(int r, int c) { return tab_[static_cast<std::size_t>(r) * total_ + c]; }
  double t(int r, int c) const { return tab_[static_cast<std::size_t>(r) * total_ + c]; }

  // Original column entry of the full system [A | -I | art].
  double orig(int r, int c) const {
    if (c < n_) return (*p_.a)(r, c);
    if (c < art_begin_) return c - n_ == r ? -1.0 : 0.0;
    return art_row_[c - art_begin_] == r ? art_sign_[c - art_begin_] : 0.0;
  }

  void setup() {
    std::vector<double> x0(n_);
    std::vector<ColState> st0(n_);
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(p_.lo[j])) {
        x0[j] = p_.lo[j];
        st0[j] = ColState::kLower;
      } else if (std::isfinite(p_.hi[j])) {
        x0[j] = p_.hi[j];
        st0[j] = ColState::kUpper;
      } else {
        x0[j] = 0.0;
        st0[j] = ColState::kFree;
      }
    }
    std::vector<double> act(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const auto row = p_.a->row(i);
      double s = 0.0;
      for (int j = 0; j < n_; ++j) s += row[j] * x0[j];
      act[i] = s;
    }
    art_row_.clear();
    art_sign_.clear();
    std::vector<double> target(m_);
    for (int i = 0; i < m_; ++i) {
      const double tol = opts_.feasibility_tol * (1.0 + std::abs(act[i]));
      if (act[i] < p_.row_lo[i] - tol) {
        target[i] = p_.row_lo[i];
      } else if (act[i] > p_.row_hi[i] + tol) {
        target[i] = p_.row_hi[i];
      } else {
        continue;
      }
      art_row_.push_back(i);
      art_sign_.push_back(target[i] > act[i] ? 1.0 : -1.0);
    }
    num_art_ = static_cast<int>(art_row_.size());
    art_begin_ = n_ + m_;
    total_ = art_begin_ + num_art_;

    lo_.assign(total_, 0.0);
    hi_.assign(total_, kInf);
    x_.assign(total_, 0.0);
    state_.assign(total_, ColState::kLower);
    row_of_.assign(total_, -1);
    basis_.assign(m_, -1);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = p_.lo[j];
      hi_[j] = p_.hi[j];
      x_[j] = x0[j];
      state_[j] = st0[j];
    }
    for (int i = 0; i < m_; ++i) {
      lo_[n_ + i] = p_.row_lo[i];
      hi_[n_ + i] = p_.row_hi[i];
    }
    tab_.assign(static_cast<std::size_t>(m_) * total_, 0.0);
    std::vector<int> art_of_row(m_, -1);
    for (int a = 0; a < num_art_; ++a) art_of_row[art_row_[a]] = art_begin_ + a;
    for (int i = 0; i < m_; ++i) {
      const int zc = n_ + i;
      const int ac = art_of_row[i];
      const auto row = p_.a->row(i);
      if (ac < 0) {
        // basis element -1: tableau row = [-a_i, e_i]
        for (int j = 0; j < n_; ++j) t(i, j) = -row[j];
        t(i, zc) = 1.0;
        basis_[i] = zc;
        row_of_[zc] = i;
        state_[zc] = ColState::kBasic;
        x_[zc] = act[i];
      } else {
        const double sg = art_sign_[ac - art_begin_];
        for (int j = 0; j < n_; ++j) t(i, j) = row[j] / sg;
        t(i, zc) = -1.0 / sg;
        t(i, ac) = 1.0;
        basis_[i] = ac;
        row_of_[ac] = i;
        state_[ac] = ColState::kBasic;
        const bool at_lo = target[i] == p_.row_lo[i];
        state_[zc] = at_lo ? ColState::kLower : ColState::kUpper;
        x_[zc] = target[i];
        x_[ac] = std::abs(target[i] - act[i]);
      }
    }
    super_.clear();
  }

  double cost_of(int j) const {
    if (phase_ == 1) return j >= art_begin_ ? 1.0 : 0.0;
    return j < n_ ? p_.cost[j] : 0.0;
  }

  double grad_of(int j) const {
    double g = cost_of(j);
    if (phase_ == 2 && has_quad_ && j < n_) g += 2.0 * p_.quad[j] * x_[j];
    return g;
  }

  double curvature_of(int j) const {
    if (phase_ == 2 && has_quad_ && j < n_) return 2.0 * p_.quad[j];
    return 0.0;
  }

  bool eligible(int j) const {
    if (j >= art_begin_ && phase_ == 2) return false;
    return state_[j] != ColState::kBasic && state_[j] != ColState::kSuper &&
           !(lo_[j] == hi_[j]);
  }

  double reduced_gradient(int j, const std::vector<double>& gb) const {
    double r = grad_of(j);
    for (int i = 0; i < m_; ++i) r -= gb[i] * t(i, j);
    return r;
  }

  void all_reduced(const std::vector<double>& gb, std::vector<double>& r) const {
    for (int j = 0; j < total_; ++j) r[j] = grad_of(j);
    for (int i = 0; i < m_; ++i) {
      const double g = gb[i];
      if (g == 0.0) continue;
      const double* row = &tab_[static_cast<std::size_t>(i) * total_];
      for (int j = 0; j < total_; ++j) r[j] -= g * row[j];
    }
  }

  void pivot(int r, int c) {
    const double pv = t(r, c);
    double* prow = &tab_[static_cast<std::size_t>(r) * total_];
    const double inv = 1.0 / pv;
    for (int j = 0; j < total_; ++j) prow[j] *= inv;
    prow[c] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* irow = &tab_[static_cast<std::size_t>(i) * total_];
      const double f = irow[c];
      if (f == 0.0) continue;
      for (int j = 0; j < total_; ++j) irow[j] -= f * prow[j];
      irow[c] = 0.0;
    }
    const int leaving = basis_[r];
    row_of_[leaving] = -1;
    basis_[r] = c;
    row_of_[c] = r;
    state_[c] = ColState::kBasic;
    ++since_refactor_;
  }

  // Rebuilds the tableau from the original columns for the current basis and
  // recomputes basic values from the nonbasic ones.
  void refactor() {
    since_refactor_ = 0;
    std::vector<double> fresh(static_cast<std::size_t>(m_) * total_);
    for (int i = 0; i < m_; ++i)
      for (int j = 0; j < total_; ++j) fresh[static_cast<std::size_t>(i) * total_ + j] = orig(i, j);
    std::vector<int> cols(basis_);
    std::vector<int> new_basis(m_, -1);
    std::vector<char> row_used(m_, 0);
    auto f = [&](int i, int j) -> double& { return fresh[static_cast<std::size_t>(i) * total_ + j]; };
    for (int c : cols) {
      int best = -1;
      double bv = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (row_used[i]) continue;
        if (std::abs(f(i, c)) > bv) {
          bv = std::abs(f(i, c));
          best = i;
        }
      }
      if (best < 0 || bv < 1e-13) return;  // keep the incrementally updated tableau
      row_used[best] = 1;
      new_basis[best] = c;
      const double inv = 1.0 / f(best, c);
      for (int j = 0; j < total_; ++j) f(best, j) *= inv;
      for (int i = 0; i < m_; ++i) {
        if (i == best) continue;
        const double g = f(i, c);
        if (g == 0.0) continue;
        for (int j = 0; j < total_; ++j) f(i, j) -= g * f(best, j);
      }
    }
    tab_.swap(fresh);
    basis_ = new_basis;
    for (int i = 0; i < m_; ++i) row_of_[basis_[i]] = i;
    recompute_basics();
  }

  void recompute_basics() {
    for (int i = 0; i < m_; ++i) {
      double s = 0.0;
      for (int j = 0; j < total_; ++j) {
        if (state_[j] == ColState::kBasic) continue;
        const double xv = x_[j];
        if (xv != 0.0) s += t(i, j) * xv;
      }
      x_[basis_[i]] = -s;
    }
  }

  void retire_artificials() {
    for (int r = 0; r < m_; ++r) {
      const int b = basis_[r];
      if (b < art_begin_) continue;
      int best = -1;
      double bv = 1e-9;
      for (int j = 0; j < art_begin_; ++j) {
        if (state_[j] == ColState::kBasic) continue;
        if (std::abs(t(r, j)) > bv) {
          bv = std::abs(t(r, j));
          best = j;
        }
      }
      if (best < 0) continue;  // redundant row: artificial stays basic at zero
      const double xv = x_[best];
      pivot(r, best);
      x_[best] = xv;
      state_[b] = ColState::kLower;
      x_[b] = 0.0;
    }
    for (int j = art_begin_; j < total_; ++j) {
      lo_[j] = 0.0;
      hi_[j] = 0.0;
      if (state_[j] != ColState::kBasic) {
        state_[j] = ColState::kLower;
        x_[j] = 0.0;
      }
    }
    for (int j = 0; j < total_; ++j)
      if (state_[j] == ColState::kSuper) state_[j] = ColState::kFree;
    super_.clear();
    recompute_basics();
  }

  // Moves `j` to the bound `state` and drops it from the superbasic set if present.
  void park(int j, ColState state) {
    state_[j] = state;
    x_[j] = state == ColState::kLower ? lo_[j] : hi_[j];
    super_.erase(std::remove(super_.begin(), super_.end(), j), super_.end());
  }

  EngineStatus iterate() {
    std::vector<double> gb(m_);
    std::vector<double> rs;
    std::vector<double> dir;
    std::vector<double> dbasic(m_);
    std::vector<double> rall(total_);
    long degenerate_run = 0;
    const long bland_after = 5L * (m_ + total_);
    bool bland = false;
    for (;;) {
      if (++iterations_ > opts_.max_iterations) return EngineStatus::kIterationLimit;
      if (since_refactor_ >= opts_.refactor_every) refactor();
      for (int i = 0; i < m_; ++i) gb[i] = grad_of(basis_[i]);
      double gscale = 1.0;
      for (int i = 0; i < m_; ++i) gscale = std::max(gscale, std::abs(gb[i]));
      const double otol = opts_.optimality_tol * gscale;

      // Subspace step over the superbasic set.
      if (!super_.empty()) {
        const int s = static_cast<int>(super_.size());
        rs.assign(s, 0.0);
        double rmax = 0.0;
        for (int a = 0; a < s; ++a) {
          rs[a] = reduced_gradient(super_[a], gb);
          rmax = std::max(rmax, std::abs(rs[a]));
        }
        if (rmax > otol) {
          const StepOutcome out = subspace_step(rs, dir, dbasic, bland);
          if (out == StepOutcome::kUnbounded) return EngineStatus::kUnbounded;
          if (out == StepOutcome::kDegenerate) {
            if (++degenerate_run > bland_after) bland = true;
          } else {
            degenerate_run = 0;
          }
          continue;
        }
        // Subspace optimum: superbasics stuck at a bound are parked.
        for (int a = s - 1; a >= 0; --a) {
          const int j = super_[a];
          if (std::isfinite(lo_[j]) && x_[j] <= lo_[j]) park(j, ColState::kLower);
          else if (std::isfinite(hi_[j]) && x_[j] >= hi_[j]) park(j, ColState::kUpper);
        }
      }

      // Pricing.
      all_reduced(gb, rall);
      int enter = -1;
      double best = 0.0;
      for (int j = 0; j < total_; ++j) {
        if (!eligible(j)) continue;
        const double r = rall[j];
        double viol = 0.0;
        if (state_[j] == ColState::kLower) viol = -r;
        else if (state_[j] == ColState::kUpper) viol = r;
        else viol = std::abs(r);
        if (viol <= otol) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (viol > best) {
          best = viol;
          enter = j;
        }
      }
      if (enter < 0) return EngineStatus::kOptimal;
      super_.push_back(enter);
      state_[enter] = ColState::kSuper;
    }
  }

  enum class StepOutcome { kProgress, kDegenerate, kUnbounded };

  StepOutcome subspace_step(const std::vector<double>& rs, std::vector<double>& dir,
                            std::vector<double>& dbasic, bool bland) {
    const int s = static_cast<int>(super_.size());
    // Reduced Hessian Z'HZ with Z = [-T_{.,S}; I].
    std::vector<double> h(static_cast<std::size_t>(s) * s, 0.0);
    bool any_curv = false;
    if (phase_ == 2 && has_quad_) {
      for (int a = 0; a < s; ++a) {
        const double c = curvature_of(super_[a]);
        h[a * s + a] += c;
        if (c > 0.0) any_curv = true;
      }
      for (int i = 0; i < m_; ++i) {
        const double c = curvature_of(basis_[i]);
        if (c == 0.0) continue;
        any_curv = true;
        for (int a = 0; a < s; ++a) {
          const double ta = t(i, super_[a]);
          if (ta == 0.0) continue;
          for (int b = 0; b < s; ++b) h[a * s + b] += c * ta * t(i, super_[b]);
        }
      }
    }
    dir.assign(s, 0.0);
    double alpha_max = kInf;
    if (!any_curv) {
      // Linear: steepest reduced-gradient coordinate only.
      int pick = 0;
      for (int a = 1; a < s; ++a)
        if (std::abs(rs[a]) > std::abs(rs[pick])) pick = a;
      dir[pick] = rs[pick] > 0 ? -1.0 : 1.0;
    } else {
      std::vector<double> work(h);
      std::vector<double> vals;
      std::vector<double> vecs;
      jacobi_eigen(work, s, vals, vecs);
      double vmax = 0.0;
      for (double v : vals) vmax = std::max(vmax, v);
      const double etol = 1e-13 * std::max(1.0, vmax);
      double rnorm = 0.0;
      for (double r : rs) rnorm = std::max(rnorm, std::abs(r));
      int flat = -1;
      double flat_slope = 0.0;
      for (int k = 0; k < s; ++k) {
        if (vals[k] > etol) continue;
        double vr = 0.0;
        for (int a = 0; a < s; ++a) vr += vecs[a * s + k] * rs[a];
        if (std::abs(vr) > 1e-12 * std::max(1.0, rnorm) && std::abs(vr) > std::abs(flat_slope)) {
          flat = k;
          flat_slope = vr;
        }
      }
      if (flat >= 0) {
        const double sg = flat_slope > 0 ? -1.0 : 1.0;
        for (int a = 0; a < s; ++a) dir[a] = sg * vecs[a * s + flat];
        double curv = 0.0;
        double slope = 0.0;
        for (int a = 0; a < s; ++a) {
          slope += rs[a] * dir[a];
          for (int b = 0; b < s; ++b) curv += dir[a] * h[a * s + b] * dir[b];
        }
        if (curv > 0.0) alpha_max = -slope / curv;
      } else {
        for (int k = 0; k < s; ++k) {
          if (vals[k] <= etol) continue;
          double vr = 0.0;
          for (int a = 0; a < s; ++a) vr += vecs[a * s + k] * rs[a];
          const double coef = -vr / vals[k];
          for (int a = 0; a < s; ++a) dir[a] += coef * vecs[a * s + k];
        }
        alpha_max = 1.0;
      }
    }

    // Unit max-norm direction so pivot tolerances mean the same thing for
    // Newton steps on nearly flat objectives.
    double dmax = 0.0;
    for (double d : dir) dmax = std::max(dmax, std::abs(d));
    if (dmax == 0.0) return StepOutcome::kDegenerate;
    for (double& d : dir) d /= dmax;
    alpha_max *= dmax;

    // Direction of the basic variables.
    for (int i = 0; i < m_; ++i) {
      double d = 0.0;
      for (int a = 0; a < s; ++a) d -= t(i, super_[a]) * dir[a];
      dbasic[i] = d;
    }
    // Ratio test.
    double alpha = alpha_max;
    int block_row = -1;
    int block_super = -1;
    double block_mag = 0.0;
    const double ptol = opts_.pivot_tol;
    auto consider = [&](double ratio, int row, int sup, double mag) {
      ratio = std::max(ratio, 0.0);
      if (ratio < alpha - 1e-12 ||
          (ratio <= alpha + 1e-12 && (block_row >= 0 || block_super >= 0) &&
           (bland ? tie_key(row, sup) < tie_key(block_row, block_super) : mag > block_mag))) {
        alpha = ratio;
        block_row = row;
        block_super = sup;
        block_mag = mag;
      } else if (ratio <= alpha + 1e-12 && block_row < 0 && block_super < 0) {
        alpha = ratio;
        block_row = row;
        block_super = sup;
        block_mag = mag;
      }
    };
    for (int i = 0; i < m_; ++i) {
      const double d = dbasic[i];
      if (std::abs(d) <= ptol) continue;
      const int b = basis_[i];
      if (d < 0 && std::isfinite(lo_[b])) consider((x_[b] - lo_[b]) / -d, i, -1, std::abs(d));
      else if (d > 0 && std::isfinite(hi_[b])) consider((hi_[b] - x_[b]) / d, i, -1, std::abs(d));
    }
    for (int a = 0; a < s; ++a) {
      const int j = super_[a];
      const double d = dir[a];
      if (std::abs(d) <= 1e-15) continue;
      if (d < 0 && std::isfinite(lo_[j])) consider((x_[j] - lo_[j]) / -d, -1, a, std::abs(d));
      else if (d > 0 && std::isfinite(hi_[j])) consider((hi_[j] - x_[j]) / d, -1, a, std::abs(d));
    }
    if (!std::isfinite(alpha)) return StepOutcome::kUnbounded;

    for (int a = 0; a < s; ++a) x_[super_[a]] += alpha * dir[a];
    for (int i = 0; i < m_; ++i) x_[basis_[i]] += alpha * dbasic[i];

    if (block_super >= 0) {
      const int j = super_[block_super];
      park(j, dir[block_super] < 0 ? ColState::kLower : ColState::kUpper);
    } else if (block_row >= 0) {
      const int leaving = basis_[block_row];
      const bool to_lower = dbasic[block_row] < 0;
      // Enter the superbasic with the largest pivot in the blocking row.
      int enter_pos = -1;
      double pv = 0.0;
      for (int a = 0; a < s; ++a) {
        const double v = std::abs(t(block_row, super_[a]));
        if (v > pv) {
          pv = v;
          enter_pos = a;
        }
      }
      const int enter = super_[enter_pos];
      super_.erase(super_.begin() + enter_pos);
      const double xe = x_[enter];
      pivot(block_row, enter);
      x_[enter] = xe;
      state_[leaving] = to_lower ? ColState::kLower : ColState::kUpper;
      x_[leaving] = to_lower ? lo_[leaving] : hi_[leaving];
      if (lo_[leaving] == hi_[leaving]) x_[leaving] = lo_[leaving];
    }
    return alpha <= 1e-12 ? StepOutcome::kDegenerate : StepOutcome::kProgress;
  }

  long tie_key(int row, int sup) const {
    if (row >= 0) return basis_[row];
    return super_[sup];
  }

  void extract(EngineResult& res) const {
    res.x.assign(x_.begin(), x_.begin() + n_);
    for (int j = 0; j < n_; ++j) {
      // Snap nonbasic values exactly to bounds and clip tiny violations.
      if (std::isfinite(lo_[j]) && res.x[j] < lo_[j]) res.x[j] = lo_[j];
      if (std::isfinite(hi_[j]) && res.x[j] > hi_[j]) res.x[j] = hi_[j];
    }
    std::vector<double> gb(m_);
    for (int i = 0; i < m_; ++i) gb[i] = grad_of(basis_[i]);
    res.row_duals.resize(m_);
    for (int i = 0; i < m_; ++i) res.row_duals[i] = reduced_gradient(n_ + i, gb);
    res.reduced.resize(n_);
    for (int j = 0; j < n_; ++j) res.reduced[j] = reduced_gradient(j, gb);
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) {
      obj += p_.cost[j] * res.x[j];
      if (has_quad_) obj += p_.quad[j] * res.x[j] * res.x[j];
    }
    res.objective = obj;
  }

  const EngineProblem& p_;
  EngineOptions opts_;
  int m_ = 0;
  int n_ = 0;
  int num_art_ = 0;
  int art_begin_ = 0;
  int total_ = 0;
  int phase_ = 1;
  bool has_quad_ = false;
  long iterations_ = 0;
  int since_refactor_ = 0;
  std::vector<double> tab_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<double> x_;
  std::vector<ColState> state_;
  std::vector<int> row_of_;
  std::vector<int> basis_;
  std::vector<int> super_;
  std::vector<int> art_row_;
  std::vector<double> art_sign_;
};

}  // namespace cfdea::detail
