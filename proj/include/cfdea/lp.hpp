// Dense linear programming: two-phase bounded primal simplex with a switch to
// Bland's rule after a long run of degenerate pivots.
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cfdea/core.hpp"
#include "cfdea/detail/tableau.hpp"

namespace cfdea {

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };
enum class ObjectiveSense { kMinimize, kMaximize };

struct LinearProgram {
  ObjectiveSense sense = ObjectiveSense::kMinimize;
  std::vector<double> objective;
  Matrix constraints;  // rows x variables
  std::vector<RowSense> row_senses;
  std::vector<double> rhs;
  std::vector<double> lower;  // defaults to 0 when empty
  std::vector<double> upper;  // defaults to +inf when empty

  std::size_t num_vars() const noexcept { return objective.size(); }
  std::size_t num_rows() const noexcept { return rhs.size(); }

  /// Adds a column with the given cost and bounds; returns its index.
  int add_var(double cost, double lo = 0.0, double hi = kInf) {
    materialize_bounds();
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    constraints.resize_cols(objective.size());
    return static_cast<int>(objective.size()) - 1;
  }

  /// Adds a row given as sparse (column, coefficient) terms.
  int add_row(const std::vector<std::pair<int, double>>& terms, RowSense s, double b) {
    std::vector<double> dense(num_vars(), 0.0);
    for (const auto& [c, v] : terms) {
      require(c >= 0 && static_cast<std::size_t>(c) < dense.size(), "row term out of range");
      dense[c] += v;
    }
    if (constraints.cols() != num_vars()) constraints.resize_cols(num_vars());
    constraints.append_row(dense);
    row_senses.push_back(s);
    rhs.push_back(b);
    return static_cast<int>(rhs.size()) - 1;
  }

  void materialize_bounds() {
    if (lower.empty()) lower.assign(num_vars(), 0.0);
    if (upper.empty()) upper.assign(num_vars(), kInf);
  }

  void validate() const {
    const std::size_t n = num_vars();
    require(constraints.rows() == rhs.size() || (rhs.empty() && constraints.empty()),
            "constraint matrix row count mismatch");
    require(rhs.empty() || constraints.cols() == n, "constraint matrix column count mismatch");
    require(row_senses.size() == rhs.size(), "row sense count mismatch");
    require(lower.empty() || lower.size() == n, "lower bound count mismatch");
    require(upper.empty() || upper.size() == n, "upper bound count mismatch");
    for (double c : objective) require(std::isfinite(c), "non-finite objective coefficient");
    for (double b : rhs) require(std::isfinite(b), "non-finite right-hand side");
    for (std::size_t r = 0; r < constraints.rows(); ++r)
      for (double v : constraints.row(r)) require(std::isfinite(v), "non-finite coefficient");
    for (std::size_t j = 0; j < n; ++j) {
      const double lo = lower.empty() ? 0.0 : lower[j];
      const double hi = upper.empty() ? kInf : upper[j];
      require(!std::isnan(lo) && !std::isnan(hi), "NaN variable bound");
      require(lo <= hi, "variable lower bound exceeds upper bound");
    }
  }
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

/// Primal/dual result. Duals follow the objective sense of the program: for a
/// minimization a >= row has a nonnegative dual; for maximization a <= row
/// has a nonnegative dual. objective = sum(dual*rhs) + sum(reduced*x) over
/// columns resting at a nonzero bound.
struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> primal;
  std::vector<double> duals;
  std::vector<double> reduced_costs;
  double objective = 0.0;
  long iterations = 0;

  bool optimal() const noexcept { return status == LpStatus::kOptimal; }
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  long max_iterations = 0;
};

namespace detail {

inline void fill_rows(const LinearProgram& lp, EngineProblem& ep) {
  const std::size_t m = lp.num_rows();
  ep.row_lo.assign(m, -kInf);
  ep.row_hi.assign(m, kInf);
  for (std::size_t i = 0; i < m; ++i) {
    switch (lp.row_senses[i]) {
      case RowSense::kLessEqual: ep.row_hi[i] = lp.rhs[i]; break;
      case RowSense::kGreaterEqual: ep.row_lo[i] = lp.rhs[i]; break;
      case RowSense::kEqual: ep.row_lo[i] = ep.row_hi[i] = lp.rhs[i]; break;
    }
  }
}

inline LpStatus to_lp_status(EngineStatus s) {
  switch (s) {
    case EngineStatus::kOptimal: return LpStatus::kOptimal;
    case EngineStatus::kInfeasible: return LpStatus::kInfeasible;
    case EngineStatus::kUnbounded: return LpStatus::kUnbounded;
    case EngineStatus::kIterationLimit: return LpStatus::kIterationLimit;
  }
  return LpStatus::kInfeasible;
}

}  // namespace detail

inline LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opts = {}) {
  lp.validate();
  const std::size_t n = lp.num_vars();
  Matrix empty_rows(0, n);
  detail::EngineProblem ep;
  ep.a = lp.num_rows() == 0 ? &empty_rows : &lp.constraints;
  detail::fill_rows(lp, ep);
  ep.lo = lp.lower.empty() ? std::vector<double>(n, 0.0) : lp.lower;
  ep.hi = lp.upper.empty() ? std::vector<double>(n, kInf) : lp.upper;
  const double sign = lp.sense == ObjectiveSense::kMaximize ? -1.0 : 1.0;
  ep.cost.resize(n);
  for (std::size_t j = 0; j < n; ++j) ep.cost[j] = sign * lp.objective[j];

  detail::EngineOptions eo;
  eo.feasibility_tol = opts.feasibility_tol;
  eo.optimality_tol = opts.optimality_tol;
  eo.max_iterations = opts.max_iterations;
  detail::TableauEngine engine(ep, eo);
  detail::EngineResult er = engine.solve();

  LpSolution sol;
  sol.status = detail::to_lp_status(er.status);
  sol.iterations = er.iterations;
  if (!sol.optimal()) return sol;
  sol.primal = std::move(er.x);
  sol.duals.resize(er.row_duals.size());
  for (std::size_t i = 0; i < er.row_duals.size(); ++i) sol.duals[i] = sign * er.row_duals[i];
  sol.reduced_costs.resize(er.reduced.size());
  for (std::size_t j = 0; j < er.reduced.size(); ++j) sol.reduced_costs[j] = sign * er.reduced[j];
  sol.objective = sign * er.objective;
  return sol;
}

/// Largest violation of rows and bounds at `x`.
inline double primal_residual(const LinearProgram& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    double act = 0.0;
    const auto row = lp.constraints.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) act += row[j] * x[j];
    const double b = lp.rhs[i];
    double v = 0.0;
    switch (lp.row_senses[i]) {
      case RowSense::kLessEqual: v = act - b; break;
      case RowSense::kGreaterEqual: v = b - act; break;
      case RowSense::kEqual: v = std::abs(act - b); break;
    }
    worst = std::max(worst, v);
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double lo = lp.lower.empty() ? 0.0 : lp.lower[j];
    const double hi = lp.upper.empty() ? kInf : lp.upper[j];
    worst = std::max({worst, lo - x[j], x[j] - hi});
  }
  return worst;
}

/// Dual objective sum(dual*rhs) + sum(reduced*bound) for an optimal solution.
inline double dual_objective(const LinearProgram& lp, const LpSolution& sol) {
  double d = 0.0;
  for (std::size_t i = 0; i < lp.num_rows(); ++i) d += sol.duals[i] * lp.rhs[i];
  for (std::size_t j = 0; j < lp.num_vars(); ++j) d += sol.reduced_costs[j] * sol.primal[j];
  return d;
}

/// sum |dual_i * (a_i x - b_i)|.
inline double complementarity_residual(const LinearProgram& lp, const LpSolution& sol) {
  double s = 0.0;
  for (std::size_t i = 0; i < lp.num_rows(); ++i) {
    double act = 0.0;
    const auto row = lp.constraints.row(i);
    for (std::size_t j = 0; j < sol.primal.size(); ++j) act += row[j] * sol.primal[j];
    s += std::abs(sol.duals[i] * (act - lp.rhs[i]));
  }
  return s;
}

}  // namespace cfdea
