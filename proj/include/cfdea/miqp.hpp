// Branch-and-bound for linear constraints, binary variables and a linear plus
// diagonal convex quadratic objective. Relaxations are solved by the shared
// tableau engine; nodes are explored best-bound first and branched on the
// most fractional binary.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "cfdea/core.hpp"
#include "cfdea/detail/tableau.hpp"
#include "cfdea/lp.hpp"

namespace cfdea {

/// min offset + c'x + sum_j q_j x_j^2 subject to the rows and bounds of `lp`;
/// variables listed in `binaries` must take values in {0, 1}.
struct MiqpProblem {
  LinearProgram lp;  // sense must be kMinimize
  std::vector<double> quadratic;
  double offset = 0.0;
  std::vector<int> binaries;

  std::size_t num_vars() const noexcept { return lp.num_vars(); }

  int add_continuous(double cost, double lo = 0.0, double hi = kInf, double quad = 0.0) {
    const int j = lp.add_var(cost, lo, hi);
    quadratic.resize(lp.num_vars(), 0.0);
    quadratic[j] = quad;
    return j;
  }

  int add_binary(double cost) {
    const int j = add_continuous(cost, 0.0, 1.0);
    binaries.push_back(j);
    return j;
  }

  int add_row(const std::vector<std::pair<int, double>>& terms, RowSense s, double b) {
    return lp.add_row(terms, s, b);
  }

  bool has_quadratic() const {
    return std::any_of(quadratic.begin(), quadratic.end(), [](double q) { return q != 0.0; });
  }

  double evaluate(const std::vector<double>& x) const {
    double v = offset;
    for (std::size_t j = 0; j < x.size(); ++j) {
      v += lp.objective[j] * x[j];
      if (j < quadratic.size()) v += quadratic[j] * x[j] * x[j];
    }
    return v;
  }

  void validate() const {
    lp.validate();
    require(lp.sense == ObjectiveSense::kMinimize, "MIQP objective must be minimized");
    require(quadratic.empty() || quadratic.size() == lp.num_vars(),
            "quadratic coefficient count mismatch");
    for (double q : quadratic) {
      require(std::isfinite(q), "non-finite quadratic coefficient");
      require(q >= 0.0, "negative quadratic coefficient makes the objective non-convex");
    }
    std::vector<char> seen(lp.num_vars(), 0);
    for (int b : binaries) {
      require(b >= 0 && static_cast<std::size_t>(b) < lp.num_vars(), "binary index out of range");
      require(!seen[b], "binary index listed twice");
      seen[b] = 1;
      const double lo = lp.lower.empty() ? 0.0 : lp.lower[b];
      const double hi = lp.upper.empty() ? kInf : lp.upper[b];
      require(lo >= 0.0 && hi <= 1.0, "binary variables must be bounded to [0,1]");
    }
  }
};

enum class MiqpStatus { kOptimal, kInfeasible, kNodeLimit, kTimeLimit };

inline std::string_view to_string(MiqpStatus s) {
  switch (s) {
    case MiqpStatus::kOptimal: return "optimal";
    case MiqpStatus::kInfeasible: return "infeasible";
    case MiqpStatus::kNodeLimit: return "node_limit";
    case MiqpStatus::kTimeLimit: return "time_limit";
  }
  return "unknown";
}

struct MiqpOptions {
  long node_limit = 2'000'000;
  double time_limit_seconds = 600.0;
  double integrality_tol = 1e-6;
  double prune_tol = 1e-9;
  double absolute_gap = 1e-6;
  bool record_bound_trace = false;
};

struct MiqpSolution {
  MiqpStatus status = MiqpStatus::kInfeasible;
  std::vector<double> values;
  double objective = kInf;
  double bound = -kInf;
  double gap = kInf;
  long nodes = 0;
  double wall_seconds = 0.0;
  std::vector<double> bound_trace;  // global bound after each node

  bool has_incumbent() const noexcept { return !values.empty(); }
};

namespace detail {

class RelaxationSolver {
 public:
  explicit RelaxationSolver(const MiqpProblem& p) : p_(p) {
    const std::size_t n = p.num_vars();
    ep_.a = &p.lp.constraints;
    if (p.lp.num_rows() == 0) {
      empty_ = Matrix(0, n);
      ep_.a = &empty_;
    }
    fill_rows(p.lp, ep_);
    base_lo_ = p.lp.lower.empty() ? std::vector<double>(n, 0.0) : p.lp.lower;
    base_hi_ = p.lp.upper.empty() ? std::vector<double>(n, kInf) : p.lp.upper;
    ep_.cost = p.lp.objective;
    if (p.has_quadratic()) ep_.quad = p.quadratic;
  }

  const std::vector<double>& base_lower() const { return base_lo_; }
  const std::vector<double>& base_upper() const { return base_hi_; }

  LpSolution solve(const std::vector<double>& lo, const std::vector<double>& hi) {
    ep_.lo = lo;
    ep_.hi = hi;
    TableauEngine engine(ep_, EngineOptions{});
    EngineResult er = engine.solve();
    LpSolution sol;
    sol.status = to_lp_status(er.status);
    sol.iterations = er.iterations;
    if (!sol.optimal()) return sol;
    sol.primal = std::move(er.x);
    sol.duals = std::move(er.row_duals);
    sol.reduced_costs = std::move(er.reduced);
    sol.objective = er.objective + p_.offset;
    return sol;
  }

 private:
  const MiqpProblem& p_;
  EngineProblem ep_;
  Matrix empty_;
  std::vector<double> base_lo_;
  std::vector<double> base_hi_;
};

}  // namespace detail

/// Continuous relaxation: binaries range over [0,1]. Delegates to solve_lp
/// when the objective is linear.
inline LpSolution solve_qp_relaxation(const MiqpProblem& p) {
  p.validate();
  if (!p.has_quadratic()) {
    LpSolution s = solve_lp(p.lp);
    if (s.optimal()) s.objective += p.offset;
    return s;
  }
  detail::RelaxationSolver rs(p);
  return rs.solve(rs.base_lower(), rs.base_upper());
}

/// Largest row/bound violation and largest binary fractionality of `x`.
struct IncumbentCheck {
  double residual = 0.0;
  double integrality = 0.0;
};

inline IncumbentCheck check_incumbent(const MiqpProblem& p, const std::vector<double>& x) {
  IncumbentCheck c;
  c.residual = primal_residual(p.lp, x);
  for (int b : p.binaries) c.integrality = std::max(c.integrality, std::abs(x[b] - std::round(x[b])));
  return c;
}

inline MiqpSolution solve_miqp(const MiqpProblem& p, const MiqpOptions& opts = {}) {
  p.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  detail::RelaxationSolver relax(p);
  const std::size_t nb = p.binaries.size();

  struct Node {
    double bound;
    int depth;
    long id;
    std::vector<std::int8_t> fix;  // -1 free, 0 or 1 fixed
  };
  struct Worse {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      if (a.depth != b.depth) return a.depth < b.depth;
      return a.id > b.id;
    }
  };
  std::priority_queue<Node, std::vector<Node>, Worse> open;
  long next_id = 0;
  open.push(Node{-kInf, 0, next_id++, std::vector<std::int8_t>(nb, -1)});

  MiqpSolution out;
  double incumbent = kInf;
  double global_bound = -kInf;
  std::vector<double> lo;
  std::vector<double> hi;

  auto apply_fix = [&](const std::vector<std::int8_t>& fix) {
    lo = relax.base_lower();
    hi = relax.base_upper();
    for (std::size_t b = 0; b < nb; ++b) {
      if (fix[b] < 0) continue;
      lo[p.binaries[b]] = hi[p.binaries[b]] = fix[b];
    }
  };

  auto try_incumbent = [&](const std::vector<std::int8_t>& fix, const LpSolution& rel) -> bool {
    // Fix every binary at its rounded value and re-solve so complementarity
    // rows hold exactly.
    std::vector<std::int8_t> full(fix);
    for (std::size_t b = 0; b < nb; ++b)
      if (full[b] < 0) full[b] = static_cast<std::int8_t>(std::lround(rel.primal[p.binaries[b]]));
    apply_fix(full);
    LpSolution pol = relax.solve(lo, hi);
    if (!pol.optimal()) return false;
    if (pol.objective < incumbent) {
      incumbent = pol.objective;
      out.values = pol.primal;
      for (int bidx : p.binaries) out.values[bidx] = std::round(out.values[bidx]);
    }
    return true;
  };

  MiqpStatus stop = MiqpStatus::kOptimal;
  while (!open.empty()) {
    if (out.nodes >= opts.node_limit) {
      stop = MiqpStatus::kNodeLimit;
      break;
    }
    if (elapsed() > opts.time_limit_seconds) {
      stop = MiqpStatus::kTimeLimit;
      break;
    }
    Node node = open.top();
    open.pop();
    global_bound = std::max(global_bound, std::min(node.bound, incumbent));
    if (opts.record_bound_trace) out.bound_trace.push_back(global_bound);
    if (node.bound >= incumbent - opts.prune_tol) continue;
    if (incumbent - node.bound <= opts.absolute_gap) continue;
    ++out.nodes;

    apply_fix(node.fix);
    LpSolution rel = relax.solve(lo, hi);
    if (rel.status == LpStatus::kUnbounded)
      fail(ErrorCode::kInternal, "unbounded continuous relaxation");
    if (rel.status == LpStatus::kIterationLimit)
      fail(ErrorCode::kInternal, "relaxation hit the iteration limit");
    if (!rel.optimal()) continue;
    const double nb_bound = std::max(rel.objective, node.bound);
    if (nb_bound >= incumbent - opts.prune_tol) continue;

    int branch = -1;
    double most = opts.integrality_tol;
    for (std::size_t b = 0; b < nb; ++b) {
      if (node.fix[b] >= 0) continue;
      const double v = rel.primal[p.binaries[b]];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac > most) {
        most = frac;
        branch = static_cast<int>(b);
      }
    }
    if (branch < 0) {
      if (try_incumbent(node.fix, rel)) continue;
      // Rounding failed: branch on any free binary to force exact fixing.
      double far = -1.0;
      for (std::size_t b = 0; b < nb; ++b) {
        if (node.fix[b] >= 0) continue;
        const double v = rel.primal[p.binaries[b]];
        const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
        if (frac > far) {
          far = frac;
          branch = static_cast<int>(b);
        }
      }
      if (branch < 0) continue;
    }
    for (std::int8_t val : {std::int8_t{1}, std::int8_t{0}}) {
      Node child{nb_bound, node.depth + 1, next_id++, node.fix};
      child.fix[branch] = val;
      open.push(std::move(child));
    }
  }

  out.wall_seconds = elapsed();
  out.objective = incumbent;
  if (stop == MiqpStatus::kOptimal) {
    out.bound = out.has_incumbent() ? incumbent : kInf;
    out.status = out.has_incumbent() ? MiqpStatus::kOptimal : MiqpStatus::kInfeasible;
  } else {
    double b = incumbent;
    if (!open.empty()) b = std::min(b, open.top().bound);
    out.bound = std::max(global_bound, b == kInf ? global_bound : b);
    out.status = stop;
  }
  if (out.has_incumbent()) {
    out.gap = std::max(0.0, out.objective - out.bound) / std::max(1.0, std::abs(out.objective));
  }
  return out;
}

/// Exhaustive oracle: solves the continuous problem for every binary pattern.
inline MiqpSolution enumerate_binaries(const MiqpProblem& p) {
  p.validate();
  require(p.binaries.size() <= 22, "enumeration supports at most 22 binaries");
  const auto start = std::chrono::steady_clock::now();
  detail::RelaxationSolver relax(p);
  MiqpSolution out;
  const std::size_t nb = p.binaries.size();
  const std::uint64_t patterns = std::uint64_t{1} << nb;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    std::vector<double> lo = relax.base_lower();
    std::vector<double> hi = relax.base_upper();
    for (std::size_t b = 0; b < nb; ++b) {
      const double v = (mask >> b) & 1U ? 1.0 : 0.0;
      lo[p.binaries[b]] = hi[p.binaries[b]] = v;
    }
    LpSolution s = relax.solve(lo, hi);
    if (s.status == LpStatus::kUnbounded)
      fail(ErrorCode::kInternal, "unbounded continuous subproblem");
    ++out.nodes;
    if (s.optimal() && s.objective < out.objective) {
      out.objective = s.objective;
      out.values = s.primal;
    }
  }
  out.status = out.has_incumbent() ? MiqpStatus::kOptimal : MiqpStatus::kInfeasible;
  out.bound = out.objective;
  out.gap = out.has_incumbent() ? 0.0 : kInf;
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace cfdea
