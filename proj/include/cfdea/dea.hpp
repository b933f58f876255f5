// Farrell efficiency under CRS/VRS, scoring of arbitrary plans against a
// fixed technology, directional distance and radial projections.
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cfdea/core.hpp"
#include "cfdea/lp.hpp"

namespace cfdea {

enum class ScoreStatus { kOptimal, kInfeasible, kUnbounded };

inline std::string_view to_string(ScoreStatus s) {
  switch (s) {
    case ScoreStatus::kOptimal: return "optimal";
    case ScoreStatus::kInfeasible: return "infeasible";
    case ScoreStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

struct EfficiencyResult {
  ScoreStatus status = ScoreStatus::kOptimal;
  // Input orientation: Farrell input efficiency E. Output orientation: 1/F.
  double score = 0.0;
  // Output orientation only: Farrell output efficiency F >= 1 (0 otherwise).
  double output_factor = 0.0;
  std::vector<double> lambdas;
  std::vector<std::size_t> peers;
  std::vector<double> input_slacks;
  std::vector<double> output_slacks;
  // Multipliers of the input/output rows and the convexity row (VRS).
  std::vector<double> input_duals;
  std::vector<double> output_duals;
  double convexity_dual = 0.0;
  double lp_objective = 0.0;

  bool ok() const noexcept { return status == ScoreStatus::kOptimal; }
};

struct EfficiencyOptions {
  bool max_slacks = false;  // second stage: maximize total slack at fixed score
  double peer_threshold = 1e-7;
};

namespace detail {

struct ScoringLp {
  LinearProgram lp;
  int score_var = -1;
  std::vector<int> lambda_vars;
  std::vector<int> input_rows;
  std::vector<int> output_rows;
  int convexity_row = -1;
};

inline ScoringLp build_scoring_lp(const Panel& panel, std::span<const double> x,
                                  std::span<const double> y, Technology tech,
                                  Orientation orient) {
  ScoringLp s;
  const std::size_t n = panel.size();
  if (orient == Orientation::kInput) {
    s.lp.sense = ObjectiveSense::kMinimize;
    s.score_var = s.lp.add_var(1.0, 0.0, kInf);
  } else {
    s.lp.sense = ObjectiveSense::kMaximize;
    s.score_var = s.lp.add_var(1.0, 0.0, kInf);
  }
  for (std::size_t k = 0; k < n; ++k) s.lambda_vars.push_back(s.lp.add_var(0.0));
  for (std::size_t i = 0; i < panel.num_inputs(); ++i) {
    std::vector<std::pair<int, double>> t;
    for (std::size_t k = 0; k < n; ++k) t.push_back({s.lambda_vars[k], panel.inputs()(k, i)});
    if (orient == Orientation::kInput) {
      // E x_i - sum lambda x^k_i >= 0
      for (auto& term : t) term.second = -term.second;
      t.push_back({s.score_var, x[i]});
      s.input_rows.push_back(s.lp.add_row(t, RowSense::kGreaterEqual, 0.0));
    } else {
      s.input_rows.push_back(s.lp.add_row(t, RowSense::kLessEqual, x[i]));
    }
  }
  for (std::size_t o = 0; o < panel.num_outputs(); ++o) {
    std::vector<std::pair<int, double>> t;
    for (std::size_t k = 0; k < n; ++k) t.push_back({s.lambda_vars[k], panel.outputs()(k, o)});
    if (orient == Orientation::kInput) {
      s.output_rows.push_back(s.lp.add_row(t, RowSense::kGreaterEqual, y[o]));
    } else {
      t.push_back({s.score_var, -y[o]});
      s.output_rows.push_back(s.lp.add_row(t, RowSense::kGreaterEqual, 0.0));
    }
  }
  if (tech == Technology::kVrs) {
    std::vector<std::pair<int, double>> t;
    for (int v : s.lambda_vars) t.push_back({v, 1.0});
    s.convexity_row = s.lp.add_row(t, RowSense::kEqual, 1.0);
  }
  return s;
}

inline ScoreStatus to_score_status(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return ScoreStatus::kOptimal;
    case LpStatus::kUnbounded: return ScoreStatus::kUnbounded;
    case LpStatus::kInfeasible: return ScoreStatus::kInfeasible;
    case LpStatus::kIterationLimit:
      fail(ErrorCode::kInternal, "scoring LP hit the iteration limit");
  }
  return ScoreStatus::kInfeasible;
}

}  // namespace detail

/// Scores the plan (x, y) against the technology spanned by the panel's units
/// only; the plan itself does not enter the technology.
inline EfficiencyResult efficiency_of_plan(const Panel& panel, std::span<const double> x,
                                           std::span<const double> y, Technology tech,
                                           Orientation orient,
                                           const EfficiencyOptions& opts = {}) {
  require(x.size() == panel.num_inputs(), "plan input length mismatch");
  require(y.size() == panel.num_outputs(), "plan output length mismatch");
  for (double v : x) require(std::isfinite(v) && v >= 0.0, "plan inputs must be nonnegative");
  for (double v : y) require(std::isfinite(v) && v >= 0.0, "plan outputs must be nonnegative");

  detail::ScoringLp s = detail::build_scoring_lp(panel, x, y, tech, orient);
  const LpSolution sol = solve_lp(s.lp);
  EfficiencyResult r;
  r.status = detail::to_score_status(sol.status);
  if (!r.ok()) return r;

  const double value = sol.primal[s.score_var];
  r.lp_objective = value;
  if (orient == Orientation::kInput) {
    r.score = value;
  } else {
    r.output_factor = value;
    r.score = value > 0.0 ? 1.0 / value : kInf;
  }
  for (int v : s.lambda_vars) r.lambdas.push_back(std::max(0.0, sol.primal[v]));
  for (int row : s.input_rows) r.input_duals.push_back(std::abs(sol.duals[row]));
  for (int row : s.output_rows) r.output_duals.push_back(std::abs(sol.duals[row]));
  if (s.convexity_row >= 0) r.convexity_dual = sol.duals[s.convexity_row];

  std::vector<double> lambdas = r.lambdas;
  if (opts.max_slacks) {
    // Second stage: hold the score and maximize total slack.
    LinearProgram st = s.lp;
    st.sense = ObjectiveSense::kMaximize;
    std::fill(st.objective.begin(), st.objective.end(), 0.0);
    st.materialize_bounds();
    st.lower[s.score_var] = st.upper[s.score_var] = value;
    for (std::size_t i = 0; i < s.input_rows.size(); ++i) {
      const int sv = st.add_var(1.0);
      st.constraints(s.input_rows[i], sv) = orient == Orientation::kInput ? -1.0 : 1.0;
      st.row_senses[s.input_rows[i]] = RowSense::kEqual;
    }
    for (std::size_t o = 0; o < s.output_rows.size(); ++o) {
      const int sv = st.add_var(1.0);
      st.constraints(s.output_rows[o], sv) = -1.0;
      st.row_senses[s.output_rows[o]] = RowSense::kEqual;
    }
    const LpSolution s2 = solve_lp(st);
    if (s2.optimal())
      for (std::size_t k = 0; k < lambdas.size(); ++k)
        lambdas[k] = std::max(0.0, s2.primal[s.lambda_vars[k]]);
    r.lambdas = lambdas;
  }

  for (std::size_t k = 0; k < lambdas.size(); ++k)
    if (lambdas[k] > opts.peer_threshold) r.peers.push_back(k);
  for (std::size_t i = 0; i < panel.num_inputs(); ++i) {
    double ref = 0.0;
    for (std::size_t k = 0; k < lambdas.size(); ++k) ref += lambdas[k] * panel.inputs()(k, i);
    const double avail = orient == Orientation::kInput ? value * x[i] : x[i];
    r.input_slacks.push_back(std::max(0.0, avail - ref));
  }
  for (std::size_t o = 0; o < panel.num_outputs(); ++o) {
    double ref = 0.0;
    for (std::size_t k = 0; k < lambdas.size(); ++k) ref += lambdas[k] * panel.outputs()(k, o);
    const double need = orient == Orientation::kInput ? y[o] : value * y[o];
    r.output_slacks.push_back(std::max(0.0, ref - need));
  }
  return r;
}

/// Efficiency of observed unit k; the unit is part of its own technology.
inline EfficiencyResult efficiency(const Panel& panel, std::size_t k, Technology tech,
                                   Orientation orient, const EfficiencyOptions& opts = {}) {
  if (k >= panel.size()) fail(ErrorCode::kNotFound, "unit index out of range");
  EfficiencyResult r = efficiency_of_plan(panel, panel.input(k), panel.output(k), tech, orient, opts);
  if (!r.ok())
    fail(ErrorCode::kInternal, "efficiency LP for observed unit '" + panel.id(k) + "' is " +
                                   std::string(to_string(r.status)));
  return r;
}

/// Scores of every unit, in panel order.
inline std::vector<double> efficiency_scores(const Panel& panel, Technology tech,
                                             Orientation orient) {
  std::vector<double> out;
  out.reserve(panel.size());
  for (std::size_t k = 0; k < panel.size(); ++k)
    out.push_back(efficiency(panel, k, tech, orient).score);
  return out;
}

struct DirectionalRequest {
  std::vector<double> d_x;
  std::vector<double> d_y;

  void validate(const Panel& panel) const {
    require(d_x.size() == panel.num_inputs() && d_y.size() == panel.num_outputs(),
            "direction length mismatch");
    bool positive = false;
    for (double v : d_x) {
      require(std::isfinite(v) && v >= 0.0, "direction entries must be nonnegative");
      positive = positive || v > 0.0;
    }
    for (double v : d_y) {
      require(std::isfinite(v) && v >= 0.0, "direction entries must be nonnegative");
      positive = positive || v > 0.0;
    }
    require(positive, "direction must have a positive entry");
  }
};

struct DirectionalResult {
  ScoreStatus status = ScoreStatus::kOptimal;
  double excess = 0.0;
  std::vector<double> target_x;
  std::vector<double> target_y;
  std::vector<double> lambdas;
};

/// max e such that (x - e d_x, y + e d_y) stays in the technology.
inline DirectionalResult directional_distance(const Panel& panel, std::size_t k,
                                              const DirectionalRequest& dir, Technology tech) {
  if (k >= panel.size()) fail(ErrorCode::kNotFound, "unit index out of range");
  dir.validate(panel);
  const std::size_t n = panel.size();
  LinearProgram lp;
  lp.sense = ObjectiveSense::kMaximize;
  const int e = lp.add_var(1.0, -kInf, kInf);
  std::vector<int> lam;
  for (std::size_t j = 0; j < n; ++j) lam.push_back(lp.add_var(0.0));
  const auto x = panel.input(k);
  const auto y = panel.output(k);
  for (std::size_t i = 0; i < panel.num_inputs(); ++i) {
    std::vector<std::pair<int, double>> t{{e, dir.d_x[i]}};
    for (std::size_t j = 0; j < n; ++j) t.push_back({lam[j], panel.inputs()(j, i)});
    lp.add_row(t, RowSense::kLessEqual, x[i]);
  }
  for (std::size_t o = 0; o < panel.num_outputs(); ++o) {
    std::vector<std::pair<int, double>> t{{e, -dir.d_y[o]}};
    for (std::size_t j = 0; j < n; ++j) t.push_back({lam[j], panel.outputs()(j, o)});
    lp.add_row(t, RowSense::kGreaterEqual, y[o]);
  }
  if (tech == Technology::kVrs) {
    std::vector<std::pair<int, double>> t;
    for (int v : lam) t.push_back({v, 1.0});
    lp.add_row(t, RowSense::kEqual, 1.0);
  }
  const LpSolution sol = solve_lp(lp);
  DirectionalResult r;
  r.status = detail::to_score_status(sol.status);
  if (!sol.optimal()) return r;
  r.excess = sol.primal[e];
  for (std::size_t i = 0; i < panel.num_inputs(); ++i)
    r.target_x.push_back(x[i] - r.excess * dir.d_x[i]);
  for (std::size_t o = 0; o < panel.num_outputs(); ++o)
    r.target_y.push_back(y[o] + r.excess * dir.d_y[o]);
  for (int v : lam) r.lambdas.push_back(std::max(0.0, sol.primal[v]));
  return r;
}

/// Radial input target theta * x^k scoring exactly `e_target`.
inline std::vector<double> farrell_projection(const Panel& panel, std::size_t k,
                                              double e_target, Technology tech) {
  if (k >= panel.size()) fail(ErrorCode::kNotFound, "unit index out of range");
  const double current = efficiency(panel, k, tech, Orientation::kInput).score;
  require(std::isfinite(e_target) && e_target > 0.0, "target efficiency must be positive");
  if (e_target < current - 1e-9)
    fail(ErrorCode::kInvalidArgument, "target below current score");
  const auto x = panel.input(k);
  std::vector<double> out(x.begin(), x.end());
  if (e_target <= current) return out;

  double theta = current / e_target;
  if (tech == Technology::kVrs) {
    // Bisection on theta: the score of theta*x^k decreases in theta.
    auto score_at = [&](double th) {
      std::vector<double> xs(x.begin(), x.end());
      for (double& v : xs) v *= th;
      return efficiency_of_plan(panel, xs, panel.output(k), tech, Orientation::kInput).score;
    };
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (score_at(mid) >= e_target) lo = mid;
      else hi = mid;
    }
    theta = lo;
  }
  for (double& v : out) v *= theta;
  return out;
}

}  // namespace cfdea
