// Least-cost counterfactual plans. The bilevel problem "change the plan as
// little as possible so that its DEA efficiency reaches E*" is made
// single-level by replacing the efficiency LP with its KKT conditions;
// complementarity is modelled with big-M rows and binary indicators:
//
//   u_i  input row i is tight (its multiplier may be nonzero)
//   v_o  output row o is tight
//   w_k  unit k may carry intensity (its dual row is tight)
//   xi_i feature i changes (l0 term)
//
// Input orientation uses F = 1/E and beta = lambda/E so that the lower level
// becomes linear in the plan. Output orientation keeps E and lambda.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cfdea/core.hpp"
#include "cfdea/dea.hpp"
#include "cfdea/lp.hpp"
#include "cfdea/miqp.hpp"

namespace cfdea {

inline constexpr double kChangeThreshold = 1e-7;
inline constexpr double kNudgeWeight = 1e-9;

struct CounterfactualRequest {
  std::size_t firm = 0;
  double desired_efficiency = 1.0;
  CostWeights weights;
  Technology tech = Technology::kCrs;
  Orientation orient = Orientation::kInput;
  BigMConfig big_m;
  // Feature-space restrictions in the units of the panel passed to explain.
  std::vector<double> lower_bounds;  // empty: 0
  std::vector<double> upper_bounds;  // empty: +inf
  std::vector<std::size_t> locked;
  bool normalize = false;
  bool uniqueness_nudge = true;
  bool tighten_big_m = true;
  MiqpOptions solver;
  std::string label;  // copied to the result, e.g. the cost preset name
};

enum class BigMKind { kInputMultiplier, kInputSlack, kOutputMultiplier, kOutputSlack,
                      kIntensity, kDualSlack, kChange };

inline std::string_view to_string(BigMKind k) {
  switch (k) {
    case BigMKind::kInputMultiplier: return "input_multiplier";
    case BigMKind::kInputSlack: return "input_slack";
    case BigMKind::kOutputMultiplier: return "output_multiplier";
    case BigMKind::kOutputSlack: return "output_slack";
    case BigMKind::kIntensity: return "intensity";
    case BigMKind::kDualSlack: return "dual_slack";
    case BigMKind::kChange: return "change";
  }
  return "unknown";
}

struct BigMRow {
  BigMKind kind;
  std::size_t index;   // feature, output or unit index
  int row;             // row in the MIQP
  double configured_m;
  double effective_m;  // after bound tightening
};

/// Column and row indices of an assembled counterfactual program.
struct CounterfactualLayout {
  Orientation orient = Orientation::kInput;
  Technology tech = Technology::kCrs;
  std::vector<int> plan;       // x-hat (input) or y-hat (output)
  int efficiency_var = -1;     // F (input) or E (output)
  std::vector<int> intensity;  // beta (input) or lambda (output)
  std::vector<int> gamma_in;
  std::vector<int> gamma_out;
  std::vector<int> eta;
  int kappa = -1;              // VRS only
  std::vector<int> xi;
  std::vector<int> u;
  std::vector<int> v;
  std::vector<int> w;
  std::vector<int> lock_rows;
  int convexity_row = -1;
  std::vector<BigMRow> big_m_rows;
  std::size_t continuous_count = 0;
  std::size_t binary_count = 0;
  std::size_t core_row_count = 0;  // rows excluding lock rows
};

struct CounterfactualProgram {
  MiqpProblem problem;
  CounterfactualLayout layout;
  std::vector<double> original_plan;  // changeable side of the evaluated unit
  double original_efficiency = 0.0;
  double nudge = 0.0;                 // hidden l2 weight added by explain
};

/// Solved values of a counterfactual program plus the row quantities the
/// big-M audit inspects.
struct CounterfactualVariables {
  std::vector<double> plan;
  double efficiency_var = 0.0;
  std::vector<double> intensity;
  std::vector<double> gamma_in;
  std::vector<double> gamma_out;
  std::vector<double> eta;
  std::optional<double> kappa;
  std::vector<int> xi;
  std::vector<int> u;
  std::vector<int> v;
  std::vector<int> w;
  std::vector<double> input_slack;   // left side of the input slack rows
  std::vector<double> output_slack;  // left side of the output slack rows
  std::vector<double> dual_slack;    // gamma_I x^k - gamma_O y^k (- kappa)
  std::vector<double> deviation;     // original minus counterfactual feature
};

enum class AuditStatus { kPass, kWarn };

struct AuditRow {
  BigMKind kind;
  std::size_t index;
  double value;
  double bound;
  AuditStatus status;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  bool pass = true;
  std::size_t warnings = 0;
};

/// Flags every big-M row whose non-indicator side reaches 99% of its M.
inline AuditReport audit_big_m(const CounterfactualVariables& vars, const BigMConfig& big_m) {
  AuditReport rep;
  auto add = [&](BigMKind kind, std::size_t idx, double value, double m) {
    const double mag = std::abs(value);
    const AuditStatus st = mag >= 0.99 * m ? AuditStatus::kWarn : AuditStatus::kPass;
    if (st == AuditStatus::kWarn) {
      rep.pass = false;
      ++rep.warnings;
    }
    rep.rows.push_back({kind, idx, value, m, st});
  };
  for (std::size_t i = 0; i < vars.gamma_in.size(); ++i)
    add(BigMKind::kInputMultiplier, i, vars.gamma_in[i], big_m.m_input);
  for (std::size_t i = 0; i < vars.input_slack.size(); ++i)
    add(BigMKind::kInputSlack, i, vars.input_slack[i], big_m.m_input);
  for (std::size_t o = 0; o < vars.gamma_out.size(); ++o)
    add(BigMKind::kOutputMultiplier, o, vars.gamma_out[o], big_m.m_output);
  for (std::size_t o = 0; o < vars.output_slack.size(); ++o)
    add(BigMKind::kOutputSlack, o, vars.output_slack[o], big_m.m_output);
  for (std::size_t k = 0; k < vars.intensity.size(); ++k)
    add(BigMKind::kIntensity, k, vars.intensity[k], big_m.m_frontier);
  for (std::size_t k = 0; k < vars.dual_slack.size(); ++k)
    add(BigMKind::kDualSlack, k, vars.dual_slack[k], big_m.m_frontier);
  for (std::size_t i = 0; i < vars.deviation.size(); ++i)
    add(BigMKind::kChange, i, vars.deviation[i], big_m.m_zero);
  return rep;
}

namespace detail {

using Terms = std::vector<std::pair<int, double>>;

struct FeatureBox {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<char> locked;
};

inline FeatureBox feature_box(const CounterfactualRequest& req, std::span<const double> original) {
  const std::size_t d = original.size();
  FeatureBox box{std::vector<double>(d, 0.0), std::vector<double>(d, kInf),
                 std::vector<char>(d, 0)};
  if (!req.lower_bounds.empty()) {
    require(req.lower_bounds.size() == d, "lower bound count mismatch");
    for (std::size_t i = 0; i < d; ++i) box.lo[i] = std::max(0.0, req.lower_bounds[i]);
  }
  if (!req.upper_bounds.empty()) {
    require(req.upper_bounds.size() == d, "upper bound count mismatch");
    for (std::size_t i = 0; i < d; ++i) box.hi[i] = req.upper_bounds[i];
  }
  for (std::size_t i = 0; i < d; ++i) {
    require(!std::isnan(box.lo[i]) && !std::isnan(box.hi[i]), "NaN feature bound");
    require(box.lo[i] <= box.hi[i], "inconsistent feature bounds for feature " + std::to_string(i));
  }
  for (std::size_t i : req.locked) {
    require(i < d, "locked feature index out of range");
    box.locked[i] = 1;
  }
  return box;
}

inline void check_target(const Panel& panel, const CounterfactualRequest& req, double current) {
  require(std::isfinite(req.desired_efficiency) && req.desired_efficiency > 0.0,
          "desired efficiency must be positive");
  require(req.desired_efficiency <= 1.0 + 1e-12, "desired efficiency cannot exceed 1");
  if (req.desired_efficiency < current - 1e-9)
    fail(ErrorCode::kInvalidArgument, "target below current score");
  (void)panel;
}

inline void check_common(const Panel& panel, const CounterfactualRequest& req) {
  if (req.firm >= panel.size()) fail(ErrorCode::kNotFound, "unit index out of range");
  require(panel.inputs_strictly_positive(), "panel inputs must be strictly positive");
  req.weights.validate(req.orient == Orientation::kInput ? panel.num_inputs()
                                                         : panel.num_outputs());
  req.big_m.validate();
}

// Objective terms shared by both orientations: l0 on xi, weighted l1 and
// l2^2 on eta.
inline void add_cost_columns(MiqpProblem& p, CounterfactualLayout& lay,
                             const CounterfactualRequest& req, std::size_t d) {
  const CostWeights& cw = req.weights;
  for (std::size_t i = 0; i < d; ++i) {
    const double fw = cw.feature_weight(i);
    lay.eta.push_back(p.add_continuous(cw.nu1 * fw, 0.0, kInf, cw.nu2 * fw));
  }
}

// Hidden l2 weight that makes the optimum unique when nu2 = 0.
inline void apply_nudge(CounterfactualProgram& prog, const CounterfactualRequest& req) {
  if (req.weights.nu2 != 0.0 || !req.uniqueness_nudge) return;
  prog.nudge = kNudgeWeight;
  for (std::size_t i = 0; i < prog.layout.eta.size(); ++i)
    prog.problem.quadratic[prog.layout.eta[i]] = kNudgeWeight * req.weights.feature_weight(i);
}

inline void add_change_rows(MiqpProblem& p, CounterfactualLayout& lay, const BigMConfig& bm,
                            std::span<const double> original) {
  const std::size_t d = original.size();
  for (std::size_t i = 0; i < d; ++i) {
    // x0 - xhat <= Mz xi  and  x0 - xhat >= -Mz xi
    const int r1 = p.add_row({{lay.plan[i], -1.0}, {lay.xi[i], -bm.m_zero}},
                             RowSense::kLessEqual, -original[i]);
    const int r2 = p.add_row({{lay.plan[i], -1.0}, {lay.xi[i], bm.m_zero}},
                             RowSense::kGreaterEqual, -original[i]);
    lay.big_m_rows.push_back({BigMKind::kChange, i, r1, bm.m_zero, bm.m_zero});
    lay.big_m_rows.push_back({BigMKind::kChange, i, r2, bm.m_zero, bm.m_zero});
  }
  for (std::size_t i = 0; i < d; ++i) {
    // eta >= x0 - xhat  and  eta >= xhat - x0
    p.add_row({{lay.eta[i], 1.0}, {lay.plan[i], 1.0}}, RowSense::kGreaterEqual, original[i]);
    p.add_row({{lay.eta[i], 1.0}, {lay.plan[i], -1.0}}, RowSense::kGreaterEqual, -original[i]);
  }
}

inline void add_lock_rows(MiqpProblem& p, CounterfactualLayout& lay, const FeatureBox& box,
                          std::span<const double> original) {
  for (std::size_t i = 0; i < original.size(); ++i)
    if (box.locked[i])
      lay.lock_rows.push_back(p.add_row({{lay.plan[i], 1.0}}, RowSense::kEqual, original[i]));
}

inline std::pair<double, double> plan_bounds(const FeatureBox& box, std::size_t i, double original,
                                             const CounterfactualRequest& req) {
  double lo = box.lo[i];
  double hi = box.hi[i];
  if (req.tighten_big_m) {
    // Implied by the l0 rows because xi <= 1.
    lo = std::max(lo, original - req.big_m.m_zero);
    hi = std::min(hi, original + req.big_m.m_zero);
  }
  lo = std::max(lo, 0.0);
  if (lo > hi) fail(ErrorCode::kInfeasible, "feature bounds leave no admissible value");
  return {lo, hi};
}

}  // namespace detail

/// Input orientation, CRS (tech = kCrs) or VRS (tech = kVrs) when called
/// through build_input_program; see build_cedea / build_cevdea.
inline CounterfactualProgram build_input_program(const Panel& panel,
                                                 const CounterfactualRequest& req) {
  detail::check_common(panel, req);
  require(req.orient == Orientation::kInput, "input program needs input orientation");
  const std::size_t k0 = req.firm;
  const std::size_t I = panel.num_inputs();
  const std::size_t O = panel.num_outputs();
  const std::size_t K1 = panel.size();
  const bool vrs = req.tech == Technology::kVrs;
  const auto x0 = panel.input(k0);
  const auto y0 = panel.output(k0);

  CounterfactualProgram prog;
  prog.original_efficiency = efficiency(panel, k0, req.tech, Orientation::kInput).score;
  detail::check_target(panel, req, prog.original_efficiency);
  prog.original_plan.assign(x0.begin(), x0.end());
  const double f_star = 1.0 / req.desired_efficiency;
  const detail::FeatureBox box = detail::feature_box(req, x0);
  const BigMConfig& bm = req.big_m;

  MiqpProblem& p = prog.problem;
  CounterfactualLayout& lay = prog.layout;
  lay.orient = Orientation::kInput;
  lay.tech = req.tech;

  // Continuous columns.
  std::vector<double> xhat_hi(I);
  for (std::size_t i = 0; i < I; ++i) {
    const auto [lo, hi] = detail::plan_bounds(box, i, x0[i], req);
    xhat_hi[i] = hi;
    lay.plan.push_back(p.add_continuous(0.0, lo, hi));
  }
  lay.efficiency_var = p.add_continuous(0.0, 0.0, kInf);
  std::vector<double> beta_hi(K1, kInf);
  for (std::size_t k = 0; k < K1; ++k) {
    if (req.tighten_big_m)
      for (std::size_t i = 0; i < I; ++i)
        beta_hi[k] = std::min(beta_hi[k], xhat_hi[i] / panel.inputs()(k, i));
    lay.intensity.push_back(p.add_continuous(0.0, 0.0, beta_hi[k]));
  }
  for (std::size_t i = 0; i < I; ++i) lay.gamma_in.push_back(p.add_continuous(0.0));
  std::vector<double> gout_hi(O, kInf);
  for (std::size_t o = 0; o < O; ++o) {
    if (req.tighten_big_m && !vrs && y0[o] > 0.0) gout_hi[o] = 1.0 / y0[o];
    lay.gamma_out.push_back(p.add_continuous(0.0, 0.0, gout_hi[o]));
  }
  detail::add_cost_columns(p, lay, req, I);
  if (vrs) lay.kappa = p.add_continuous(0.0, -kInf, kInf);
  lay.continuous_count = p.num_vars();

  // Binary columns.
  for (std::size_t i = 0; i < I; ++i) lay.xi.push_back(p.add_binary(req.weights.nu0));
  for (std::size_t i = 0; i < I; ++i) lay.u.push_back(p.add_binary(0.0));
  for (std::size_t o = 0; o < O; ++o) lay.v.push_back(p.add_binary(0.0));
  for (std::size_t k = 0; k < K1; ++k) lay.w.push_back(p.add_binary(0.0));
  lay.binary_count = p.binaries.size();

  // F <= F*
  p.add_row({{lay.efficiency_var, 1.0}}, RowSense::kLessEqual, f_star);

  // Primal feasibility of the lower level.
  auto input_slack_terms = [&](std::size_t i) {
    detail::Terms t{{lay.plan[i], 1.0}};
    for (std::size_t k = 0; k < K1; ++k) t.push_back({lay.intensity[k], -panel.inputs()(k, i)});
    return t;
  };
  auto output_slack_terms = [&](std::size_t o) {
    detail::Terms t{{lay.efficiency_var, -y0[o]}};
    for (std::size_t k = 0; k < K1; ++k) t.push_back({lay.intensity[k], panel.outputs()(k, o)});
    return t;
  };
  for (std::size_t i = 0; i < I; ++i)
    p.add_row(input_slack_terms(i), RowSense::kGreaterEqual, 0.0);
  for (std::size_t o = 0; o < O; ++o)
    p.add_row(output_slack_terms(o), RowSense::kGreaterEqual, 0.0);

  // Dual feasibility with delta = 0 and mu folded into the inequality.
  {
    detail::Terms t;
    for (std::size_t o = 0; o < O; ++o) t.push_back({lay.gamma_out[o], y0[o]});
    if (vrs) t.push_back({lay.kappa, 1.0});
    p.add_row(t, RowSense::kEqual, 1.0);
  }
  auto dual_slack_terms = [&](std::size_t k) {
    detail::Terms t;
    for (std::size_t i = 0; i < I; ++i) t.push_back({lay.gamma_in[i], panel.inputs()(k, i)});
    for (std::size_t o = 0; o < O; ++o) t.push_back({lay.gamma_out[o], -panel.outputs()(k, o)});
    if (vrs) t.push_back({lay.kappa, -1.0});
    return t;
  };
  for (std::size_t k = 0; k < K1; ++k) p.add_row(dual_slack_terms(k), RowSense::kGreaterEqual, 0.0);

  // Complementarity, input rows.
  for (std::size_t i = 0; i < I; ++i) {
    const double m_mult = bm.m_input;
    const double m_slack = req.tighten_big_m ? std::min(bm.m_input, xhat_hi[i]) : bm.m_input;
    const int r1 = p.add_row({{lay.gamma_in[i], 1.0}, {lay.u[i], -m_mult}}, RowSense::kLessEqual, 0.0);
    detail::Terms t = input_slack_terms(i);
    t.push_back({lay.u[i], m_slack});
    const int r2 = p.add_row(t, RowSense::kLessEqual, m_slack);
    lay.big_m_rows.push_back({BigMKind::kInputMultiplier, i, r1, bm.m_input, m_mult});
    lay.big_m_rows.push_back({BigMKind::kInputSlack, i, r2, bm.m_input, m_slack});
  }
  // Complementarity, output rows.
  for (std::size_t o = 0; o < O; ++o) {
    const double m_mult = std::min(bm.m_output, gout_hi[o]);
    double slack_cap = 0.0;
    for (std::size_t k = 0; k < K1; ++k) slack_cap += beta_hi[k] * panel.outputs()(k, o);
    const double m_slack = req.tighten_big_m ? std::min(bm.m_output, slack_cap) : bm.m_output;
    const int r1 = p.add_row({{lay.gamma_out[o], 1.0}, {lay.v[o], -m_mult}}, RowSense::kLessEqual, 0.0);
    detail::Terms t = output_slack_terms(o);
    t.push_back({lay.v[o], m_slack});
    const int r2 = p.add_row(t, RowSense::kLessEqual, m_slack);
    lay.big_m_rows.push_back({BigMKind::kOutputMultiplier, o, r1, bm.m_output, m_mult});
    lay.big_m_rows.push_back({BigMKind::kOutputSlack, o, r2, bm.m_output, m_slack});
  }
  // Complementarity, frontier.
  for (std::size_t k = 0; k < K1; ++k) {
    const double m_int = std::min(bm.m_frontier, beta_hi[k]);
    const double m_dual = bm.m_frontier;
    const int r1 = p.add_row({{lay.intensity[k], 1.0}, {lay.w[k], -m_int}}, RowSense::kLessEqual, 0.0);
    detail::Terms t = dual_slack_terms(k);
    t.push_back({lay.w[k], m_dual});
    const int r2 = p.add_row(t, RowSense::kLessEqual, m_dual);
    lay.big_m_rows.push_back({BigMKind::kIntensity, k, r1, bm.m_frontier, m_int});
    lay.big_m_rows.push_back({BigMKind::kDualSlack, k, r2, bm.m_frontier, m_dual});
  }
  detail::add_change_rows(p, lay, bm, x0);
  if (vrs) {
    detail::Terms t{{lay.efficiency_var, -1.0}};
    for (int b : lay.intensity) t.push_back({b, 1.0});
    lay.convexity_row = p.add_row(t, RowSense::kEqual, 0.0);
  }
  lay.core_row_count = p.lp.num_rows();
  detail::add_lock_rows(p, lay, box, x0);
  return prog;
}

/// Input orientation, constant returns to scale.
inline CounterfactualProgram build_cedea(const Panel& panel, CounterfactualRequest req) {
  require(req.tech == Technology::kCrs, "build_cedea needs CRS technology");
  req.orient = Orientation::kInput;
  return build_input_program(panel, req);
}

/// Input orientation, variable returns to scale (adds kappa and the
/// convexity row sum(beta) = F).
inline CounterfactualProgram build_cevdea(const Panel& panel, CounterfactualRequest req) {
  require(req.tech == Technology::kVrs, "build_cevdea needs VRS technology");
  req.orient = Orientation::kInput;
  return build_input_program(panel, req);
}

/// Output orientation: outputs change, inputs stay; E is the input efficiency
/// of (x0, y-hat). CRS by default, VRS adds kappa and sum(lambda) = 1.
inline CounterfactualProgram build_ceodea(const Panel& panel, CounterfactualRequest req) {
  req.orient = Orientation::kOutput;
  detail::check_common(panel, req);
  const std::size_t k0 = req.firm;
  const std::size_t I = panel.num_inputs();
  const std::size_t O = panel.num_outputs();
  const std::size_t K1 = panel.size();
  const bool vrs = req.tech == Technology::kVrs;
  const auto x0 = panel.input(k0);
  const auto y0 = panel.output(k0);

  CounterfactualProgram prog;
  prog.original_efficiency = efficiency(panel, k0, req.tech, Orientation::kInput).score;
  detail::check_target(panel, req, prog.original_efficiency);
  prog.original_plan.assign(y0.begin(), y0.end());
  const detail::FeatureBox box = detail::feature_box(req, y0);
  const BigMConfig& bm = req.big_m;

  MiqpProblem& p = prog.problem;
  CounterfactualLayout& lay = prog.layout;
  lay.orient = Orientation::kOutput;
  lay.tech = req.tech;

  std::vector<double> yhat_hi(O);
  for (std::size_t o = 0; o < O; ++o) {
    const auto [lo, hi] = detail::plan_bounds(box, o, y0[o], req);
    yhat_hi[o] = hi;
    lay.plan.push_back(p.add_continuous(0.0, lo, hi));
  }
  // Every KKT point has E equal to the efficiency of (x0, y-hat), which is
  // at most the efficiency of (x0, y-hat upper bounds).
  double e_hi = kInf;
  if (req.tighten_big_m &&
      std::all_of(yhat_hi.begin(), yhat_hi.end(), [](double v) { return std::isfinite(v); })) {
    const EfficiencyResult top =
        efficiency_of_plan(panel, x0, yhat_hi, req.tech, Orientation::kInput);
    if (top.ok()) e_hi = std::max(top.score, req.desired_efficiency) * (1.0 + 1e-9) + 1e-12;
  }
  lay.efficiency_var = p.add_continuous(0.0, 0.0, e_hi);
  std::vector<double> lam_hi(K1, kInf);
  for (std::size_t k = 0; k < K1; ++k) {
    if (std::isfinite(e_hi))
      for (std::size_t i = 0; i < I; ++i)
        lam_hi[k] = std::min(lam_hi[k], e_hi * x0[i] / panel.inputs()(k, i));
    if (vrs) lam_hi[k] = std::min(lam_hi[k], 1.0);
    lay.intensity.push_back(p.add_continuous(0.0, 0.0, lam_hi[k]));
  }
  std::vector<double> gin_hi(I, kInf);
  for (std::size_t i = 0; i < I; ++i) {
    if (req.tighten_big_m) gin_hi[i] = 1.0 / x0[i];
    lay.gamma_in.push_back(p.add_continuous(0.0, 0.0, gin_hi[i]));
  }
  for (std::size_t o = 0; o < O; ++o) lay.gamma_out.push_back(p.add_continuous(0.0));
  detail::add_cost_columns(p, lay, req, O);
  if (vrs) lay.kappa = p.add_continuous(0.0, -kInf, kInf);
  lay.continuous_count = p.num_vars();

  for (std::size_t o = 0; o < O; ++o) lay.xi.push_back(p.add_binary(req.weights.nu0));
  for (std::size_t i = 0; i < I; ++i) lay.u.push_back(p.add_binary(0.0));
  for (std::size_t o = 0; o < O; ++o) lay.v.push_back(p.add_binary(0.0));
  for (std::size_t k = 0; k < K1; ++k) lay.w.push_back(p.add_binary(0.0));
  lay.binary_count = p.binaries.size();

  // E >= E*
  p.add_row({{lay.efficiency_var, 1.0}}, RowSense::kGreaterEqual, req.desired_efficiency);

  auto input_slack_terms = [&](std::size_t i) {
    detail::Terms t{{lay.efficiency_var, x0[i]}};
    for (std::size_t k = 0; k < K1; ++k) t.push_back({lay.intensity[k], -panel.inputs()(k, i)});
    return t;
  };
  auto output_slack_terms = [&](std::size_t o) {
    detail::Terms t{{lay.plan[o], -1.0}};
    for (std::size_t k = 0; k < K1; ++k) t.push_back({lay.intensity[k], panel.outputs()(k, o)});
    return t;
  };
  for (std::size_t i = 0; i < I; ++i) p.add_row(input_slack_terms(i), RowSense::kGreaterEqual, 0.0);
  for (std::size_t o = 0; o < O; ++o) p.add_row(output_slack_terms(o), RowSense::kGreaterEqual, 0.0);
  {
    detail::Terms t;
    for (std::size_t i = 0; i < I; ++i) t.push_back({lay.gamma_in[i], x0[i]});
    p.add_row(t, RowSense::kEqual, 1.0);
  }
  auto dual_slack_terms = [&](std::size_t k) {
    detail::Terms t;
    for (std::size_t i = 0; i < I; ++i) t.push_back({lay.gamma_in[i], panel.inputs()(k, i)});
    for (std::size_t o = 0; o < O; ++o) t.push_back({lay.gamma_out[o], -panel.outputs()(k, o)});
    if (vrs) t.push_back({lay.kappa, -1.0});
    return t;
  };
  for (std::size_t k = 0; k < K1; ++k) p.add_row(dual_slack_terms(k), RowSense::kGreaterEqual, 0.0);

  for (std::size_t i = 0; i < I; ++i) {
    const double m_mult = std::min(bm.m_input, gin_hi[i]);
    const double m_slack = std::isfinite(e_hi) ? std::min(bm.m_input, e_hi * x0[i]) : bm.m_input;
    const int r1 = p.add_row({{lay.gamma_in[i], 1.0}, {lay.u[i], -m_mult}}, RowSense::kLessEqual, 0.0);
    detail::Terms t = input_slack_terms(i);
    t.push_back({lay.u[i], m_slack});
    const int r2 = p.add_row(t, RowSense::kLessEqual, m_slack);
    lay.big_m_rows.push_back({BigMKind::kInputMultiplier, i, r1, bm.m_input, m_mult});
    lay.big_m_rows.push_back({BigMKind::kInputSlack, i, r2, bm.m_input, m_slack});
  }
  for (std::size_t o = 0; o < O; ++o) {
    const double m_mult = bm.m_output;
    double cap = 0.0;
    for (std::size_t k = 0; k < K1; ++k) cap += lam_hi[k] * panel.outputs()(k, o);
    const double m_slack = req.tighten_big_m && std::isfinite(cap) ? std::min(bm.m_output, cap)
                                                                    : bm.m_output;
    const int r1 = p.add_row({{lay.gamma_out[o], 1.0}, {lay.v[o], -m_mult}}, RowSense::kLessEqual, 0.0);
    detail::Terms t = output_slack_terms(o);
    t.push_back({lay.v[o], m_slack});
    const int r2 = p.add_row(t, RowSense::kLessEqual, m_slack);
    lay.big_m_rows.push_back({BigMKind::kOutputMultiplier, o, r1, bm.m_output, m_mult});
    lay.big_m_rows.push_back({BigMKind::kOutputSlack, o, r2, bm.m_output, m_slack});
  }
  for (std::size_t k = 0; k < K1; ++k) {
    const double m_int = std::min(bm.m_frontier, lam_hi[k]);
    const double m_dual = bm.m_frontier;
    const int r1 = p.add_row({{lay.intensity[k], 1.0}, {lay.w[k], -m_int}}, RowSense::kLessEqual, 0.0);
    detail::Terms t = dual_slack_terms(k);
    t.push_back({lay.w[k], m_dual});
    const int r2 = p.add_row(t, RowSense::kLessEqual, m_dual);
    lay.big_m_rows.push_back({BigMKind::kIntensity, k, r1, bm.m_frontier, m_int});
    lay.big_m_rows.push_back({BigMKind::kDualSlack, k, r2, bm.m_frontier, m_dual});
  }
  detail::add_change_rows(p, lay, bm, y0);
  if (vrs) {
    detail::Terms t;
    for (int l : lay.intensity) t.push_back({l, 1.0});
    lay.convexity_row = p.add_row(t, RowSense::kEqual, 1.0);
  }
  lay.core_row_count = p.lp.num_rows();
  detail::add_lock_rows(p, lay, box, y0);
  return prog;
}

/// Dispatches on orientation and technology.
inline CounterfactualProgram build_program(const Panel& panel, const CounterfactualRequest& req) {
  if (req.orient == Orientation::kOutput) return build_ceodea(panel, req);
  return req.tech == Technology::kCrs ? build_cedea(panel, req) : build_cevdea(panel, req);
}

/// Reads solved values out of an MIQP solution vector and recomputes the row
/// quantities used by the audit.
inline CounterfactualVariables extract_variables(const Panel& panel, std::size_t firm,
                                                 const CounterfactualLayout& lay,
                                                 const std::vector<double>& x) {
  CounterfactualVariables v;
  auto take = [&](const std::vector<int>& cols) {
    std::vector<double> out;
    for (int c : cols) out.push_back(x[c]);
    return out;
  };
  auto take_bin = [&](const std::vector<int>& cols) {
    std::vector<int> out;
    for (int c : cols) out.push_back(static_cast<int>(std::lround(x[c])));
    return out;
  };
  v.plan = take(lay.plan);
  v.efficiency_var = x[lay.efficiency_var];
  v.intensity = take(lay.intensity);
  v.gamma_in = take(lay.gamma_in);
  v.gamma_out = take(lay.gamma_out);
  v.eta = take(lay.eta);
  if (lay.kappa >= 0) v.kappa = x[lay.kappa];
  v.xi = take_bin(lay.xi);
  v.u = take_bin(lay.u);
  v.v = take_bin(lay.v);
  v.w = take_bin(lay.w);

  const std::size_t I = panel.num_inputs();
  const std::size_t O = panel.num_outputs();
  const std::size_t K1 = panel.size();
  const auto x0 = panel.input(firm);
  const auto y0 = panel.output(firm);
  const bool input = lay.orient == Orientation::kInput;
  for (std::size_t i = 0; i < I; ++i) {
    double s = input ? v.plan[i] : v.efficiency_var * x0[i];
    for (std::size_t k = 0; k < K1; ++k) s -= v.intensity[k] * panel.inputs()(k, i);
    v.input_slack.push_back(s);
  }
  for (std::size_t o = 0; o < O; ++o) {
    double s = input ? -v.efficiency_var * y0[o] : -v.plan[o];
    for (std::size_t k = 0; k < K1; ++k) s += v.intensity[k] * panel.outputs()(k, o);
    v.output_slack.push_back(s);
  }
  for (std::size_t k = 0; k < K1; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < I; ++i) s += v.gamma_in[i] * panel.inputs()(k, i);
    for (std::size_t o = 0; o < O; ++o) s -= v.gamma_out[o] * panel.outputs()(k, o);
    if (v.kappa) s -= *v.kappa;
    v.dual_slack.push_back(s);
  }
  const auto original = input ? x0 : y0;
  for (std::size_t i = 0; i < original.size(); ++i) v.deviation.push_back(original[i] - v.plan[i]);
  return v;
}

struct CostReport {
  std::size_t l0 = 0;
  double l1 = 0.0;
  double l2_squared = 0.0;
  double objective = 0.0;  // weighted cost without the uniqueness nudge
};

/// Cost of moving from `original` to `plan` (model units).
inline CostReport cost_of_change(std::span<const double> original, std::span<const double> plan,
                                 const CostWeights& w) {
  CostReport c;
  double wl1 = 0.0;
  double wl2 = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = std::abs(original[i] - plan[i]);
    if (d > kChangeThreshold) ++c.l0;
    c.l1 += d;
    c.l2_squared += d * d;
    wl1 += w.feature_weight(i) * d;
    wl2 += w.feature_weight(i) * d * d;
  }
  c.objective = w.nu0 * static_cast<double>(c.l0) + w.nu1 * wl1 + w.nu2 * wl2;
  return c;
}

struct VerificationReport {
  AuditReport audit;
  double rescored_efficiency = 0.0;
  double internal_efficiency = 0.0;  // 1/F (input) or E (output)
  double consistency_delta = 0.0;
  bool feasible = false;
  bool consistent = false;
  bool m_zero_covers_box = true;
  bool verified = false;
};

struct SolverStats {
  MiqpStatus status = MiqpStatus::kOptimal;
  long nodes = 0;
  double objective = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
  std::size_t continuous_vars = 0;
  std::size_t binary_vars = 0;
  std::size_t rows = 0;
};

struct CounterfactualResult {
  std::size_t firm = 0;
  std::string firm_id;
  Orientation orient = Orientation::kInput;
  Technology tech = Technology::kCrs;
  std::string method;  // "miqp", "grid", "identity", "farrell"
  std::string label;
  double desired_efficiency = 0.0;
  double original_efficiency = 0.0;
  std::vector<double> original_plan;  // panel units
  std::vector<double> plan;           // panel units
  std::vector<bool> changed;
  double achieved_efficiency = 0.0;
  CostReport cost;                    // model units
  bool cost_in_normalized_units = false;
  std::vector<std::size_t> peers;     // units with w = 1
  std::vector<double> intensities;    // lambda of the counterfactual plan
  std::vector<int> input_slack_indicators;
  std::vector<int> output_slack_indicators;
  SolverStats solver;
  VerificationReport verification;
  CounterfactualVariables variables;  // model units
  bool partial = false;
};

namespace detail {

struct ModelSpace {
  Panel panel;
  NormalizationRecord record;
  CounterfactualRequest req;  // bounds converted to model units
};

inline ModelSpace to_model_space(const Panel& panel, const CounterfactualRequest& req) {
  if (!req.normalize)
    return {panel, NormalizationRecord::identity(panel), req};
  NormalizedPanel np = normalize_max(panel, req.orient);
  ModelSpace ms{std::move(np.panel), std::move(np.record), req};
  const auto& scale =
      req.orient == Orientation::kInput ? ms.record.input_scale : ms.record.output_scale;
  for (std::size_t i = 0; i < ms.req.lower_bounds.size(); ++i) ms.req.lower_bounds[i] /= scale[i];
  for (std::size_t i = 0; i < ms.req.upper_bounds.size(); ++i) ms.req.upper_bounds[i] /= scale[i];
  return ms;
}

inline std::vector<double> to_panel_units(const ModelSpace& ms, std::span<const double> v) {
  return ms.req.orient == Orientation::kInput ? ms.record.invert_inputs(v)
                                              : ms.record.invert_outputs(v);
}

inline EfficiencyResult rescore(const Panel& panel, std::size_t firm, Orientation orient,
                                Technology tech, std::span<const double> plan) {
  if (orient == Orientation::kInput)
    return efficiency_of_plan(panel, plan, panel.output(firm), tech, Orientation::kInput);
  return efficiency_of_plan(panel, panel.input(firm), plan, tech, Orientation::kInput);
}

inline CounterfactualResult identity_result(const ModelSpace& ms, const Panel& panel,
                                            const CounterfactualRequest& req, double current) {
  CounterfactualResult r;
  r.firm = req.firm;
  r.firm_id = panel.id(req.firm);
  r.orient = req.orient;
  r.tech = req.tech;
  r.method = "identity";
  r.label = req.label;
  r.desired_efficiency = req.desired_efficiency;
  r.original_efficiency = current;
  const auto orig = req.orient == Orientation::kInput ? panel.input(req.firm) : panel.output(req.firm);
  r.original_plan.assign(orig.begin(), orig.end());
  r.plan = r.original_plan;
  r.changed.assign(r.plan.size(), false);
  r.achieved_efficiency = current;
  r.cost_in_normalized_units = req.normalize;
  const EfficiencyResult e = rescore(panel, req.firm, req.orient, req.tech, r.plan);
  for (std::size_t k = 0; k < e.lambdas.size(); ++k) r.intensities.push_back(e.lambdas[k]);
  r.peers = e.peers;
  r.verification.rescored_efficiency = e.score;
  r.verification.internal_efficiency = e.score;
  r.verification.feasible = e.score >= req.desired_efficiency - 1e-6;
  r.verification.consistent = true;
  r.verification.verified = r.verification.feasible;
  r.variables.plan.assign(ms.panel.input(req.firm).begin(), ms.panel.input(req.firm).end());
  if (req.orient == Orientation::kOutput)
    r.variables.plan.assign(ms.panel.output(req.firm).begin(), ms.panel.output(req.firm).end());
  r.variables.deviation.assign(r.plan.size(), 0.0);
  return r;
}

}  // namespace detail

/// Builds and solves the counterfactual program for `req`, maps the plan
/// back to panel units, re-scores it and audits the big-M rows.
inline CounterfactualResult explain(const Panel& panel, const CounterfactualRequest& req) {
  detail::check_common(panel, req);
  const detail::ModelSpace ms = detail::to_model_space(panel, req);
  const double current = efficiency(panel, req.firm, req.tech, Orientation::kInput).score;
  detail::check_target(panel, req, current);
  if (req.desired_efficiency <= current + 1e-9) {
    const auto orig =
        req.orient == Orientation::kInput ? panel.input(req.firm) : panel.output(req.firm);
    const detail::FeatureBox box = detail::feature_box(req, orig);
    for (std::size_t i = 0; i < orig.size(); ++i)
      if (orig[i] < box.lo[i] - 1e-12 || orig[i] > box.hi[i] + 1e-12)
        fail(ErrorCode::kInfeasible, "the current plan violates the requested feature bounds");
    return detail::identity_result(ms, panel, req, current);
  }

  CounterfactualProgram prog = build_program(ms.panel, ms.req);
  detail::apply_nudge(prog, ms.req);
  const MiqpSolution sol = solve_miqp(prog.problem, req.solver);
  if (sol.status == MiqpStatus::kInfeasible) {
    std::ostringstream msg;
    msg << "no plan in the feasible space reaches the desired efficiency (each feature may move "
        << "by at most m_zero = " << req.big_m.m_zero
        << (req.normalize ? " in normalized units)" : " in panel units)");
    fail(ErrorCode::kInfeasible, msg.str());
  }
  if (!sol.has_incumbent())
    fail(ErrorCode::kTimeLimit, "solver stopped (" + std::string(to_string(sol.status)) +
                                    ") before finding a counterfactual");

  CounterfactualResult r;
  r.firm = req.firm;
  r.firm_id = panel.id(req.firm);
  r.orient = req.orient;
  r.tech = req.tech;
  r.method = "miqp";
  r.label = req.label;
  r.desired_efficiency = req.desired_efficiency;
  r.original_efficiency = current;
  r.partial = sol.status != MiqpStatus::kOptimal;
  r.cost_in_normalized_units = req.normalize;

  r.variables = extract_variables(ms.panel, req.firm, prog.layout, sol.values);
  const CounterfactualVariables& v = r.variables;
  const auto orig_panel =
      req.orient == Orientation::kInput ? panel.input(req.firm) : panel.output(req.firm);
  r.original_plan.assign(orig_panel.begin(), orig_panel.end());
  r.plan = detail::to_panel_units(ms, v.plan);
  for (std::size_t i = 0; i < r.plan.size(); ++i) {
    // Snap unchanged coordinates exactly and keep plans nonnegative.
    if (std::abs(v.deviation[i]) <= kChangeThreshold) r.plan[i] = r.original_plan[i];
    r.plan[i] = std::max(0.0, r.plan[i]);
    r.changed.push_back(std::abs(v.deviation[i]) > kChangeThreshold);
  }
  r.cost = cost_of_change(prog.original_plan, v.plan, ms.req.weights);
  for (std::size_t k = 0; k < v.w.size(); ++k)
    if (v.w[k] == 1) r.peers.push_back(k);
  const double scale = req.orient == Orientation::kInput ? v.efficiency_var : 1.0;
  for (double b : v.intensity) r.intensities.push_back(scale > 0.0 ? std::max(0.0, b) / scale : 0.0);
  r.input_slack_indicators = v.u;
  r.output_slack_indicators = v.v;

  r.solver.status = sol.status;
  r.solver.nodes = sol.nodes;
  r.solver.objective = sol.objective;
  r.solver.bound = sol.bound;
  r.solver.gap = sol.gap;
  r.solver.seconds = sol.wall_seconds;
  r.solver.continuous_vars = prog.layout.continuous_count;
  r.solver.binary_vars = prog.layout.binary_count;
  r.solver.rows = prog.problem.lp.num_rows();

  VerificationReport& ver = r.verification;
  const EfficiencyResult e = detail::rescore(panel, req.firm, req.orient, req.tech, r.plan);
  ver.rescored_efficiency = e.ok() ? e.score : 0.0;
  ver.internal_efficiency = req.orient == Orientation::kInput
                                ? (v.efficiency_var > 0.0 ? 1.0 / v.efficiency_var : kInf)
                                : v.efficiency_var;
  ver.consistency_delta = std::abs(ver.internal_efficiency - ver.rescored_efficiency);
  ver.feasible = e.ok() && e.score >= req.desired_efficiency - 1e-6;
  ver.consistent = ver.consistency_delta <= 1e-6;
  ver.audit = audit_big_m(v, req.big_m);
  double widest = 0.0;
  for (std::size_t i = 0; i < prog.original_plan.size(); ++i) {
    const double lo = ms.req.lower_bounds.empty() ? 0.0 : std::max(0.0, ms.req.lower_bounds[i]);
    if (req.orient == Orientation::kInput) widest = std::max(widest, prog.original_plan[i] - lo);
  }
  ver.m_zero_covers_box = widest <= req.big_m.m_zero + 1e-12;
  ver.verified = ver.audit.pass && ver.feasible && ver.consistent && !r.partial;
  r.achieved_efficiency = ver.rescored_efficiency;
  return r;
}

struct OracleOptions {
  int coarse_points = 161;
  int refine_points = 21;
  int refine_rounds = 3;
  double final_step = 1e-4;
  int candidates = 3;   // coarse cells always refined
  int max_seeds = 256;  // cap on refined cells from the cost band
};

/// Grid-search reference solution for at most two changeable features. Each
/// candidate plan is scored with efficiency_of_plan; no MIQP is involved.
inline CounterfactualResult oracle_explain(const Panel& panel, const CounterfactualRequest& req,
                                           const OracleOptions& opts = {}) {
  detail::check_common(panel, req);
  const detail::ModelSpace ms = detail::to_model_space(panel, req);
  const Panel& mp = ms.panel;
  const bool input = req.orient == Orientation::kInput;
  const auto orig = input ? mp.input(req.firm) : mp.output(req.firm);
  const std::size_t d = orig.size();
  require(d <= 2, "grid oracle supports at most two changeable features");
  const double current = efficiency(panel, req.firm, req.tech, Orientation::kInput).score;
  detail::check_target(panel, req, current);
  const detail::FeatureBox box = detail::feature_box(ms.req, orig);

  // Admissible interval per feature, matching the MIQP's l0 row |dev| <= Mz.
  std::vector<double> lo(d);
  std::vector<double> hi(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (box.locked[i]) {
      lo[i] = hi[i] = orig[i];
      continue;
    }
    if (input) {
      lo[i] = std::max({box.lo[i], orig[i] - req.big_m.m_zero, 0.0});
      hi[i] = std::min(box.hi[i], orig[i]);
    } else {
      lo[i] = std::max(box.lo[i], orig[i]);
      hi[i] = std::min(box.hi[i], orig[i] + req.big_m.m_zero);
    }
    if (lo[i] > hi[i]) fail(ErrorCode::kInfeasible, "feature bounds exclude every plan");
  }

  const double target = req.desired_efficiency;
  auto feasible = [&](const std::vector<double>& plan) {
    const EfficiencyResult e = detail::rescore(mp, req.firm, req.orient, req.tech, plan);
    return e.ok() && e.score >= target - 1e-9;
  };
  auto cost = [&](const std::vector<double>& plan) {
    return cost_of_change(orig, plan, ms.req.weights).objective;
  };
  auto axis = [&](std::size_t i, double a, double b, int n) {
    std::vector<double> pts;
    if (a == b || n < 2) {
      pts.push_back(a);
    } else {
      for (int s = 0; s < n; ++s) pts.push_back(a + (b - a) * s / (n - 1));
    }
    if (orig[i] >= a && orig[i] <= b) pts.push_back(orig[i]);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  };

  struct Candidate {
    double cost;
    std::vector<double> plan;
  };
  auto search = [&](const std::vector<std::vector<double>>& axes, std::vector<Candidate>& out) {
    std::vector<double> plan(d);
    std::vector<std::size_t> idx(d, 0);
    for (;;) {
      for (std::size_t i = 0; i < d; ++i) plan[i] = axes[i][idx[i]];
      const double c = cost(plan);
      if (feasible(plan)) out.push_back({c, plan});
      std::size_t i = 0;
      for (; i < d; ++i) {
        if (++idx[i] < axes[i].size()) break;
        idx[i] = 0;
      }
      if (i == d) break;
    }
  };

  std::vector<std::vector<double>> axes(d);
  std::vector<double> step(d);
  for (std::size_t i = 0; i < d; ++i) {
    axes[i] = axis(i, lo[i], hi[i], opts.coarse_points);
    step[i] = (hi[i] - lo[i]) / std::max(1, opts.coarse_points - 1);
  }
  std::vector<Candidate> coarse;
  search(axes, coarse);
  if (coarse.empty())
    fail(ErrorCode::kInfeasible, "no plan in the feasible space reaches the desired efficiency");
  std::stable_sort(coarse.begin(), coarse.end(),
                   [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });

  // The feasible set is monotone (inputs may be rounded down, outputs up), so
  // some coarse point with the optimum's support costs at most sum L_i*step_i
  // more than the optimum. Every coarse point in that band seeds a refinement,
  // thinned so that refinement windows do not overlap.
  const CostWeights& cw = ms.req.weights;
  double band = 1e-12;
  for (std::size_t i = 0; i < d; ++i)
    band += cw.feature_weight(i) * (cw.nu1 + 2.0 * cw.nu2 * (hi[i] - lo[i])) * step[i];
  std::vector<const Candidate*> seeds;
  for (const Candidate& c : coarse) {
    if (seeds.size() >= static_cast<std::size_t>(opts.candidates) &&
        c.cost > coarse.front().cost + band)
      break;
    if (seeds.size() >= static_cast<std::size_t>(opts.max_seeds)) break;
    const bool covered = std::any_of(seeds.begin(), seeds.end(), [&](const Candidate* s) {
      for (std::size_t i = 0; i < d; ++i)
        if (std::abs(s->plan[i] - c.plan[i]) > 2.0 * step[i] + 1e-15) return false;
      return true;
    });
    if (!covered || seeds.size() < static_cast<std::size_t>(opts.candidates)) seeds.push_back(&c);
  }

  Candidate best = coarse.front();
  for (const Candidate* seed : seeds) {
    Candidate local = *seed;
    std::vector<double> st = step;
    int rounds = opts.refine_rounds;
    for (int round = 0; round < rounds; ++round) {
      std::vector<std::vector<double>> fine(d);
      for (std::size_t i = 0; i < d; ++i) {
        const double a = std::max(lo[i], local.plan[i] - 2.0 * st[i]);
        const double b = std::min(hi[i], local.plan[i] + 2.0 * st[i]);
        fine[i] = axis(i, a, b, opts.refine_points);
        st[i] = (b - a) / std::max(1, opts.refine_points - 1);
      }
      std::vector<Candidate> found;
      search(fine, found);
      for (const Candidate& f : found)
        if (f.cost < local.cost) local = f;
      const double widest = *std::max_element(st.begin(), st.end());
      if (round == rounds - 1 && widest > opts.final_step && rounds < 12) ++rounds;
    }
    if (local.cost < best.cost) best = local;
  }

  CounterfactualResult r;
  r.firm = req.firm;
  r.firm_id = panel.id(req.firm);
  r.orient = req.orient;
  r.tech = req.tech;
  r.method = "grid";
  r.label = req.label;
  r.desired_efficiency = target;
  r.original_efficiency = current;
  const auto orig_panel = input ? panel.input(req.firm) : panel.output(req.firm);
  r.original_plan.assign(orig_panel.begin(), orig_panel.end());
  r.plan = detail::to_panel_units(ms, best.plan);
  for (std::size_t i = 0; i < d; ++i) {
    const bool ch = std::abs(orig[i] - best.plan[i]) > kChangeThreshold;
    if (!ch) r.plan[i] = r.original_plan[i];
    r.changed.push_back(ch);
  }
  r.cost = cost_of_change(orig, best.plan, ms.req.weights);
  r.cost_in_normalized_units = req.normalize;
  const EfficiencyResult e = detail::rescore(panel, req.firm, req.orient, req.tech, r.plan);
  r.achieved_efficiency = e.ok() ? e.score : 0.0;
  r.peers = e.peers;
  r.intensities = e.lambdas;
  r.verification.rescored_efficiency = r.achieved_efficiency;
  r.verification.internal_efficiency = r.achieved_efficiency;
  r.verification.feasible = r.achieved_efficiency >= target - 1e-6;
  r.verification.consistent = true;
  r.verification.verified = r.verification.feasible;
  r.variables.plan = best.plan;
  for (std::size_t i = 0; i < d; ++i) r.variables.deviation.push_back(orig[i] - best.plan[i]);
  return r;
}

/// Radial (Farrell) target expressed as a counterfactual result so it can be
/// compared with the cost-based plans. Input orientation only; weights only
/// price the change.
inline CounterfactualResult farrell_counterfactual(const Panel& panel,
                                                   const CounterfactualRequest& req) {
  detail::check_common(panel, req);
  require(req.orient == Orientation::kInput, "Farrell targets are input oriented");
  const detail::ModelSpace ms = detail::to_model_space(panel, req);
  const double current = efficiency(panel, req.firm, req.tech, Orientation::kInput).score;
  detail::check_target(panel, req, current);
  CounterfactualResult r;
  r.firm = req.firm;
  r.firm_id = panel.id(req.firm);
  r.orient = req.orient;
  r.tech = req.tech;
  r.method = "farrell";
  r.label = req.label.empty() ? "farrell" : req.label;
  r.desired_efficiency = req.desired_efficiency;
  r.original_efficiency = current;
  const auto x0 = panel.input(req.firm);
  r.original_plan.assign(x0.begin(), x0.end());
  r.plan = current >= req.desired_efficiency
               ? r.original_plan
               : farrell_projection(panel, req.firm, req.desired_efficiency, req.tech);
  const std::vector<double> model_plan = ms.record.apply_inputs(r.plan);
  const auto model_orig = ms.panel.input(req.firm);
  for (std::size_t i = 0; i < r.plan.size(); ++i)
    r.changed.push_back(std::abs(model_orig[i] - model_plan[i]) > kChangeThreshold);
  r.cost = cost_of_change(model_orig, model_plan, ms.req.weights);
  r.cost_in_normalized_units = req.normalize;
  const EfficiencyResult e = detail::rescore(panel, req.firm, req.orient, req.tech, r.plan);
  r.achieved_efficiency = e.ok() ? e.score : 0.0;
  r.peers = e.peers;
  r.intensities = e.lambdas;
  VerificationReport& ver = r.verification;
  ver.rescored_efficiency = r.achieved_efficiency;
  ver.internal_efficiency = r.achieved_efficiency;
  ver.feasible = r.achieved_efficiency >= req.desired_efficiency - 1e-6;
  ver.consistent = true;
  ver.verified = ver.feasible;
  r.variables.plan = model_plan;
  for (std::size_t i = 0; i < model_plan.size(); ++i)
    r.variables.deviation.push_back(model_orig[i] - model_plan[i]);
  return r;
}

}  // namespace cfdea
