// JSON views shared by the CLI and the HTTP service, so both emit the same
// bytes for the same request. Wall-clock timings are left out for that reason.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfdea/analytics.hpp"
#include "cfdea/core.hpp"
#include "cfdea/counterfactual.hpp"
#include "cfdea/dea.hpp"

namespace cfdea::json {

using Json = nlohmann::ordered_json;

inline Json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline Json numbers(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json error(std::string_view code, std::string_view message) {
  return Json{{"code", code}, {"message", message}};
}

inline Json weights(const CostWeights& w) {
  Json j{{"nu0", w.nu0}, {"nu1", w.nu1}, {"nu2", w.nu2}};
  if (!w.per_feature.empty()) j["feature_weights"] = numbers(w.per_feature);
  return j;
}

inline Json big_m(const BigMConfig& m) {
  return Json{{"m_input", m.m_input}, {"m_output", m.m_output},
              {"m_frontier", m.m_frontier}, {"m_zero", m.m_zero}};
}

inline Json panel_summary(const std::string& panel_id, const Panel& p,
                          const std::vector<std::string>& removed) {
  Json j;
  j["panel_id"] = panel_id;
  j["firms"] = p.size();
  j["inputs"] = p.input_names();
  j["outputs"] = p.output_names();
  j["ids"] = p.ids();
  j["cleaning"] = Json{{"removed_zero_input", removed}};
  return j;
}

inline Json efficiency(const Panel& p, const std::vector<EfficiencyResult>& res, Technology tech,
                       Orientation orient) {
  Json j;
  j["technology"] = to_string(tech);
  j["orientation"] = to_string(orient);
  Json firms = Json::array();
  for (std::size_t k = 0; k < res.size(); ++k) {
    Json f;
    f["id"] = p.id(k);
    f["score"] = number(res[k].score);
    if (orient == Orientation::kOutput) f["output_factor"] = number(res[k].output_factor);
    Json peers = Json::array();
    for (std::size_t q : res[k].peers) peers.push_back(p.id(q));
    f["peers"] = peers;
    Json lam = Json::object();
    for (std::size_t q : res[k].peers) lam[p.id(q)] = number(res[k].lambdas[q]);
    f["lambdas"] = lam;
    firms.push_back(f);
  }
  j["firms"] = firms;
  Json scores = Json::array();
  for (const auto& r : res) scores.push_back(number(r.score));
  j["scores"] = scores;
  return j;
}

inline Json audit(const AuditReport& a) {
  Json rows = Json::array();
  for (const AuditRow& r : a.rows) {
    if (r.status != AuditStatus::kWarn) continue;
    rows.push_back(Json{{"kind", to_string(r.kind)}, {"index", r.index},
                        {"value", number(r.value)}, {"bound", number(r.bound)}});
  }
  return Json{{"pass", a.pass}, {"rows_checked", a.rows.size()}, {"warnings", rows}};
}

inline Json counterfactual(const Panel& p, const CounterfactualResult& r) {
  Json j;
  j["firm"] = r.firm_id;
  j["method"] = r.method;
  if (!r.label.empty()) j["label"] = r.label;
  j["technology"] = to_string(r.tech);
  j["orientation"] = to_string(r.orient);
  j["desired_efficiency"] = number(r.desired_efficiency);
  j["original_efficiency"] = number(r.original_efficiency);
  j["achieved_efficiency"] = number(r.achieved_efficiency);
  j["features"] = r.orient == Orientation::kInput ? p.input_names() : p.output_names();
  j["original"] = numbers(r.original_plan);
  j["counterfactual"] = numbers(r.plan);
  Json changed = Json::array();
  for (bool c : r.changed) changed.push_back(c);
  j["changed"] = changed;
  j["cost"] = Json{{"l0", r.cost.l0},
                   {"l1", number(r.cost.l1)},
                   {"l2_squared", number(r.cost.l2_squared)},
                   {"objective", number(r.cost.objective)},
                   {"normalized_units", r.cost_in_normalized_units}};
  Json peers = Json::array();
  for (std::size_t q : r.peers) peers.push_back(p.id(q));
  j["peers"] = peers;
  Json lam = Json::object();
  for (std::size_t q = 0; q < r.intensities.size(); ++q)
    if (r.intensities[q] > 1e-9) lam[p.id(q)] = number(r.intensities[q]);
  j["lambdas"] = lam;
  if (r.method == "miqp") {
    j["slack_indicators"] =
        Json{{"inputs", r.input_slack_indicators}, {"outputs", r.output_slack_indicators}};
    j["solver"] = Json{{"status", to_string(r.solver.status)},
                       {"nodes", r.solver.nodes},
                       {"objective", number(r.solver.objective)},
                       {"bound", number(r.solver.bound)},
                       {"gap", number(r.solver.gap)},
                       {"continuous_vars", r.solver.continuous_vars},
                       {"binary_vars", r.solver.binary_vars},
                       {"rows", r.solver.rows}};
  }
  const VerificationReport& v = r.verification;
  j["verification"] = Json{{"verified", v.verified},
                           {"feasible", v.feasible},
                           {"consistent", v.consistent},
                           {"rescored_efficiency", number(v.rescored_efficiency)},
                           {"internal_efficiency", number(v.internal_efficiency)},
                           {"consistency_delta", number(v.consistency_delta)},
                           {"m_zero_covers_box", v.m_zero_covers_box},
                           {"audit", audit(v.audit)}};
  j["partial"] = r.partial;
  return j;
}

inline Json change_stats(const ChangeStats& st) {
  Json freq = Json::object();
  Json mag = Json::object();
  for (std::size_t i = 0; i < st.feature_names.size(); ++i) {
    if (i < st.frequency.size()) freq[st.feature_names[i]] = number(st.frequency[i]);
    if (i < st.mean_relative_change.size())
      mag[st.feature_names[i]] =
          st.mean_relative_change[i] ? number(*st.mean_relative_change[i]) : Json(nullptr);
  }
  return Json{{"analyzed", st.analyzed},
              {"frequency", freq},
              {"mean_l0", number(st.mean_l0)},
              {"mean_relative_change", mag},
              {"mean_l2_relative", number(st.mean_l2_relative)}};
}

inline Json heatmap(const Heatmap& h) {
  Json rows = Json::array();
  for (const auto& r : h.cells) {
    Json row = Json::array();
    for (bool b : r) row.push_back(b);
    rows.push_back(row);
  }
  return Json{{"firms", h.firm_ids}, {"features", h.feature_names}, {"cells", rows},
              {"true_count", h.true_count()}};
}

inline Json spider(const SpiderPayload& sp) {
  Json series = Json::array();
  for (const SpiderSeries& s : sp.series)
    series.push_back(Json{{"label", s.label}, {"ratios", numbers(s.ratios)}});
  return Json{{"firm", sp.firm_id}, {"features", sp.feature_names},
              {"original", numbers(sp.original)}, {"series", series}};
}

inline Json batch_config(const BatchConfig& c) {
  return Json{{"desired_efficiency", number(c.desired_efficiency)},
              {"label", c.label},
              {"method", c.method == BatchMethod::kFarrell ? "farrell" : "counterfactual"},
              {"weights", weights(c.weights)},
              {"technology", to_string(c.tech)},
              {"orientation", to_string(c.orient)},
              {"normalize", c.normalize},
              {"big_m", big_m(c.big_m)}};
}

/// Full report; statistics are included when at least one firm was analyzed.
inline Json batch(const Panel& p, const BatchReport& rep) {
  Json j;
  j["config"] = batch_config(rep.config);
  Json entries = Json::array();
  for (const BatchEntry& e : rep.entries) {
    Json f{{"id", e.id}, {"status", to_string(e.status)}, {"score", number(e.score)}};
    if (e.result) {
      f["verified"] = e.result->verification.verified;
      f["result"] = counterfactual(p, *e.result);
    }
    if (!e.error.empty()) f["error"] = e.error;
    entries.push_back(f);
  }
  j["firms"] = entries;
  Json failures = Json::array();
  for (const BatchFailure& f : rep.failures)
    failures.push_back(Json{{"id", f.id}, {"code", f.code}, {"message", f.message}});
  j["failures"] = failures;
  j["analyzed"] = rep.analyzed();
  j["all_verified"] = rep.all_verified();
  if (rep.analyzed() > 0) j["stats"] = change_stats(cfdea::change_stats(rep));
  j["heatmap"] = heatmap(heatmap_matrix(rep));
  return j;
}

}  // namespace cfdea::json
