// HTTP/JSON front end. Service::handle is a plain router over (method, path,
// query, body) so it can be exercised without sockets; bind() attaches it to
// an httplib server.
//
// Panels live in memory only and are lost on restart.
#pragma once

#include <atomic>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "cfdea/analytics.hpp"
#include "cfdea/core.hpp"
#include "cfdea/counterfactual.hpp"
#include "cfdea/dea.hpp"
#include "cfdea/serialize.hpp"

namespace cfdea {

inline constexpr int kDefaultPort = 8080;
inline constexpr std::size_t kMaxUploadBytes = 10u * 1024u * 1024u;

/// Port from CFDEA_PORT, falling back to 8080.
inline int port_from_env() {
  const char* v = std::getenv("CFDEA_PORT");
  if (!v || !*v) return kDefaultPort;
  char* end = nullptr;
  const long p = std::strtol(v, &end, 10);
  if (*end != '\0' || p <= 0 || p > 65535) return kDefaultPort;
  return static_cast<int>(p);
}

struct ServiceConfig {
  BigMConfig big_m;
  CostWeights weights;
  MiqpOptions solver;
  std::size_t max_upload_bytes = kMaxUploadBytes;
  unsigned batch_threads = 0;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using Query = std::map<std::string, std::string>;

namespace detail {

using Json = json::Json;

inline Response json_response(int status, const Json& j) { return {status, json::dump(j)}; }

inline Response error_response(int status, std::string_view code, std::string_view msg) {
  return json_response(status, json::error(code, msg));
}

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kInvalidArgument: return 422;
    case ErrorCode::kInfeasible: return 422;
    case ErrorCode::kTimeLimit: return 503;
    case ErrorCode::kInternal: return 500;
  }
  return 500;
}

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

inline std::size_t resolve_firm(const Panel& p, const Json& v) {
  std::string id;
  if (v.is_string()) id = v.get<std::string>();
  else if (v.is_number_integer()) id = std::to_string(v.get<long long>());
  else fail(ErrorCode::kInvalidArgument, "firm must be an id string or integer");
  const auto k = p.index_of(id);
  if (!k) fail(ErrorCode::kNotFound, "unknown firm '" + id + "'");
  return *k;
}

inline std::size_t resolve_feature(const std::vector<std::string>& names, const Json& v) {
  if (v.is_number_integer()) {
    const long long i = v.get<long long>();
    require(i >= 0 && static_cast<std::size_t>(i) < names.size(), "feature index out of range");
    return static_cast<std::size_t>(i);
  }
  require(v.is_string(), "features are referenced by name or index");
  const std::string n = v.get<std::string>();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == n) return i;
  fail(ErrorCode::kInvalidArgument, "unknown feature '" + n + "'");
}

inline double get_number(const Json& j, const char* key, double fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  require(j[key].is_number(), std::string(key) + " must be a number");
  return j[key].get<double>();
}

inline CostWeights parse_weights(const Json& j, const CostWeights& fallback) {
  if (j.is_string()) return CostWeights::preset(j.get<std::string>());
  require(j.is_object(), "weights must be an object or a preset name");
  CostWeights w = j.contains("preset") ? CostWeights::preset(j["preset"].get<std::string>()) : fallback;
  w.nu0 = get_number(j, "nu0", w.nu0);
  w.nu1 = get_number(j, "nu1", w.nu1);
  w.nu2 = get_number(j, "nu2", w.nu2);
  if (j.contains("feature_weights")) w.per_feature = j["feature_weights"].get<std::vector<double>>();
  return w;
}

inline BigMConfig parse_big_m(const Json& j, BigMConfig m) {
  require(j.is_object(), "big_m must be an object");
  m.m_input = get_number(j, "m_input", m.m_input);
  m.m_output = get_number(j, "m_output", m.m_output);
  m.m_frontier = get_number(j, "m_frontier", m.m_frontier);
  m.m_zero = get_number(j, "m_zero", m.m_zero);
  return m;
}

inline std::vector<double> parse_bound_list(const Json& j, const std::vector<std::string>& names,
                                            double fill) {
  std::vector<double> out(names.size(), fill);
  if (j.is_array()) {
    require(j.size() == names.size(), "bound list length mismatch");
    for (std::size_t i = 0; i < names.size(); ++i)
      out[i] = j[i].is_null() ? fill : j[i].get<double>();
    return out;
  }
  require(j.is_object(), "bounds must be an array or an object keyed by feature");
  for (auto it = j.begin(); it != j.end(); ++it)
    out[resolve_feature(names, Json(it.key()))] = it.value().get<double>();
  return out;
}

inline std::string query_or(const Query& q, const std::string& key, const std::string& fallback) {
  const auto it = q.find(key);
  return it == q.end() ? fallback : it->second;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kInvalidArgument, "invalid " + what + " '" + s + "'");
}

}  // namespace detail

/// Converts a counterfactual request body into a request for `panel`.
/// Fields: firm, desired_efficiency, weights (object or preset), technology,
/// orientation, locks, bounds {lower, upper}, normalize, big_m,
/// time_limit_seconds, method ("miqp" or "farrell").
inline CounterfactualRequest parse_counterfactual_request(const Panel& panel, const json::Json& body,
                                                          const ServiceConfig& cfg,
                                                          bool* farrell = nullptr) {
  require(body.is_object(), "request body must be a JSON object");
  require(body.contains("firm"), "missing field 'firm'");
  require(body.contains("desired_efficiency"), "missing field 'desired_efficiency'");
  CounterfactualRequest req;
  req.firm = detail::resolve_firm(panel, body["firm"]);
  req.desired_efficiency = detail::get_number(body, "desired_efficiency", 1.0);
  req.weights = body.contains("weights") ? detail::parse_weights(body["weights"], cfg.weights)
                                         : cfg.weights;
  if (body.contains("preset")) {
    req.label = body["preset"].get<std::string>();
    if (!body.contains("weights")) req.weights = CostWeights::preset(req.label);
  }
  if (body.contains("weights") && body["weights"].is_string())
    req.label = body["weights"].get<std::string>();
  if (body.contains("technology")) req.tech = parse_technology(body["technology"].get<std::string>());
  if (body.contains("orientation"))
    req.orient = parse_orientation(body["orientation"].get<std::string>());
  const auto& names =
      req.orient == Orientation::kInput ? panel.input_names() : panel.output_names();
  if (body.contains("locks"))
    for (const auto& l : body["locks"]) req.locked.push_back(detail::resolve_feature(names, l));
  if (body.contains("bounds")) {
    const auto& b = body["bounds"];
    if (b.contains("lower")) req.lower_bounds = detail::parse_bound_list(b["lower"], names, 0.0);
    if (b.contains("upper")) req.upper_bounds = detail::parse_bound_list(b["upper"], names, kInf);
  }
  req.normalize = body.value("normalize", true);
  req.big_m = body.contains("big_m") ? detail::parse_big_m(body["big_m"], cfg.big_m) : cfg.big_m;
  req.solver = cfg.solver;
  req.solver.time_limit_seconds =
      detail::get_number(body, "time_limit_seconds", cfg.solver.time_limit_seconds);
  const std::string method = body.value("method", std::string("miqp"));
  require(method == "miqp" || method == "farrell", "method must be 'miqp' or 'farrell'");
  if (farrell) *farrell = method == "farrell";
  return req;
}

inline BatchConfig parse_batch_config(const json::Json& body, const ServiceConfig& cfg) {
  require(body.is_object(), "request body must be a JSON object");
  BatchConfig c;
  c.desired_efficiency = detail::get_number(body, "desired_efficiency", 1.0);
  c.weights = cfg.weights;
  c.label = "custom";
  if (body.contains("weights")) {
    c.weights = detail::parse_weights(body["weights"], cfg.weights);
    if (body["weights"].is_string()) c.label = body["weights"].get<std::string>();
  }
  if (body.contains("preset")) {
    c.label = body["preset"].get<std::string>();
    if (c.label == "farrell") c.method = BatchMethod::kFarrell;
    else c.weights = CostWeights::preset(c.label);
  }
  if (body.value("method", std::string("counterfactual")) == "farrell") c.method = BatchMethod::kFarrell;
  if (body.contains("technology")) c.tech = parse_technology(body["technology"].get<std::string>());
  if (body.contains("orientation")) c.orient = parse_orientation(body["orientation"].get<std::string>());
  c.normalize = body.value("normalize", true);
  c.big_m = body.contains("big_m") ? detail::parse_big_m(body["big_m"], cfg.big_m) : cfg.big_m;
  c.solver = cfg.solver;
  c.solver.time_limit_seconds =
      detail::get_number(body, "time_limit_seconds", cfg.solver.time_limit_seconds);
  c.threads = cfg.batch_threads;
  return c;
}

class Service {
 public:
  explicit Service(ServiceConfig cfg = {}) : cfg_(std::move(cfg)) {}

  ~Service() {
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(jobs_mu_);
      workers.swap(workers_);
    }
    for (auto& t : workers)
      if (t.joinable()) t.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Registers (or replaces) a panel; replacing drops its caches.
  std::string add_panel(Panel panel, std::vector<std::string> removed = {},
                        std::string id = {}) {
    std::unique_lock lock(panels_mu_);
    if (id.empty()) id = "p" + std::to_string(++panel_counter_);
    auto entry = std::make_shared<PanelEntry>();
    entry->panel = std::move(panel);
    entry->removed = std::move(removed);
    panels_[id] = std::move(entry);
    return id;
  }

  Response handle(std::string_view method, std::string_view path, const Query& query,
                  const std::string& body) {
    try {
      return route(method, path, query, body);
    } catch (const Error& e) {
      json::Json j = json::error(to_string(e.code()), e.what());
      if (e.code() == ErrorCode::kTimeLimit) j["partial"] = false;
      return detail::json_response(detail::http_status(e.code()), j);
    } catch (const nlohmann::json::exception& e) {
      return detail::error_response(422, "invalid_argument", e.what());
    } catch (const std::exception& e) {
      return detail::error_response(500, "internal", e.what());
    }
  }

  /// Routes every request on `server` through handle().
  void bind(httplib::Server& server) {
    server.set_payload_max_length(cfg_.max_upload_bytes);
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      Query q;
      for (const auto& [k, v] : req.params) q[k] = v;
      const Response r = handle(req.method, req.path, q, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get(R"(/.*)", forward);
    server.Post(R"(/.*)", forward);
    server.Put(R"(/.*)", forward);
    server.Delete(R"(/.*)", forward);
  }

  const ServiceConfig& config() const { return cfg_; }

 private:
  struct PanelEntry {
    Panel panel;
    std::vector<std::string> removed;
    std::mutex mu;  // guards the caches below
    std::map<std::pair<int, int>, std::vector<EfficiencyResult>> scores;
    std::optional<BatchReport> last_batch;
  };

  struct Job {
    std::atomic<int> state{0};  // 0 running, 1 done
    int status = 0;
    std::string body;
  };

  std::shared_ptr<PanelEntry> find_panel(const std::string& id) const {
    std::shared_lock lock(panels_mu_);
    const auto it = panels_.find(id);
    if (it == panels_.end()) fail(ErrorCode::kNotFound, "unknown panel '" + id + "'");
    return it->second;
  }

  std::vector<EfficiencyResult> scores(PanelEntry& e, Technology t, Orientation o) {
    {
      std::lock_guard lock(e.mu);
      const auto it = e.scores.find({static_cast<int>(t), static_cast<int>(o)});
      if (it != e.scores.end()) return it->second;
    }
    std::vector<EfficiencyResult> res;
    for (std::size_t k = 0; k < e.panel.size(); ++k) res.push_back(efficiency(e.panel, k, t, o));
    std::lock_guard lock(e.mu);
    e.scores[{static_cast<int>(t), static_cast<int>(o)}] = res;
    return res;
  }

  static json::Json parse_body(const std::string& body) {
    if (body.empty()) return json::Json::object();
    try {
      return json::Json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kInvalidArgument, std::string("malformed JSON: ") + e.what());
    }
  }

  Response route(std::string_view method, std::string_view path, const Query& query,
                 const std::string& body) {
    const auto parts = detail::split_path(path);
    auto not_allowed = [] { return detail::error_response(405, "method_not_allowed", "method not allowed"); };
    if (parts.empty()) return detail::json_response(200, json::Json{{"service", "cfdea"}});

    if (parts[0] == "jobs" && parts.size() == 2) {
      if (method != "GET") return not_allowed();
      return job_status(parts[1]);
    }
    if (parts[0] != "panels") return detail::error_response(404, "not_found", "unknown route");

    if (parts.size() == 1) {
      if (method == "POST") return upload(query, body);
      if (method == "GET") return list_panels();
      return not_allowed();
    }
    const std::shared_ptr<PanelEntry> entry = find_panel(parts[1]);
    const Panel& panel = entry->panel;
    if (parts.size() == 2) {
      if (method == "GET") return detail::json_response(200, json::panel_summary(parts[1], panel, entry->removed));
      if (method == "DELETE") {
        std::unique_lock lock(panels_mu_);
        panels_.erase(parts[1]);
        return detail::json_response(200, json::Json{{"deleted", parts[1]}});
      }
      return not_allowed();
    }
    const std::string& what = parts[2];
    if (what == "efficiency" && parts.size() == 3) {
      if (method != "GET") return not_allowed();
      const Technology t = parse_technology(detail::query_or(query, "tech", "crs"));
      const Orientation o = parse_orientation(detail::query_or(query, "orient", "input"));
      return detail::json_response(200, json::efficiency(panel, scores(*entry, t, o), t, o));
    }
    if (what == "counterfactual" && parts.size() == 3) {
      if (method != "POST") return not_allowed();
      return counterfactual(panel, parse_body(body));
    }
    if (what == "batch" && parts.size() == 3) {
      if (method != "POST") return not_allowed();
      const BatchConfig cfg = parse_batch_config(parse_body(body), cfg_);
      if (detail::query_or(query, "async", "0") == "1") return start_batch_job(entry, cfg);
      return run_batch(*entry, cfg);
    }
    if (what == "heatmap" && parts.size() == 3) {
      if (method != "GET") return not_allowed();
      if (query.count("estar") || query.count("preset")) {
        json::Json b{{"desired_efficiency",
                      detail::parse_double(detail::query_or(query, "estar", "1"), "estar")}};
        if (query.count("preset")) b["preset"] = query.at("preset");
        const BatchConfig cfg = parse_batch_config(b, cfg_);
        const Response r = run_batch(*entry, cfg);
        if (r.status != 200) return r;
      }
      std::lock_guard lock(entry->mu);
      if (!entry->last_batch)
        return detail::error_response(404, "not_found", "no batch has been run on this panel");
      return detail::json_response(200, json::heatmap(heatmap_matrix(*entry->last_batch)));
    }
    if (what == "spider" && parts.size() == 4) {
      if (method != "GET") return not_allowed();
      return spider(panel, parts[3], query);
    }
    return detail::error_response(404, "not_found", "unknown route");
  }

  Response upload(const Query& query, const std::string& body) {
    if (body.size() > cfg_.max_upload_bytes)
      return detail::error_response(413, "payload_too_large", "CSV upload exceeds 10 MB");
    PanelBuild pb = parse_panel_csv(body);
    const std::string id = add_panel(pb.panel, pb.removed, detail::query_or(query, "id", ""));
    const auto entry = find_panel(id);
    return detail::json_response(201, json::panel_summary(id, entry->panel, entry->removed));
  }

  Response list_panels() const {
    json::Json arr = json::Json::array();
    std::shared_lock lock(panels_mu_);
    for (const auto& [id, e] : panels_)
      arr.push_back(json::Json{{"panel_id", id}, {"firms", e->panel.size()}});
    return detail::json_response(200, json::Json{{"panels", arr}});
  }

  Response counterfactual(const Panel& panel, const json::Json& body) {
    bool farrell = false;
    const CounterfactualRequest req = parse_counterfactual_request(panel, body, cfg_, &farrell);
    const CounterfactualResult r = farrell ? farrell_counterfactual(panel, req) : explain(panel, req);
    return detail::json_response(r.partial ? 503 : 200, json::counterfactual(panel, r));
  }

  Response run_batch(PanelEntry& entry, const BatchConfig& cfg) {
    BatchReport rep = batch_explain(entry.panel, cfg);
    json::Json j = json::batch(entry.panel, rep);
    {
      std::lock_guard lock(entry.mu);
      entry.last_batch = std::move(rep);
    }
    return detail::json_response(200, j);
  }

  Response start_batch_job(std::shared_ptr<PanelEntry> entry, const BatchConfig& cfg) {
    auto job = std::make_shared<Job>();
    std::string id;
    {
      std::lock_guard lock(jobs_mu_);
      id = "j" + std::to_string(++job_counter_);
      jobs_[id] = job;
      workers_.emplace_back([this, job, entry, cfg] {
        Response r = handle_job(*entry, cfg);
        job->status = r.status;
        job->body = std::move(r.body);
        job->state.store(1);
      });
    }
    return detail::json_response(202, json::Json{{"job_id", id}, {"status_url", "/jobs/" + id}});
  }

  Response handle_job(PanelEntry& entry, const BatchConfig& cfg) {
    try {
      return run_batch(entry, cfg);
    } catch (const Error& e) {
      return detail::error_response(detail::http_status(e.code()), to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      return detail::error_response(500, "internal", e.what());
    }
  }

  Response job_status(const std::string& id) {
    std::shared_ptr<Job> job;
    {
      std::lock_guard lock(jobs_mu_);
      const auto it = jobs_.find(id);
      if (it == jobs_.end()) return detail::error_response(404, "not_found", "unknown job '" + id + "'");
      job = it->second;
    }
    if (job->state.load() == 0)
      return detail::json_response(200, json::Json{{"job_id", id}, {"status", "running"}});
    json::Json j{{"job_id", id}, {"status", job->status == 200 ? "done" : "failed"},
                 {"http_status", job->status}, {"result", json::Json::parse(job->body)}};
    return detail::json_response(200, j);
  }

  Response spider(const Panel& panel, const std::string& firm_id, const Query& query) {
    const auto k = panel.index_of(firm_id);
    if (!k) fail(ErrorCode::kNotFound, "unknown firm '" + firm_id + "'");
    const double estar = detail::parse_double(detail::query_or(query, "estar", "1"), "estar");
    const bool normalize = detail::query_or(query, "normalize", "1") != "0";
    std::string presets = detail::query_or(query, "presets", "farrell,l0+(l2),l2");
    std::vector<CounterfactualResult> results;
    std::stringstream ss(presets);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (name.empty()) continue;
      CounterfactualRequest req;
      req.firm = *k;
      req.desired_efficiency = estar;
      req.normalize = normalize;
      req.big_m = cfg_.big_m;
      req.solver = cfg_.solver;
      req.label = name;
      if (name == "farrell") {
        results.push_back(farrell_counterfactual(panel, req));
      } else {
        req.weights = CostWeights::preset(name);
        results.push_back(explain(panel, req));
      }
    }
    return detail::json_response(200, json::spider(spider_payload(panel, *k, results)));
  }

  ServiceConfig cfg_;
  mutable std::shared_mutex panels_mu_;
  std::map<std::string, std::shared_ptr<PanelEntry>> panels_;
  long panel_counter_ = 0;
  std::mutex jobs_mu_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::thread> workers_;
  long job_counter_ = 0;
};

}  // namespace cfdea
