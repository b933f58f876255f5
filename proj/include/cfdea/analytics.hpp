// Batch counterfactual runs and the aggregate views built on them: change
// frequency and magnitude tables, heatmap and spider payloads, plus a seeded
// synthetic panel generator.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfdea/core.hpp"
#include "cfdea/counterfactual.hpp"
#include "cfdea/dea.hpp"

namespace cfdea {

enum class BatchMethod { kCounterfactual, kFarrell };

struct BatchConfig {
  double desired_efficiency = 1.0;
  CostWeights weights;
  std::string label = "custom";  // preset name echoed in reports
  BatchMethod method = BatchMethod::kCounterfactual;
  Technology tech = Technology::kCrs;
  Orientation orient = Orientation::kInput;
  BigMConfig big_m;
  bool normalize = true;
  MiqpOptions solver;
  unsigned threads = 0;  // 0: hardware concurrency
};

enum class EntryStatus { kAnalyzed, kSkipped, kFailed };

inline std::string_view to_string(EntryStatus s) {
  switch (s) {
    case EntryStatus::kAnalyzed: return "analyzed";
    case EntryStatus::kSkipped: return "skipped";
    case EntryStatus::kFailed: return "failed";
  }
  return "unknown";
}

struct BatchEntry {
  std::size_t firm = 0;
  std::string id;
  double score = 0.0;
  EntryStatus status = EntryStatus::kSkipped;
  std::optional<CounterfactualResult> result;
  std::string error;
};

struct BatchFailure {
  std::string id;
  std::string code;
  std::string message;
};

struct BatchReport {
  BatchConfig config;
  std::vector<std::string> feature_names;
  std::vector<BatchEntry> entries;  // every firm, ordered by id
  std::vector<BatchFailure> failures;
  double wall_seconds = 0.0;

  std::size_t analyzed() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) {
      return e.status == EntryStatus::kAnalyzed;
    }));
  }
  bool all_verified() const {
    return std::all_of(entries.begin(), entries.end(), [](const BatchEntry& e) {
      return e.status != EntryStatus::kAnalyzed || e.result->verification.verified;
    });
  }
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kTimeLimit: return "time_limit";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

/// Explains every firm whose score is below E*; the rest are skipped. One
/// solver instance per firm, spread over `config.threads` workers.
inline BatchReport batch_explain(const Panel& panel, const BatchConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  require(panel.size() > 0, "empty panel");
  require(config.method == BatchMethod::kCounterfactual || config.orient == Orientation::kInput,
          "Farrell batches are input oriented");
  BatchReport rep;
  rep.config = config;
  rep.feature_names =
      config.orient == Orientation::kInput ? panel.input_names() : panel.output_names();
  const std::vector<double> scores = efficiency_scores(panel, config.tech, Orientation::kInput);

  std::vector<std::size_t> order(panel.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return panel.id(a) < panel.id(b); });
  rep.entries.resize(order.size());
  std::vector<std::size_t> work;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    BatchEntry& e = rep.entries[pos];
    e.firm = order[pos];
    e.id = panel.id(e.firm);
    e.score = scores[e.firm];
    if (e.score < config.desired_efficiency) work.push_back(pos);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t w = next.fetch_add(1);
      if (w >= work.size()) return;
      BatchEntry& e = rep.entries[work[w]];
      CounterfactualRequest req;
      req.firm = e.firm;
      req.desired_efficiency = config.desired_efficiency;
      req.weights = config.weights;
      req.tech = config.tech;
      req.orient = config.orient;
      req.big_m = config.big_m;
      req.normalize = config.normalize;
      req.solver = config.solver;
      req.label = config.label;
      try {
        e.result = config.method == BatchMethod::kFarrell ? farrell_counterfactual(panel, req)
                                                          : explain(panel, req);
        e.status = EntryStatus::kAnalyzed;
      } catch (const Error& err) {
        e.status = EntryStatus::kFailed;
        e.error = std::string(to_string(err.code())) + ": " + err.what();
      } catch (const std::exception& err) {
        e.status = EntryStatus::kFailed;
        e.error = std::string("internal: ") + err.what();
      }
    }
  };
  unsigned threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(work.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const BatchEntry& e : rep.entries) {
    if (e.status != EntryStatus::kFailed) continue;
    const auto colon = e.error.find(": ");
    rep.failures.push_back({e.id, e.error.substr(0, colon), e.error.substr(colon + 2)});
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

struct ChangeStats {
  std::vector<std::string> feature_names;
  std::size_t analyzed = 0;
  // Frequency part.
  std::vector<double> frequency;
  double mean_l0 = 0.0;
  // Magnitude part: mean relative change among changers (absent if none) and
  // the mean l2 norm of the relative-change vector.
  std::vector<std::optional<double>> mean_relative_change;
  double mean_l2_relative = 0.0;
};

namespace detail {

inline std::vector<const CounterfactualResult*> analyzed_results(const BatchReport& rep) {
  std::vector<const CounterfactualResult*> out;
  for (const BatchEntry& e : rep.entries)
    if (e.status == EntryStatus::kAnalyzed && e.result) out.push_back(&*e.result);
  if (out.empty()) fail(ErrorCode::kInvalidArgument, "no analyzed firms in the report");
  return out;
}

// Input reductions and output increases are both reported as positive.
inline double relative_change(const CounterfactualResult& r, std::size_t i) {
  const double base = r.original_plan[i];
  if (base == 0.0) return 0.0;
  const double d = r.orient == Orientation::kInput ? base - r.plan[i] : r.plan[i] - base;
  return d / base;
}

}  // namespace detail

inline ChangeStats change_frequency(const BatchReport& rep) {
  const auto results = detail::analyzed_results(rep);
  ChangeStats st;
  st.feature_names = rep.feature_names;
  st.analyzed = results.size();
  st.frequency.assign(rep.feature_names.size(), 0.0);
  double l0 = 0.0;
  for (const CounterfactualResult* r : results) {
    for (std::size_t i = 0; i < r->changed.size(); ++i)
      if (r->changed[i]) {
        st.frequency[i] += 1.0;
        l0 += 1.0;
      }
  }
  for (double& f : st.frequency) f /= static_cast<double>(results.size());
  st.mean_l0 = l0 / static_cast<double>(results.size());
  return st;
}

inline ChangeStats change_magnitude(const BatchReport& rep) {
  const auto results = detail::analyzed_results(rep);
  ChangeStats st;
  st.feature_names = rep.feature_names;
  st.analyzed = results.size();
  const std::size_t d = rep.feature_names.size();
  std::vector<double> sum(d, 0.0);
  std::vector<std::size_t> count(d, 0);
  double l2 = 0.0;
  for (const CounterfactualResult* r : results) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double rel = detail::relative_change(*r, i);
      sq += rel * rel;
      if (r->changed[i]) {
        sum[i] += rel;
        ++count[i];
      }
    }
    l2 += std::sqrt(sq);
  }
  st.mean_relative_change.resize(d);
  for (std::size_t i = 0; i < d; ++i)
    if (count[i] > 0) st.mean_relative_change[i] = sum[i] / static_cast<double>(count[i]);
  st.mean_l2_relative = l2 / static_cast<double>(results.size());
  return st;
}

inline ChangeStats change_stats(const BatchReport& rep) {
  ChangeStats st = change_frequency(rep);
  const ChangeStats mag = change_magnitude(rep);
  st.mean_relative_change = mag.mean_relative_change;
  st.mean_l2_relative = mag.mean_l2_relative;
  return st;
}

struct Heatmap {
  std::vector<std::string> firm_ids;
  std::vector<std::string> feature_names;
  std::vector<std::vector<bool>> cells;  // firms x features

  std::size_t true_count() const {
    std::size_t n = 0;
    for (const auto& row : cells) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
    return n;
  }
};

/// One row per firm in report order; skipped and failed firms are all false.
inline Heatmap heatmap_matrix(const BatchReport& rep) {
  Heatmap h;
  h.feature_names = rep.feature_names;
  for (const BatchEntry& e : rep.entries) {
    h.firm_ids.push_back(e.id);
    std::vector<bool> row(rep.feature_names.size(), false);
    if (e.status == EntryStatus::kAnalyzed && e.result) row = e.result->changed;
    h.cells.push_back(std::move(row));
  }
  return h;
}

struct SpiderSeries {
  std::string label;
  std::vector<double> ratios;  // counterfactual / original per feature
};

struct SpiderPayload {
  std::string firm_id;
  std::vector<std::string> feature_names;
  std::vector<double> original;  // all ones
  std::vector<SpiderSeries> series;
};

inline SpiderPayload spider_payload(const Panel& panel, std::size_t k,
                                    const std::vector<CounterfactualResult>& results) {
  if (k >= panel.size()) fail(ErrorCode::kNotFound, "unit index out of range");
  SpiderPayload sp;
  sp.firm_id = panel.id(k);
  if (results.empty()) return sp;
  const Orientation orient = results.front().orient;
  sp.feature_names = orient == Orientation::kInput ? panel.input_names() : panel.output_names();
  sp.original.assign(sp.feature_names.size(), 1.0);
  const auto base = orient == Orientation::kInput ? panel.input(k) : panel.output(k);
  for (const CounterfactualResult& r : results) {
    require(r.firm == k && r.firm_id == sp.firm_id, "result belongs to a different firm");
    require(r.orient == orient, "results mix orientations");
    SpiderSeries s{r.label.empty() ? r.method : r.label, {}};
    for (std::size_t i = 0; i < base.size(); ++i)
      s.ratios.push_back(base[i] == 0.0 ? 1.0 : r.plan[i] / base[i]);
    sp.series.push_back(std::move(s));
  }
  return sp;
}

/// Seeded panel: efficient anchors on a Cobb-Douglas CRS frontier
/// prod x_i^a_i = sum y_o, plus copies of random anchors whose inputs are
/// inflated by independent factors in [1, 1 + spread].
inline Panel synth_panel(std::uint64_t seed, std::size_t k, std::size_t num_inputs,
                         std::size_t num_outputs, double spread) {
  require(k >= 2, "synthetic panel needs at least 2 firms");
  require(num_inputs >= 1 && num_outputs >= 1, "synthetic panel needs inputs and outputs");
  require(std::isfinite(spread) && spread >= 0.0, "inefficiency spread must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> expo(num_inputs);
  for (double& a : expo) a = 0.5 + unit(rng);
  const double total = std::accumulate(expo.begin(), expo.end(), 0.0);
  for (double& a : expo) a /= total;

  const std::size_t anchors = std::max<std::size_t>(2, (k + 3) / 4);
  Matrix in(k, num_inputs);
  Matrix out(k, num_outputs);
  std::vector<std::string> ids;
  const int width = std::max<int>(3, static_cast<int>(std::to_string(k).size()));
  for (std::size_t f = 0; f < k; ++f) {
    std::ostringstream id;
    id << 'F' << std::setw(width) << std::setfill('0') << (f + 1);
    ids.push_back(id.str());
    if (f < anchors) {
      double level = 1.0;
      for (std::size_t i = 0; i < num_inputs; ++i) {
        in(f, i) = 1.0 + 9.0 * unit(rng);
        level *= std::pow(in(f, i), expo[i]);
      }
      std::vector<double> mix(num_outputs);
      for (double& m : mix) m = 0.2 + unit(rng);
      const double msum = std::accumulate(mix.begin(), mix.end(), 0.0);
      for (std::size_t o = 0; o < num_outputs; ++o) out(f, o) = level * mix[o] / msum;
      continue;
    }
    const std::size_t src = static_cast<std::size_t>(unit(rng) * static_cast<double>(anchors)) % anchors;
    for (std::size_t i = 0; i < num_inputs; ++i) in(f, i) = in(src, i) * (1.0 + spread * unit(rng));
    for (std::size_t o = 0; o < num_outputs; ++o) out(f, o) = out(src, o);
  }
  std::vector<std::string> in_names;
  std::vector<std::string> out_names;
  for (std::size_t i = 0; i < num_inputs; ++i) in_names.push_back("x" + std::to_string(i + 1));
  for (std::size_t o = 0; o < num_outputs; ++o) out_names.push_back("y" + std::to_string(o + 1));
  return Panel(std::move(ids), std::move(in), std::move(out), std::move(in_names),
               std::move(out_names));
}

struct ColumnSummary {
  std::string name;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std_dev = 0.0;  // sample standard deviation
};

inline std::vector<ColumnSummary> summarize(const Panel& panel) {
  std::vector<ColumnSummary> out;
  auto column = [&](const std::string& name, const Matrix& m, std::size_t c) {
    ColumnSummary s{name, 0.0, kInf, -kInf, 0.0};
    const double n = static_cast<double>(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      s.mean += m(r, c);
      s.min = std::min(s.min, m(r, c));
      s.max = std::max(s.max, m(r, c));
    }
    s.mean /= n;
    for (std::size_t r = 0; r < m.rows(); ++r) s.std_dev += (m(r, c) - s.mean) * (m(r, c) - s.mean);
    s.std_dev = m.rows() > 1 ? std::sqrt(s.std_dev / (n - 1.0)) : 0.0;
    out.push_back(s);
  };
  for (std::size_t i = 0; i < panel.num_inputs(); ++i) column(panel.input_names()[i], panel.inputs(), i);
  for (std::size_t o = 0; o < panel.num_outputs(); ++o) column(panel.output_names()[o], panel.outputs(), o);
  return out;
}

namespace detail {

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace detail

inline void write_summary_csv(std::ostream& os, const std::vector<ColumnSummary>& rows) {
  os << "variable,mean,min,max,std\n";
  for (const ColumnSummary& s : rows)
    os << s.name << ',' << detail::fmt(s.mean) << ',' << detail::fmt(s.min) << ','
       << detail::fmt(s.max) << ',' << detail::fmt(s.std_dev) << '\n';
}

/// feature,frequency,mean_relative_change ; absent magnitudes are empty cells.
inline void write_change_stats_csv(std::ostream& os, const ChangeStats& st) {
  os << "feature,frequency,mean_relative_change\n";
  for (std::size_t i = 0; i < st.feature_names.size(); ++i) {
    os << st.feature_names[i] << ',';
    if (i < st.frequency.size()) os << detail::fmt(st.frequency[i]);
    os << ',';
    if (i < st.mean_relative_change.size() && st.mean_relative_change[i])
      os << detail::fmt(*st.mean_relative_change[i]);
    os << '\n';
  }
  os << "mean_l0," << detail::fmt(st.mean_l0) << ",\n";
  os << "mean_l2_relative,," << detail::fmt(st.mean_l2_relative) << '\n';
}

inline void write_heatmap_csv(std::ostream& os, const Heatmap& h) {
  os << "id";
  for (const auto& f : h.feature_names) os << ',' << f;
  os << '\n';
  for (std::size_t r = 0; r < h.firm_ids.size(); ++r) {
    os << h.firm_ids[r];
    for (bool b : h.cells[r]) os << ',' << (b ? 1 : 0);
    os << '\n';
  }
}

/// One row per firm: status, score, counterfactual plan, costs, verification.
inline void write_batch_csv(std::ostream& os, const BatchReport& rep) {
  os << "id,status,score,achieved";
  for (const auto& f : rep.feature_names) os << ",orig:" << f;
  for (const auto& f : rep.feature_names) os << ",cf:" << f;
  os << ",l0,l1,l2_squared,objective,verified,nodes,seconds,error\n";
  for (const BatchEntry& e : rep.entries) {
    os << e.id << ',' << to_string(e.status) << ',' << detail::fmt(e.score, 10) << ',';
    const CounterfactualResult* r = e.result ? &*e.result : nullptr;
    if (r) os << detail::fmt(r->achieved_efficiency, 10);
    for (std::size_t i = 0; i < rep.feature_names.size(); ++i)
      os << ',' << (r ? detail::fmt(r->original_plan[i], 10) : "");
    for (std::size_t i = 0; i < rep.feature_names.size(); ++i)
      os << ',' << (r ? detail::fmt(r->plan[i], 10) : "");
    if (r) {
      os << ',' << r->cost.l0 << ',' << detail::fmt(r->cost.l1, 10) << ','
         << detail::fmt(r->cost.l2_squared, 10) << ',' << detail::fmt(r->cost.objective, 10) << ','
         << (r->verification.verified ? "true" : "false") << ',' << r->solver.nodes << ','
         << detail::fmt(r->solver.seconds, 4) << ',';
    } else {
      os << ",,,,,,,,";
    }
    std::string err = e.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << err << '\n';
  }
}

}  // namespace cfdea
