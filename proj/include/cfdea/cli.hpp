// Command-line front end: eff, cf, batch, synth, serve.
// Exit codes: 0 success, 1 solver failure, 2 usage or invalid input.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfdea/analytics.hpp"
#include "cfdea/core.hpp"
#include "cfdea/counterfactual.hpp"
#include "cfdea/serialize.hpp"
#include "cfdea/service.hpp"

namespace cfdea::cli {

namespace detail {

inline PanelBuild load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kInvalidArgument, "cannot open panel file '" + path + "'");
  return read_panel_csv(in);
}

inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kInvalidArgument, "cannot write '" + path + "'");
  f << content;
}

inline std::size_t feature_index(const std::vector<std::string>& names, const std::string& ref) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == ref) return i;
  try {
    std::size_t used = 0;
    const unsigned long i = std::stoul(ref, &used);
    if (used == ref.size() && i < names.size()) return i;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kInvalidArgument, "unknown feature '" + ref + "'");
}

// name=value pairs into a dense vector filled with `fill`.
inline std::vector<double> bound_vector(const std::vector<std::string>& specs,
                                        const std::vector<std::string>& names, double fill) {
  std::vector<double> out(names.size(), fill);
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kInvalidArgument, "bound '" + s + "' is not name=value");
    out[feature_index(names, s.substr(0, eq))] =
        cfdea::detail::parse_double(s.substr(eq + 1), "bound value");
  }
  return out;
}

struct WeightFlags {
  std::string preset = "l2";
  std::optional<double> nu0;
  std::optional<double> nu1;
  std::optional<double> nu2;
  std::vector<double> feature_weights;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Cost preset: l2, l1, l0+l2, l0+(l2)")->capture_default_str();
    app->add_option("--nu0", nu0, "Weight of the l0 term");
    app->add_option("--nu1", nu1, "Weight of the l1 term");
    app->add_option("--nu2", nu2, "Weight of the squared l2 term");
    app->add_option("--feature-weights", feature_weights, "Per-feature weights")->delimiter(',');
  }

  CostWeights build() const {
    CostWeights w = preset == "farrell" ? CostWeights::l2() : CostWeights::preset(preset);
    if (nu0) w.nu0 = *nu0;
    if (nu1) w.nu1 = *nu1;
    if (nu2) w.nu2 = *nu2;
    w.per_feature = feature_weights;
    return w;
  }
};

struct ModelFlags {
  std::string tech = "crs";
  std::string orient = "input";
  bool no_normalize = false;
  BigMConfig big_m;
  double time_limit = 600.0;

  void add(CLI::App* app, bool with_solver) {
    app->add_option("--tech", tech, "crs or vrs")->capture_default_str();
    app->add_option("--orient", orient, "input or output")->capture_default_str();
    if (!with_solver) return;
    app->add_flag("--no-normalize", no_normalize, "Solve on raw data instead of max-normalized data");
    app->add_option("--m-input", big_m.m_input, "Big-M of the input complementarity rows");
    app->add_option("--m-output", big_m.m_output, "Big-M of the output complementarity rows");
    app->add_option("--m-frontier", big_m.m_frontier, "Big-M of the frontier complementarity rows");
    app->add_option("--m-zero", big_m.m_zero, "Largest change per feature (l0 rows)");
    app->add_option("--time-limit", time_limit, "Solver time limit in seconds")->capture_default_str();
  }
};

inline int exit_code(ErrorCode c) {
  return c == ErrorCode::kInvalidArgument || c == ErrorCode::kNotFound ? 2 : 1;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"DEA efficiency scores and least-cost counterfactual plans", "cfdea"};
  app.require_subcommand(1);

  std::string panel_path;
  std::string out_path;

  auto* eff = app.add_subcommand("eff", "Score every firm");
  detail::ModelFlags eff_model;
  eff->add_option("--panel", panel_path, "Panel CSV")->required();
  eff->add_option("--out", out_path, "Output file (.csv or .json); stdout if omitted");
  eff_model.add(eff, false);

  auto* cf = app.add_subcommand("cf", "Counterfactual plan for one firm");
  std::string firm;
  double estar = 1.0;
  bool farrell = false;
  std::vector<std::string> locks;
  std::vector<std::string> lower;
  std::vector<std::string> upper;
  detail::WeightFlags cf_weights;
  detail::ModelFlags cf_model;
  cf->add_option("--panel", panel_path, "Panel CSV")->required();
  cf->add_option("--firm", firm, "Firm id")->required();
  cf->add_option("--estar", estar, "Desired efficiency E* in (score, 1]")->required();
  cf->add_option("--out", out_path, "Output JSON file; stdout if omitted");
  cf->add_option("--lock", locks, "Feature that must not change (name or index)");
  cf->add_option("--lower", lower, "Lower bound name=value");
  cf->add_option("--upper", upper, "Upper bound name=value");
  cf->add_flag("--farrell", farrell, "Radial Farrell target instead of the cost-based plan");
  cf_weights.add(cf);
  cf_model.add(cf, true);

  auto* batch = app.add_subcommand("batch", "Counterfactuals for every firm below E*");
  double batch_estar = 1.0;
  unsigned threads = 0;
  detail::WeightFlags batch_weights;
  detail::ModelFlags batch_model;
  batch->add_option("--panel", panel_path, "Panel CSV")->required();
  batch->add_option("--estar", batch_estar, "Desired efficiency E*")->capture_default_str();
  batch->add_option("--out", out_path, "Output directory")->required();
  batch->add_option("--threads", threads, "Worker threads (0: all cores)");
  batch_weights.add(batch);
  batch_model.add(batch, true);

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic panel");
  std::uint64_t seed = 1;
  std::size_t firms = 40;
  std::size_t inputs = 5;
  std::size_t outputs = 3;
  double spread = 1.0;
  std::string summary_path;
  synth->add_option("--seed", seed)->capture_default_str();
  synth->add_option("--firms", firms)->capture_default_str();
  synth->add_option("--inputs", inputs)->capture_default_str();
  synth->add_option("--outputs", outputs)->capture_default_str();
  synth->add_option("--spread", spread, "Input inflation spread")->capture_default_str();
  synth->add_option("--out", out_path, "Output CSV; stdout if omitted");
  synth->add_option("--summary", summary_path, "Write per-column summary statistics CSV");

  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  int port = port_from_env();
  std::string host = "0.0.0.0";
  std::string panel_id = "default";
  serve->add_option("--port", port, "Port (default from CFDEA_PORT or 8080)");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--panel", panel_path, "Panel CSV to preload");
  serve->add_option("--panel-id", panel_id, "Id of the preloaded panel")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*eff) {
      const PanelBuild pb = detail::load_panel(panel_path);
      const Technology t = parse_technology(eff_model.tech);
      const Orientation o = parse_orientation(eff_model.orient);
      std::vector<EfficiencyResult> res;
      for (std::size_t k = 0; k < pb.panel.size(); ++k) res.push_back(efficiency(pb.panel, k, t, o));
      const bool as_json = out_path.size() > 5 && out_path.substr(out_path.size() - 5) == ".json";
      if (as_json) {
        detail::emit(out_path, json::dump(json::efficiency(pb.panel, res, t, o)), out);
      } else {
        std::ostringstream os;
        os.precision(10);
        os << "id,score" << (o == Orientation::kOutput ? ",output_factor" : "") << ",peers\n";
        for (std::size_t k = 0; k < res.size(); ++k) {
          os << pb.panel.id(k) << ',' << res[k].score;
          if (o == Orientation::kOutput) os << ',' << res[k].output_factor;
          os << ',';
          for (std::size_t q = 0; q < res[k].peers.size(); ++q)
            os << (q ? ";" : "") << pb.panel.id(res[k].peers[q]);
          os << '\n';
        }
        detail::emit(out_path, os.str(), out);
      }
      for (const auto& r : pb.removed) err << "removed firm " << r << " (zero input)\n";
      return 0;
    }

    if (*cf) {
      const PanelBuild pb = detail::load_panel(panel_path);
      const Panel& p = pb.panel;
      const auto k = p.index_of(firm);
      if (!k) fail(ErrorCode::kNotFound, "unknown firm '" + firm + "'");
      CounterfactualRequest req;
      req.firm = *k;
      req.desired_efficiency = estar;
      req.tech = parse_technology(cf_model.tech);
      req.orient = parse_orientation(cf_model.orient);
      req.normalize = !cf_model.no_normalize;
      req.big_m = cf_model.big_m;
      req.solver.time_limit_seconds = cf_model.time_limit;
      req.weights = cf_weights.build();
      req.label = farrell ? "farrell" : cf_weights.preset;
      const auto& names = req.orient == Orientation::kInput ? p.input_names() : p.output_names();
      for (const auto& l : locks) req.locked.push_back(detail::feature_index(names, l));
      if (!lower.empty()) req.lower_bounds = detail::bound_vector(lower, names, 0.0);
      if (!upper.empty()) req.upper_bounds = detail::bound_vector(upper, names, kInf);
      const CounterfactualResult r = farrell ? farrell_counterfactual(p, req) : explain(p, req);
      detail::emit(out_path, json::dump(json::counterfactual(p, r)), out);
      return r.partial ? 1 : 0;
    }

    if (*batch) {
      const PanelBuild pb = detail::load_panel(panel_path);
      BatchConfig c;
      c.desired_efficiency = batch_estar;
      c.label = batch_weights.preset;
      c.method = batch_weights.preset == "farrell" ? BatchMethod::kFarrell : BatchMethod::kCounterfactual;
      c.weights = batch_weights.build();
      c.tech = parse_technology(batch_model.tech);
      c.orient = parse_orientation(batch_model.orient);
      c.normalize = !batch_model.no_normalize;
      c.big_m = batch_model.big_m;
      c.solver.time_limit_seconds = batch_model.time_limit;
      c.threads = threads;
      const BatchReport rep = batch_explain(pb.panel, c);
      std::filesystem::create_directories(out_path);
      const std::filesystem::path dir(out_path);
      detail::emit((dir / "report.json").string(), json::dump(json::batch(pb.panel, rep)), out);
      std::ostringstream firms_csv;
      write_batch_csv(firms_csv, rep);
      detail::emit((dir / "firms.csv").string(), firms_csv.str(), out);
      std::ostringstream heat;
      write_heatmap_csv(heat, heatmap_matrix(rep));
      detail::emit((dir / "heatmap.csv").string(), heat.str(), out);
      if (rep.analyzed() > 0) {
        std::ostringstream stats;
        write_change_stats_csv(stats, change_stats(rep));
        detail::emit((dir / "change_stats.csv").string(), stats.str(), out);
      }
      out << "analyzed " << rep.analyzed() << " of " << rep.entries.size() << " firms, "
          << rep.failures.size() << " failures, all verified: "
          << (rep.all_verified() ? "yes" : "no") << "\n";
      return rep.failures.empty() ? 0 : 1;
    }

    if (*synth) {
      const Panel p = synth_panel(seed, firms, inputs, outputs, spread);
      std::ostringstream os;
      write_panel_csv(os, p);
      detail::emit(out_path, os.str(), out);
      if (!summary_path.empty()) {
        std::ostringstream ss;
        write_summary_csv(ss, summarize(p));
        detail::emit(summary_path, ss.str(), out);
      }
      return 0;
    }

    if (*serve) {
      Service svc;
      if (!panel_path.empty()) {
        PanelBuild pb = detail::load_panel(panel_path);
        svc.add_panel(std::move(pb.panel), std::move(pb.removed), panel_id);
      }
      httplib::Server server;
      svc.bind(server);
      err << "listening on " << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        err << "cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return detail::exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cfdea::cli
