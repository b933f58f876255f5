#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "cfdea/cli.hpp"
#include "cfdea/service.hpp"
#include "fixtures.hpp"

using namespace cfdea;
using Json = json::Json;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("cfdea_test_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name) << content;
    return path_ / name;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string synth_csv(std::uint64_t seed, std::size_t k, std::size_t ni, std::size_t no) {
  std::ostringstream os;
  write_panel_csv(os, synth_panel(seed, k, ni, no, 1.0));
  return os.str();
}

}  // namespace

TEST(Cli, EffScoresFourFirms) {
  TempDir dir;
  const auto csv = dir.file("p.csv", fixtures::kFourFirmsCsv);
  const CliRun r = run_cli({"eff", "--panel", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "id,score,peers");
  const double expect[] = {1.0, 1.0, 0.59, 0.50};
  for (double e : expect) {
    ASSERT_TRUE(std::getline(lines, line));
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    EXPECT_NEAR(std::stod(line.substr(c1 + 1, c2 - c1 - 1)), e, 0.005) << line;
  }
}

TEST(Cli, EffJsonAndVrs) {
  TempDir dir;
  const auto csv = dir.file("p.csv", fixtures::kFourFirmsCsv);
  const auto out = dir.path() / "eff.json";
  ASSERT_EQ(run_cli({"eff", "--panel", csv.string(), "--tech", "vrs", "--out", out.string()}).code, 0);
  const Json j = Json::parse(read_file(out));
  EXPECT_EQ(j["technology"], "vrs");
  EXPECT_EQ(j["scores"].size(), 4u);
}

TEST(Cli, CounterfactualFirmThree) {
  TempDir dir;
  const auto csv = dir.file("p.csv", fixtures::kFourFirmsCsv);
  const CliRun r = run_cli({"cf", "--panel", csv.string(), "--firm", "3", "--estar", "0.8", "--nu2",
                            "1", "--no-normalize"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j["counterfactual"][0].get<double>(), 1.53, 0.01);
  EXPECT_NEAR(j["counterfactual"][1].get<double>(), 0.80, 0.01);
  EXPECT_NEAR(j["cost"]["l2_squared"].get<double>(), 0.25, 0.01);
  EXPECT_TRUE(j["verification"]["verified"].get<bool>());
  EXPECT_FALSE(j["cost"]["normalized_units"].get<bool>());
}

TEST(Cli, CounterfactualOptions) {
  TempDir dir;
  const auto csv = dir.file("p.csv", fixtures::kFourFirmsCsv);
  CliRun r = run_cli({"cf", "--panel", csv.string(), "--firm", "3", "--estar", "0.8", "--preset",
                      "l0+(l2)", "--no-normalize"});
  ASSERT_EQ(r.code, 0) << r.err;
  Json j = Json::parse(r.out);
  EXPECT_EQ(j["cost"]["l0"], 1);
  EXPECT_EQ(j["label"], "l0+(l2)");
  r = run_cli({"cf", "--panel", csv.string(), "--firm", "3", "--estar", "0.8", "--farrell"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = Json::parse(r.out);
  EXPECT_NEAR(j["counterfactual"][0].get<double>(), 1.29, 0.01);
  r = run_cli({"cf", "--panel", csv.string(), "--firm", "3", "--estar", "0.8", "--lock", "x1",
               "--no-normalize"});
  ASSERT_EQ(r.code, 0) << r.err;
  j = Json::parse(r.out);
  EXPECT_EQ(j["counterfactual"][0].get<double>(), 1.75);
  EXPECT_NEAR(j["counterfactual"][1].get<double>(), 0.6875, 1e-6);
  r = run_cli({"cf", "--panel", csv.string(), "--firm", "3", "--estar", "0.8", "--orient", "output"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(Json::parse(r.out)["counterfactual"][0].get<double>(), 1.36, 1e-4);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const auto csv = dir.file("p.csv", fixtures::kFourFirmsCsv);
  CliRun r = run_cli({"cf", "--panel", csv.string(), "--firm", "4", "--estar", "0.4"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("target below current score"), std::string::npos);
  EXPECT_EQ(run_cli({"bogus"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"cf", "--panel", csv.string(), "--firm", "9", "--estar", "0.8"}).code, 2);
  EXPECT_EQ(run_cli({"eff", "--panel", (dir.path() / "missing.csv").string()}).code, 2);
  // Everything locked: solver reports infeasible.
  r = run_cli({"cf", "--panel", csv.string(), "--firm", "3", "--estar", "0.8", "--lock", "x1",
               "--lock", "x2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST(Cli, SynthAndBatch) {
  TempDir dir;
  const auto panel = dir.path() / "synth.csv";
  const auto summary = dir.path() / "summary.csv";
  ASSERT_EQ(run_cli({"synth", "--seed", "7", "--firms", "12", "--inputs", "3", "--outputs", "1",
                     "--out", panel.string(), "--summary", summary.string()})
                .code,
            0);
  EXPECT_EQ(parse_panel_csv(read_file(panel)).panel.size(), 12u);
  EXPECT_EQ(read_file(summary).substr(0, 26), "variable,mean,min,max,std\n");
  const auto out = dir.path() / "batch";
  const CliRun r = run_cli({"batch", "--panel", panel.string(), "--estar", "1", "--preset",
                            "l0+(l2)", "--out", out.string(), "--threads", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("all verified: yes"), std::string::npos);
  for (const char* f : {"report.json", "firms.csv", "heatmap.csv", "change_stats.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const Json j = Json::parse(read_file(out / "report.json"));
  EXPECT_TRUE(j["all_verified"].get<bool>());
  EXPECT_EQ(j["config"]["label"], "l0+(l2)");
}

class ServiceTest : public ::testing::Test {
 protected:
  Service svc;
  Response call(std::string_view method, std::string_view path, const std::string& body = "",
                const Query& q = {}) {
    return svc.handle(method, path, q, body);
  }
  std::string upload(const std::string& csv, const std::string& id = "") {
    Query q;
    if (!id.empty()) q["id"] = id;
    const Response r = call("POST", "/panels", csv, q);
    EXPECT_EQ(r.status, 201) << r.body;
    return Json::parse(r.body)["panel_id"].get<std::string>();
  }
};

TEST_F(ServiceTest, UploadAndInspect) {
  const Response r = call("POST", "/panels",
                          std::string(fixtures::kFourFirmsCsv) + "5,0,1.2,1\n");
  ASSERT_EQ(r.status, 201);
  const Json j = Json::parse(r.body);
  EXPECT_EQ(j["firms"], 4);
  EXPECT_EQ(j["cleaning"]["removed_zero_input"], Json::array({"5"}));
  const std::string id = j["panel_id"];
  EXPECT_EQ(call("GET", "/panels/" + id).status, 200);
  EXPECT_EQ(Json::parse(call("GET", "/panels").body)["panels"].size(), 1u);
  EXPECT_EQ(call("DELETE", "/panels/" + id).status, 200);
  EXPECT_EQ(call("GET", "/panels/" + id).status, 404);
}

TEST_F(ServiceTest, Efficiency) {
  const std::string id = upload(fixtures::kFourFirmsCsv);
  const Response r = call("GET", "/panels/" + id + "/efficiency");
  ASSERT_EQ(r.status, 200);
  const Json j = Json::parse(r.body);
  ASSERT_EQ(j["scores"].size(), 4u);
  EXPECT_NEAR(j["scores"][2].get<double>(), 0.59, 0.005);
  EXPECT_NEAR(j["scores"][3].get<double>(), 0.50, 0.005);
  const Response o = call("GET", "/panels/" + id + "/efficiency", "", {{"orient", "output"}});
  EXPECT_NEAR(Json::parse(o.body)["firms"][2]["output_factor"].get<double>(), 1.7, 1e-9);
  EXPECT_EQ(call("GET", "/panels/" + id + "/efficiency", "", {{"tech", "xyz"}}).status, 422);
}

TEST_F(ServiceTest, ReplacingAPanelDropsCaches) {
  upload(fixtures::kFourFirmsCsv, "t1");
  EXPECT_NEAR(Json::parse(call("GET", "/panels/t1/efficiency").body)["scores"][3].get<double>(), 0.5, 1e-9);
  upload("id,in:x1,in:x2,out:y\n1,0.5,1,1\n2,1.5,0.5,1\n3,1.75,1.25,1\n4,5,2.5,1\n", "t1");
  EXPECT_NEAR(Json::parse(call("GET", "/panels/t1/efficiency").body)["scores"][3].get<double>(), 0.25, 1e-9);
}

TEST_F(ServiceTest, CounterfactualMatchesCliBytes) {
  TempDir dir;
  const auto csv = dir.file("p.csv", fixtures::kFourFirmsCsv);
  const std::string id = upload(fixtures::kFourFirmsCsv);
  const CliRun cli = run_cli({"cf", "--panel", csv.string(), "--firm", "3", "--estar", "0.8",
                              "--preset", "l2", "--no-normalize"});
  ASSERT_EQ(cli.code, 0);
  const Response http = call("POST", "/panels/" + id + "/counterfactual",
                             R"({"firm":"3","desired_efficiency":0.8,"preset":"l2","normalize":false})");
  ASSERT_EQ(http.status, 200) << http.body;
  EXPECT_EQ(http.body, cli.out);

  const CliRun cli2 = run_cli({"cf", "--panel", csv.string(), "--firm", "4", "--estar", "0.9",
                               "--preset", "l0+(l2)", "--lock", "x1"});
  const Response http2 = call("POST", "/panels/" + id + "/counterfactual",
                              R"j({"firm":"4","desired_efficiency":0.9,"preset":"l0+(l2)","locks":["x1"]})j");
  EXPECT_EQ(http2.body, cli2.out);
}

TEST_F(ServiceTest, CounterfactualErrors) {
  const std::string id = upload(fixtures::kFourFirmsCsv);
  const std::string path = "/panels/" + id + "/counterfactual";
  Response r = call("POST", path, R"({"firm":"4","desired_efficiency":0.4})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(Json::parse(r.body)["code"], "invalid_argument");
  EXPECT_TRUE(Json::parse(r.body).contains("message"));
  EXPECT_EQ(call("POST", path, R"({"firm":"99","desired_efficiency":0.8})").status, 404);
  EXPECT_EQ(call("POST", "/panels/nope/counterfactual", R"({"firm":"1"})").status, 404);
  EXPECT_EQ(call("POST", path, R"({"firm":"3","desired_efficiency":0.8,"weights":{"nu0":-1}})").status, 422);
  EXPECT_EQ(call("POST", path, "{not json").status, 422);
  EXPECT_EQ(call("POST", path, R"({"firm":"3"})").status, 422);
  EXPECT_EQ(call("GET", path).status, 405);
  r = call("POST", path, R"({"firm":"3","desired_efficiency":0.8,"locks":["x1","x2"]})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(Json::parse(r.body)["code"], "infeasible");
}

TEST_F(ServiceTest, TimeLimitIs503) {
  const std::string id = upload(synth_csv(3, 30, 4, 2));
  const Panel p = parse_panel_csv(synth_csv(3, 30, 4, 2)).panel;
  const auto s = efficiency_scores(p, Technology::kCrs, Orientation::kInput);
  const std::size_t k = static_cast<std::size_t>(std::min_element(s.begin(), s.end()) - s.begin());
  Json body{{"firm", p.id(k)}, {"desired_efficiency", 1.0}, {"preset", "l0+(l2)"},
            {"time_limit_seconds", 1e-9}};
  const Response r = call("POST", "/panels/" + id + "/counterfactual", body.dump());
  EXPECT_EQ(r.status, 503);
  const Json j = Json::parse(r.body);
  ASSERT_TRUE(j.contains("partial"));
  if (j["partial"].get<bool>()) EXPECT_FALSE(j["verification"]["verified"].get<bool>());
  else EXPECT_EQ(j["code"], "time_limit");
}

TEST_F(ServiceTest, TargetAtScoreIsZeroChange) {
  const std::string id = upload(fixtures::kFourFirmsCsv);
  const Response r = call("POST", "/panels/" + id + "/counterfactual",
                          R"({"firm":"4","desired_efficiency":0.5})");
  ASSERT_EQ(r.status, 200) << r.body;
  const Json j = Json::parse(r.body);
  EXPECT_EQ(j["counterfactual"], j["original"]);
  EXPECT_EQ(j["cost"]["l0"], 0);
  EXPECT_EQ(j["changed"], Json::array({false, false}));
}

TEST_F(ServiceTest, UploadLimitAndBadCsv) {
  ServiceConfig cfg;
  cfg.max_upload_bytes = 64;
  Service small(cfg);
  const Response r = small.handle("POST", "/panels", {}, std::string(200, 'x'));
  EXPECT_EQ(r.status, 413);
  EXPECT_EQ(call("POST", "/panels", "id,in:a,out:b\n1,-1,1\n").status, 422);
  EXPECT_EQ(call("GET", "/nowhere").status, 404);
  EXPECT_EQ(kMaxUploadBytes, 10u * 1024u * 1024u);
}

TEST_F(ServiceTest, BatchSyntheticTwentyFirms) {
  const std::string id = upload(synth_csv(42, 20, 5, 3));
  EXPECT_EQ(call("GET", "/panels/" + id + "/heatmap").status, 404);
  const Response r = call("POST", "/panels/" + id + "/batch", R"({"desired_efficiency":1.0,"preset":"l2"})");
  ASSERT_EQ(r.status, 200) << r.body;
  const Json j = Json::parse(r.body);
  EXPECT_GT(j["analyzed"].get<int>(), 0);
  for (const auto& f : j["firms"]) {
    if (f["status"] == "analyzed") EXPECT_TRUE(f["verified"].get<bool>()) << f["id"];
  }
  EXPECT_TRUE(j["all_verified"].get<bool>());
  EXPECT_TRUE(j.contains("stats"));
  const Response h = call("GET", "/panels/" + id + "/heatmap");
  ASSERT_EQ(h.status, 200);
  EXPECT_EQ(Json::parse(h.body)["cells"].size(), 20u);
  EXPECT_EQ(Json::parse(h.body)["true_count"], j["heatmap"]["true_count"]);
}

TEST_F(ServiceTest, AsyncBatchJob) {
  const std::string id = upload(fixtures::kFourFirmsCsv);
  const Response r = call("POST", "/panels/" + id + "/batch",
                          R"({"desired_efficiency":0.8,"preset":"l2","normalize":false})", {{"async", "1"}});
  ASSERT_EQ(r.status, 202);
  const std::string job = Json::parse(r.body)["job_id"];
  Json status;
  for (int i = 0; i < 500; ++i) {
    status = Json::parse(call("GET", "/jobs/" + job).body);
    if (status["status"] != "running") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ASSERT_EQ(status["status"], "done");
  EXPECT_EQ(status["result"]["stats"]["mean_l0"].get<double>(), 1.5);
  EXPECT_EQ(call("GET", "/jobs/zzz").status, 404);
  const Response h = call("GET", "/panels/" + id + "/heatmap");
  EXPECT_EQ(Json::parse(h.body)["true_count"], 3);
}

TEST_F(ServiceTest, HeatmapOnDemandAndSpider) {
  const std::string id = upload(fixtures::kFourFirmsCsv);
  const Response h = call("GET", "/panels/" + id + "/heatmap", "", {{"estar", "0.8"}, {"preset", "l2"}});
  ASSERT_EQ(h.status, 200) << h.body;
  const Response s = call("GET", "/panels/" + id + "/spider/3", "",
                          {{"estar", "0.8"}, {"normalize", "0"}, {"presets", "farrell,l0+(l2),l2"}});
  ASSERT_EQ(s.status, 200) << s.body;
  const Json j = Json::parse(s.body);
  EXPECT_EQ(j["original"], Json::array({1.0, 1.0}));
  ASSERT_EQ(j["series"].size(), 3u);
  EXPECT_EQ(j["series"][1]["label"], "l0+(l2)");
  EXPECT_NEAR(j["series"][1]["ratios"][1].get<double>(), 0.55, 1e-6);
  EXPECT_NEAR(j["series"][2]["ratios"][0].get<double>(), 0.874, 0.005);
  EXPECT_NEAR(j["series"][2]["ratios"][1].get<double>(), 0.64, 0.005);
  EXPECT_EQ(call("GET", "/panels/" + id + "/spider/77").status, 404);
}

TEST(Http, ServesOverTheWire) {
  Service svc;
  svc.add_panel(fixtures::four_firms(), {}, "demo");
  httplib::Server server;
  svc.bind(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto eff = client.Get("/panels/demo/efficiency");
  ASSERT_TRUE(eff);
  EXPECT_EQ(eff->status, 200);
  EXPECT_EQ(eff->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(Json::parse(eff->body)["scores"].size(), 4u);
  auto cf = client.Post("/panels/demo/counterfactual",
                        R"({"firm":"3","desired_efficiency":0.8,"normalize":false})", "application/json");
  ASSERT_TRUE(cf);
  EXPECT_EQ(cf->status, 200);
  EXPECT_NEAR(Json::parse(cf->body)["counterfactual"][1].get<double>(), 0.80, 0.01);
  auto up = client.Post("/panels?id=second", fixtures::kFourFirmsCsv, "text/csv");
  ASSERT_TRUE(up);
  EXPECT_EQ(up->status, 201);
  auto missing = client.Get("/panels/none/efficiency");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  server.stop();
  t.join();
}

TEST(Http, PortFromEnvironment) {
  ::unsetenv("CFDEA_PORT");
  EXPECT_EQ(port_from_env(), 8080);
  ::setenv("CFDEA_PORT", "9123", 1);
  EXPECT_EQ(port_from_env(), 9123);
  ::unsetenv("CFDEA_PORT");
}
