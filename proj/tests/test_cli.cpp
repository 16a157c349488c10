#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "acc/cli.hpp"
#include "acc/gateway.hpp"
#include "acc/net/checkpoint.hpp"

using namespace acc;
using namespace acc::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("acc_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error_key(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

RunConfig short_eval_config() {
  RunConfig c;
  c.episode.max_steps = 1500;  // 30 s per trace keeps the suite fast
  return c;
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(ACC_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = parse_config(Json::object());
  EXPECT_EQ(c.mode, PowertrainMode::Ice);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.train.discount, 0.99);
  EXPECT_EQ(c.train.batch, 32u);
  EXPECT_EQ(c.consensus.beta, 0.15);
  EXPECT_EQ(c.test_set_seed, kDefaultTestSetSeed);
  EXPECT_EQ(config_digest(c), config_digest(RunConfig{}));
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(config_error_key(R"({"train":{"discount":1.5}})"), "train.discount");
  EXPECT_EQ(config_error_key(R"({"trian":{}})"), "trian");
  EXPECT_EQ(config_error_key(R"({"train":{"batch":1.5}})"), "train.batch");
  EXPECT_EQ(config_error_key(R"({"seed":-1})"), "seed");
  EXPECT_EQ(config_error_key(R"({"mode":"diesel"})"), "mode");
  EXPECT_EQ(config_error_key(R"({"episode":{"gap0":[40,30]}})"), "episode.gap0");
  EXPECT_EQ(config_error_key(R"({"vision_divisor":3})"), "vision_divisor");
  EXPECT_EQ(config_error_key(R"({"ev":{"coefficients":[1,2]}})"), "ev.coefficients");
  EXPECT_EQ(config_error_key(R"({"powertrain":{"emissions":[{"species":"CO","index":1,"cpf":2}]}})"),
            "powertrain.emissions[0].cpf");
  EXPECT_EQ(config_error_key(R"({"paths":{"traces":["/nonexistent.csv"]}})"), "paths.traces");
  EXPECT_EQ(config_error_key("{not json"), "");
}

TEST(Config, EvModeSwitchesEpisodeRanges) {
  const auto c = parse_config_text(R"({"mode":"ev","reward":"force","state":"vision"})");
  EXPECT_EQ(c.episode.mode, PowertrainMode::Ev);
  EXPECT_EQ(c.episode.host_v0.lo, 11.0);
  EXPECT_EQ(c.reward, RewardMode::GapForce);
  EXPECT_EQ(c.state, StateMode::Vision);
  EXPECT_THROW(c.env(), MissingArtifact);
  EXPECT_THROW(load_test_set(c), MissingArtifact);
}

TEST(Config, JsonRoundTripIsStable) {
  RunConfig c = parse_config_text(R"({"seed":9,"train":{"action_repeat":10,"learning_rate":0.001}})");
  const Json j = to_json(c);
  const RunConfig back = parse_config(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(config_digest(back), config_digest(c));
  EXPECT_EQ(c.train_config().action_repeat, 10u);
  c.paths.output = "elsewhere";
  EXPECT_EQ(config_digest(c), config_digest(back));
  c.seed = 10;
  EXPECT_NE(config_digest(c), config_digest(back));
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  const auto dir = scratch("paths");
  std::ofstream(dir / "cfg.json") << R"({"paths":{"gap_checkpoint":"ck/gap.qnet","output":"run"}})";
  const auto c = parse_config_file((dir / "cfg.json").string());
  EXPECT_EQ(c.paths.gap_checkpoint, (dir / "ck/gap.qnet").string());
  EXPECT_EQ(c.paths.output, (dir / "run").string());
}

TEST(Digest, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Methods, KeysRoundTrip) {
  for (Method m : kAllMethods) EXPECT_EQ(parse_method(key(m)), m);
  EXPECT_THROW(parse_method("robot"), ConfigError);
}

TEST(Eval, BaselineIsDeterministicAndAuditable) {
  const auto cfg = short_eval_config();
  const auto a = scratch("eval_a"), b = scratch("eval_b");
  const Json ra = to_json(run_eval(cfg, {Method::Lead, Method::Consensus}, a.string()));
  const Json rb = to_json(run_eval(cfg, {Method::Lead, Method::Consensus}, b.string()));
  EXPECT_EQ(ra.dump(), rb.dump());
  for (const auto& row : ra["methods"])
    for (const auto& f : row["files"]) EXPECT_EQ(slurp(a / f.get<std::string>()), slurp(b / f.get<std::string>()));

  const Json& lead = ra["methods"][0];
  const Json& accr = ra["methods"][1];
  EXPECT_EQ(lead["method"], "lead");
  EXPECT_TRUE(lead["metrics"]["gap_rmse_m"].is_null());
  EXPECT_TRUE(lead["metrics"]["fuel_g_per_mile"].is_number());
  EXPECT_EQ(accr["collisions"], 0);
  EXPECT_EQ(accr["runs"], 4);
  EXPECT_EQ(ra["provenance"]["config_digest"], config_digest(cfg));

  // Independent recomputation of the pooled gap RMSE from the CSVs.
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& f : accr["files"]) {
    std::ifstream in(a / f.get<std::string>());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string field;
      for (int k = 0; k < 4; ++k) std::getline(ss, field, ',');
      const double g = std::stod(field);
      sq += (g - 55.0) * (g - 55.0);
      ++n;
    }
  }
  EXPECT_NEAR(accr["metrics"]["gap_rmse_m"].get<double>(), std::sqrt(sq / double(n)), 1e-9);
  EXPECT_EQ(accr["metrics"]["samples"], n);
}

TEST(Eval, MissingCheckpointFailsBeforeRunning) {
  auto cfg = short_eval_config();
  const auto out = scratch("eval_missing");
  EXPECT_THROW(run_eval(cfg, {Method::Consensus, Method::GapAgent}, out.string()), MissingArtifact);
  cfg.paths.gap_checkpoint = (out / "nope.qnet").string();
  EXPECT_THROW(run_eval(cfg, {Method::GapAgent}, out.string()), MissingArtifact);
  EXPECT_TRUE(fs::is_empty(out));
  EXPECT_THROW(run_eval(cfg, {Method::Human}, out.string()), MissingArtifact);
}

TEST(Eval, AgentAndHumanRows) {
  auto cfg = short_eval_config();
  const auto dir = scratch("eval_agent");
  Rng rng(3);
  net::save_checkpoint_file((dir / "gap.qnet").string(), net::QNetwork<float>(net::Topology::feature(), rng));
  cfg.paths.gap_checkpoint = (dir / "gap.qnet").string();

  // A scripted cockpit session stands in for a human drive.
  const auto tests = load_test_set(cfg);
  bridge::DriveSession s(eval_initial_state(cfg.episode, tests[0], cfg.seed, 0), tests[0], cfg.episode,
                         cfg.actuator, {}, {});
  s.on_connect();
  for (int k = 0; k < 60; ++k) {
    s.on_text(R"({"type":"control","force":)" + std::to_string(k % 2 ? 0.1 : -0.1) + "}");
    s.advance(1.0);
  }
  write_trajectory_file((dir / "driver.csv").string(), s.recording());
  cfg.paths.human_sessions = {(dir / "driver.csv").string(), (dir / "driver.csv").string()};

  const auto rep = to_json(run_eval(cfg, {Method::GapAgent, Method::Human}, (dir / "out").string()));
  ASSERT_EQ(rep["methods"].size(), 2u);
  EXPECT_EQ(rep["methods"][0]["runs"], 4);
  EXPECT_EQ(rep["methods"][1]["runs"], 2);
  EXPECT_TRUE(rep["methods"][1]["metrics"]["gap_rmse_m"].is_number());
  EXPECT_EQ(rep["provenance"]["human_sessions"], 2);
  EXPECT_EQ(rep["provenance"]["checkpoints"]["gap"], file_sha256(cfg.paths.gap_checkpoint));

  const auto text = render_report(rep);
  EXPECT_NE(text.find("Human driver (mean)"), std::string::npos);
  EXPECT_NE(text.find("(not run)"), std::string::npos);

  cfg.state = StateMode::Vision;
  EXPECT_THROW(run_eval(cfg, {Method::GapAgent}, (dir / "out2").string()), ConfigError);
}

TEST(Eval, EvUsesSuppliedTraces) {
  auto cfg = parse_config_text(R"({"mode":"ev"})");
  cfg.episode.max_steps = 1000;
  const auto dir = scratch("eval_ev");
  for (int i = 0; i < 4; ++i) {
    std::ofstream out(dir / ("t" + std::to_string(i) + ".csv"));
    out << "t,v\n";
    for (int k = 0; k <= 300; ++k) out << k << "," << 13.0 + std::sin(k * 0.1 * (i + 1)) << "\n";
    cfg.paths.test_traces.push_back((dir / ("t" + std::to_string(i) + ".csv")).string());
  }
  const auto tests = load_test_set(cfg);
  ASSERT_EQ(tests.size(), 4u);
  EXPECT_EQ(tests[0].samples.size(), 12001u);  // truncated to 240 s
  const auto rep = to_json(run_eval(cfg, {Method::Lead, Method::Consensus}, (dir / "out").string()));
  EXPECT_TRUE(rep["methods"][1]["metrics"]["energy_kj_per_mile"].is_number());
  EXPECT_TRUE(rep["methods"][1]["metrics"]["fuel_g_per_mile"].is_null());
  EXPECT_NE(render_report(rep).find("Energy (kJ/mi)"), std::string::npos);
}

TEST(Report, RendersAllMethodsWithGaps) {
  Json rep = {{"format", "acc-report-1"},
              {"mode", "ice"},
              {"methods", Json::array({{{"method", "lead"},
                                        {"metrics", {{"fuel_g_per_mile", 12.3456}, {"gap_rmse_m", nullptr}}}}})}};
  const auto text = render_report(rep);
  EXPECT_NE(text.find("12.346"), std::string::npos);
  EXPECT_NE(text.find("N/A"), std::string::npos);
  for (const char* l : {"Leading vehicle", "Gap-based agent", "Force-based agent", "Traditional ACC", "Human driver"})
    EXPECT_NE(text.find(l), std::string::npos) << l;
  std::size_t not_run = 0;
  for (auto p = text.find("(not run)"); p != std::string::npos; p = text.find("(not run)", p + 1)) ++not_run;
  EXPECT_EQ(not_run, 4u);
}

TEST(TestSet, WrittenCsvReloadsExactly) {
  const auto dir = scratch("gen");
  const auto set = make_test_set(kDefaultTestSetSeed);
  const auto files = write_test_set(set, dir.string());
  ASSERT_EQ(files.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto back = load_trace_file(files[i], 0.02);
    ASSERT_EQ(back.samples.size(), set[i].samples.size());
    for (std::size_t k = 0; k < back.samples.size(); ++k) ASSERT_NEAR(back.samples[k], set[i].samples[k], 1e-12);
  }
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("bin");
  std::ofstream(dir / "bad.json") << R"({"train":{"discount":1.5}})";
  std::ofstream(dir / "typo.json") << R"({"trian":{}})";
  std::ofstream(dir / "ok.json") << R"({"episode":{"max_steps":200}})";
  EXPECT_EQ(run_cli("--config " + (dir / "bad.json").string() + " baseline"), 2);
  EXPECT_EQ(run_cli("--config " + (dir / "typo.json").string() + " baseline"), 2);
  EXPECT_EQ(run_cli("--bogus-flag baseline"), 2);
  EXPECT_EQ(run_cli("--config " + (dir / "ok.json").string() + " --out " + (dir / "o").string() + " eval --methods gap"),
            3);
  EXPECT_EQ(run_cli("report " + (dir / "absent.json").string()), 3);
  EXPECT_EQ(run_cli("--config " + (dir / "ok.json").string() + " --out " + (dir / "o").string() + " baseline"), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "report.json"));
  EXPECT_EQ(run_cli("report " + (dir / "o" / "report.json").string()), 0);
}
