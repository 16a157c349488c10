// acclab: train, evaluate and drive the car-following lab from the shell.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "acc/cli.hpp"
#include "acc/gateway.hpp"
#include "acc/net/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace acc;
using acc::cli::Json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kMissing = 3, kRuntime = 4 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode, reward, state, out;
};

cli::RunConfig load(const Flags& f) {
  Json j = Json::object();
  std::string base = ".";
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw cli::ConfigError("", "cannot read config " + f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      j = Json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw cli::ConfigError("", std::string("not valid JSON: ") + e.what());
    }
    base = fs::path(f.config).parent_path().string();
    if (base.empty()) base = ".";
  }
  // Flags override the file and go through the same validation.
  if (!j.is_object()) throw cli::ConfigError("", "expected an object");
  if (f.seed) j["seed"] = *f.seed;
  if (!f.mode.empty()) j["mode"] = f.mode;
  if (!f.reward.empty()) j["reward"] = f.reward;
  if (!f.state.empty()) j["state"] = f.state;
  cli::RunConfig cfg = cli::parse_config(j, base);
  if (!f.out.empty()) cfg.paths.output = f.out;
  return cfg;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

int cmd_train(const Flags& flags) {
  const auto cfg = load(flags);
  const fs::path out = cfg.paths.output;
  fs::create_directories(out);
  const auto result = run_training(cfg.env(), cfg.train_config(), out.string(), [](const CurveRow& r) {
    if ((r.episode + 1) % 10 == 0) {
      std::printf("episode %zu decisions %llu mean_reward %.6f\n", r.episode + 1,
                  static_cast<unsigned long long>(r.steps), r.mean_reward);
      std::fflush(stdout);
    }
  });

  Json ckpts = Json::array();
  for (const auto& c : result.checkpoints) {
    ckpts.push_back({{"file", fs::path(c).filename().string()}, {"sha256", cli::file_sha256(c)}});
  }
  write_json(out / "manifest.json", {{"config", cli::to_json(cfg)},
                                     {"config_digest", cli::config_digest(cfg)},
                                     {"seed", cfg.seed},
                                     {"reward", to_string(cfg.reward)},
                                     {"state", to_string(cfg.state)},
                                     {"action_repeat", cfg.train.action_repeat},
                                     {"vision_divisor", cfg.vision_divisor},
                                     {"decisions", result.decisions},
                                     {"updates", result.updates},
                                     {"checkpoints", ckpts}});
  std::printf("wrote %s\n", (out / "policy.qnet").string().c_str());
  return kOk;
}

int cmd_eval(const Flags& flags, const std::vector<std::string>& method_names, bool baseline_only) {
  const auto cfg = load(flags);
  std::vector<cli::Method> methods;
  if (baseline_only) {
    methods = {cli::Method::Lead, cli::Method::Consensus};
  } else if (!method_names.empty()) {
    for (const auto& m : method_names) methods.push_back(cli::parse_method(m));
  } else {
    // Default: everything whose inputs are configured.
    methods.push_back(cli::Method::Lead);
    if (!cfg.paths.gap_checkpoint.empty()) methods.push_back(cli::Method::GapAgent);
    if (!cfg.paths.force_checkpoint.empty()) methods.push_back(cli::Method::ForceAgent);
    methods.push_back(cli::Method::Consensus);
    if (!cfg.paths.human_sessions.empty()) methods.push_back(cli::Method::Human);
  }
  const fs::path out = cfg.paths.output;
  const auto report = cli::to_json(cli::run_eval(cfg, methods, out.string()));
  write_json(out / "report.json", report);
  const std::string text = cli::render_report(report);
  std::ofstream(out / "report.txt") << text;
  std::cout << text;
  return kOk;
}

int cmd_gen_traj(const Flags& flags) {
  auto cfg = load(flags);
  // An explicit --seed picks the trace set; otherwise the fixed test set.
  if (flags.seed) cfg.test_set_seed = *flags.seed;
  for (const auto& f : cli::write_test_set(cli::load_test_set(cfg), cfg.paths.output)) std::puts(f.c_str());
  return kOk;
}

int cmd_drive(const Flags& flags, std::size_t trace_index, double duration, const std::string& session_name) {
  auto cfg = load(flags);
  const auto tests = cli::load_test_set(cfg);
  if (trace_index >= tests.size()) throw cli::ConfigError("trace", "index beyond the test set");
  if (duration > 0.0) cfg.episode.max_steps = std::uint64_t(std::llround(duration / cfg.episode.dt));

  bridge::GatewayConfig gw;
  gw.port = cfg.bridge.ws;
  RewardConfig reward = cfg.shaping;
  reward.mode = cfg.reward;
  const WorldState start = eval_initial_state(cfg.episode, tests[trace_index], cfg.seed, trace_index);
  bridge::DriveSession session(start, tests[trace_index], cfg.episode, cfg.actuator, reward, gw);
  session.warn = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };

  const auto rec = bridge::serve_drive(session, gw, [](std::uint16_t port) {
    std::printf("cockpit gateway on ws://127.0.0.1:%u, waiting for the first control frame\n", unsigned(port));
    std::fflush(stdout);
  });
  fs::create_directories(cfg.paths.output);
  const fs::path file = fs::path(cfg.paths.output) / session_name;
  write_trajectory_file(file.string(), rec);
  std::printf("session %s ended (%s), %zu rows\n", file.string().c_str(), to_string(session.status()), rec.size());
  return kOk;
}

int cmd_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cli::MissingArtifact("report not found: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw cli::ConfigError("", std::string("report is not valid JSON: ") + e.what());
  }
  std::cout << cli::render_report(j);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Car-following lab: consensus ACC, DDQN agents, energy reports"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  std::uint64_t seed = 0;
  app.add_option("--config", flags.config, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream");
  app.add_option("--mode", flags.mode, "Powertrain")->check(CLI::IsMember({"ice", "ev"}));
  app.add_option("--reward", flags.reward, "Reward shaping")->check(CLI::IsMember({"gap", "force"}));
  app.add_option("--state", flags.state, "Agent state")->check(CLI::IsMember({"feature", "vision"}));
  app.add_option("--out", flags.out, "Output directory");

  auto* train = app.add_subcommand("train", "Train a DDQN agent");
  auto* eval = app.add_subcommand("eval", "Evaluate methods over the test set");
  std::vector<std::string> methods;
  eval->add_option("--methods", methods, "lead,gap,force,acc,human")->delimiter(',');
  auto* baseline = app.add_subcommand("baseline", "Evaluate the lead trace and consensus ACC only");
  auto* drive = app.add_subcommand("drive", "Serve the cockpit gateway and record a human session");
  std::size_t trace_index = 0;
  double duration = 0.0;
  std::string session_name = "human_session.csv";
  drive->add_option("--trace", trace_index, "Test trace to follow");
  drive->add_option("--duration", duration, "Session length in seconds (default: whole trace)");
  drive->add_option("--session", session_name, "Output CSV name");
  auto* gen = app.add_subcommand("gen-traj", "Write the test-set lead traces as CSV");
  auto* report = app.add_subcommand("report", "Render a report.json as a table");
  std::string report_path;
  report->add_option("report", report_path, "report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  if (*seed_opt) flags.seed = seed;

  try {
    if (*train) return cmd_train(flags);
    if (*eval) return cmd_eval(flags, methods, false);
    if (*baseline) return cmd_eval(flags, {}, true);
    if (*drive) return cmd_drive(flags, trace_index, duration, session_name);
    if (*gen) return cmd_gen_traj(flags);
    if (*report) return cmd_report(report_path);
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const cli::MissingArtifact& e) {
    std::cerr << "missing: " << e.what() << "\n";
    return kMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
