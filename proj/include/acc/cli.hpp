#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "acc/agent.hpp"
#include "acc/bridge.hpp"
#include "acc/control.hpp"
#include "acc/energy.hpp"
#include "acc/sim.hpp"
#include "acc/trajectory.hpp"

namespace acc::cli {

using Json = nlohmann::json;

/// Bad or unknown configuration value. `key` is the dotted path, e.g.
/// "train.discount".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// A checkpoint, trace or session file a requested step needs is absent.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Paths {
  std::vector<std::string> traces;       // EV training pool (CSV t,v)
  std::vector<std::string> test_traces;  // EV test set, 4 files
  std::string gap_checkpoint;
  std::string force_checkpoint;
  std::vector<std::string> human_sessions;  // trajectory CSVs from drive sessions
  std::string output = "out";
};

struct BridgePorts {
  std::uint16_t udp = 47001;
  std::uint16_t ws = 8765;
  std::uint32_t action_timeout_ms = 100;
  std::uint32_t max_consecutive_timeouts = 50;
};

struct RunConfig {
  PowertrainMode mode = PowertrainMode::Ice;
  RewardMode reward = RewardMode::Gap;
  StateMode state = StateMode::Feature;
  std::uint64_t seed = 1;
  std::uint64_t test_set_seed = kDefaultTestSetSeed;
  ConsensusGains consensus;
  ActuatorMap actuator;
  EpisodeSpec episode = EpisodeSpec::ice();
  TrainConfig train;
  RewardConfig shaping;
  int vision_divisor = 4;
  IcePowertrain powertrain;
  EvCoefficients ev;
  Paths paths;
  BridgePorts bridge;

  EnvConfig env() const;
  TrainConfig train_config() const;
};

/// Fills defaults, rejects unknown keys, range-checks every field. Relative
/// paths resolve against `base_dir`.
RunConfig parse_config(const Json& j, const std::string& base_dir = ".");
RunConfig parse_config_text(const std::string& text, const std::string& base_dir = ".");
RunConfig parse_config_file(const std::string& path);

/// Canonical JSON of a config (every field spelled out).
Json to_json(const RunConfig& cfg);
std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);
std::string config_digest(const RunConfig& cfg);

enum class Method { Lead, GapAgent, ForceAgent, Consensus, Human };

inline constexpr Method kAllMethods[] = {Method::Lead, Method::GapAgent, Method::ForceAgent, Method::Consensus,
                                         Method::Human};

const char* key(Method m);    // "lead", "gap", ...
const char* label(Method m);  // "Leading vehicle", ...
Method parse_method(const std::string& s);

/// Lead speed traces the evaluation replays.
std::vector<SpeedTrace> load_test_set(const RunConfig& cfg);

struct MethodRow {
  Method method = Method::Lead;
  TripMetrics metrics;
  std::vector<std::string> files;  // trajectory CSVs, relative to the report
  std::size_t collisions = 0;
  std::size_t runs = 0;
};

struct RunReport {
  PowertrainMode mode = PowertrainMode::Ice;
  std::vector<MethodRow> rows;
  Json provenance;
};

/// Replays each method over the test set from identical initial states, logs
/// every run as CSV under `out_dir`, and computes metrics from those files.
RunReport run_eval(const RunConfig& cfg, const std::vector<Method>& methods, const std::string& out_dir);

Json to_json(const RunReport& r);
/// Human-readable table. Methods missing from the report show as gaps.
std::string render_report(const Json& report);

/// Writes the lead traces of the test set as `test_trace<i>.csv`.
std::vector<std::string> write_test_set(const std::vector<SpeedTrace>& traces, const std::string& out_dir);

}  // namespace acc::cli
