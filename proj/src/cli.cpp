#include "acc/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <type_traits>
#include <set>
#include <sstream>

#include "acc/episode.hpp"
#include "acc/net/checkpoint.hpp"

namespace acc::cli {
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

/// One JSON object of the config. Remembers which keys were consumed so the
/// leftovers can be rejected as typos.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const char* key, T& out, std::function<bool(const T&)> ok = {}, const char* rule = "") {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      // nlohmann would silently truncate 1.5 or wrap -1.
      const bool fits = it->is_number_unsigned()
                            ? it->template get<std::uint64_t>() <= std::uint64_t(std::numeric_limits<T>::max())
                            : it->is_number_integer() && it->template get<std::int64_t>() >= std::int64_t(std::numeric_limits<T>::min()) &&
                                  it->template get<std::int64_t>() <= std::int64_t(std::numeric_limits<T>::max());
      if (!fits) throw ConfigError(key_path(key), "expected an integer in range");
    }
    T value;
    try {
      value = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(key_path(key), "wrong type");
    }
    if (ok && !ok(value)) throw ConfigError(key_path(key), std::string("out of range, expected ") + rule);
    out = value;
  }

  void get_interval(const char* key, Interval& out) {
    std::vector<double> v{out.lo, out.hi};
    get<std::vector<double>>(key, v, [](const auto& x) { return x.size() == 2 && x[0] <= x[1] && x[0] >= 0.0; },
                             "[lo, hi] with 0 <= lo <= hi");
    out = {v[0], v[1]};
  }

  template <class E>
  void get_enum(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    std::string s;
    bool present = j_.contains(key);
    get<std::string>(key, s);
    if (!present) return;
    for (const auto& [n, e] : names) {
      if (s == n) {
        out = e;
        return;
      }
    }
    std::string allowed;
    for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : "|") + std::string(n);
    throw ConfigError(key_path(key), "unknown value \"" + s + "\", expected " + allowed);
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return Section(*it, key_path(key));
  }

  /// Raw value for keys needing custom handling (arrays of objects).
  const Json* raw(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(key_path(k), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

bool positive(const double& x) { return x > 0.0; }
bool nonneg(const double& x) { return x >= 0.0; }
bool unit_open(const double& x) { return x > 0.0 && x < 1.0; }
bool unit_closed(const double& x) { return x >= 0.0 && x <= 1.0; }
template <class T>
bool at_least_one(const T& x) {
  return x >= 1;
}

/// Runs a struct's own validate() and pins any failure on its section.
template <class T>
void validated(const T& value, const std::string& path) {
  try {
    value.validate();
  } catch (const ContractError& e) {
    throw ConfigError(path, e.what());
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base) / path).lexically_normal().string();
}

void require_file(const std::string& path, const std::string& key) {
  if (!path.empty() && !fs::is_regular_file(path)) throw ConfigError(key, "file not found: " + path);
}

}  // namespace

EnvConfig RunConfig::env() const {
  EnvConfig e;
  e.episode = episode;
  e.actuator = actuator;
  e.reward = shaping;
  e.reward.mode = reward;
  e.state = state;
  e.vision_divisor = vision_divisor;
  e.action_repeat = train.action_repeat;
  if (mode == PowertrainMode::Ev) {
    if (paths.traces.empty()) throw MissingArtifact("EV training needs paths.traces");
    for (const auto& p : paths.traces) {
      if (!fs::is_regular_file(p)) throw MissingArtifact("trace file not found: " + p);
      e.ev_pool.push_back(load_trace_file(p, episode.dt));
    }
  }
  return e;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

RunConfig parse_config(const Json& j, const std::string& base_dir) {
  RunConfig c;
  Section root(j, "");

  root.get_enum("mode", c.mode, {{"ice", PowertrainMode::Ice}, {"ev", PowertrainMode::Ev}});
  if (c.mode == PowertrainMode::Ev) c.episode = EpisodeSpec::ev();
  c.episode.mode = c.mode;
  root.get_enum("reward", c.reward, {{"gap", RewardMode::Gap}, {"force", RewardMode::GapForce}});
  root.get_enum("state", c.state, {{"feature", StateMode::Feature}, {"vision", StateMode::Vision}});
  root.get<std::uint64_t>("seed", c.seed);

  if (auto s = root.sub("consensus")) {
    s->get<double>("beta", c.consensus.beta, positive, "> 0");
    s->get<double>("gamma_gain", c.consensus.gamma_gain, positive, "> 0");
    s->get<double>("t_gap", c.consensus.t_gap, positive, "> 0");
    s->get<double>("d_safe", c.consensus.d_safe, positive, "> 0");
    s->finish();
  }
  validated(c.consensus, "consensus");

  if (auto s = root.sub("actuator")) {
    s->get<double>("max_accel", c.actuator.max_accel, positive, "> 0");
    s->get<double>("max_decel_magnitude", c.actuator.max_decel_magnitude, positive, "> 0");
    s->finish();
  }
  validated(c.actuator, "actuator");

  if (auto s = root.sub("episode")) {
    s->get<double>("dt", c.episode.dt, positive, "> 0");
    s->get<double>("max_gap", c.episode.max_gap, positive, "> 0");
    s->get<std::uint64_t>("max_steps", c.episode.max_steps, at_least_one<std::uint64_t>, ">= 1");
    s->get<double>("vehicle_length", c.episode.vehicle_length, nonneg, ">= 0");
    s->get_interval("lead_v0", c.episode.lead_v0);
    s->get_interval("host_v0", c.episode.host_v0);
    s->get_interval("gap0", c.episode.gap0);
    s->finish();
  }
  validated(c.episode, "episode");

  if (auto s = root.sub("train")) {
    auto& t = c.train;
    s->get<double>("discount", t.discount, unit_open, "(0, 1)");
    s->get<std::size_t>("batch", t.batch, at_least_one<std::size_t>, ">= 1");
    s->get<std::uint64_t>("target_sync", t.target_sync, at_least_one<std::uint64_t>, ">= 1");
    s->get<double>("eps_start", t.eps_start, unit_closed, "[0, 1]");
    s->get<double>("eps_end", t.eps_end, unit_closed, "[0, 1]");
    s->get<std::uint64_t>("eps_decay_steps", t.eps_decay_steps);
    s->get<double>("learning_rate", t.learning_rate, positive, "> 0");
    s->get<std::size_t>("replay_capacity", t.replay_capacity, at_least_one<std::size_t>, ">= 1");
    s->get<std::size_t>("warmup", t.warmup);
    s->get<std::size_t>("episodes", t.episodes, at_least_one<std::size_t>, ">= 1");
    s->get<std::uint64_t>("max_episode_ticks", t.max_episode_ticks, at_least_one<std::uint64_t>, ">= 1");
    s->get<std::uint32_t>("action_repeat", t.action_repeat, at_least_one<std::uint32_t>, ">= 1");
    s->get<double>("huber_delta", t.huber_delta, positive, "> 0");
    s->get<std::size_t>("curve_window", t.curve_window, at_least_one<std::size_t>, ">= 1");
    s->get<std::size_t>("checkpoint_every", t.checkpoint_every);
    s->finish();
  }
  validated(c.train, "train");

  if (auto s = root.sub("reward_shaping")) {
    auto& r = c.shaping;
    s->get<double>("desired_gap", r.desired_gap, positive, "> 0");
    s->get<double>("band_low", r.band_low, positive, "> 0");
    s->get<double>("band_high", r.band_high, positive, "> 0");
    s->get<double>("outer_low", r.outer_low, positive, "> 0");
    s->get<double>("outer_high", r.outer_high, positive, "> 0");
    s->get<double>("force_band", r.force_band, [](const double& x) { return x >= 0.0 && x < 1.0; }, "[0, 1)");
    s->finish();
  }
  c.shaping.mode = c.reward;
  validated(c.shaping, "reward_shaping");

  root.get<int>("vision_divisor", c.vision_divisor,
                [](const int& d) { return d >= 1 && 400 % (2 * d) == 0; }, "a divisor of 200");

  if (auto s = root.sub("powertrain")) {
    auto& p = c.powertrain;
    for (auto [name, field] : {std::pair{"lambda", &p.lambda}, {"k_friction", &p.k_friction},
                               {"idle_speed", &p.idle_speed}, {"engine_slope", &p.engine_slope},
                               {"displacement", &p.displacement}, {"mass", &p.mass}, {"c_rr", &p.c_rr},
                               {"cd_area", &p.cd_area}, {"air_density", &p.air_density},
                               {"eta_driveline", &p.eta_driveline}, {"accessory_kw", &p.accessory_kw}}) {
      s->get<double>(name, *field, positive, "> 0");
    }
    s->get<double>("eta_engine", p.eta_engine, [](const double& x) { return x > 0.0 && x <= 1.0; }, "(0, 1]");
    if (const Json* list = s->raw("emissions")) {
      if (!list->is_array()) throw ConfigError("powertrain.emissions", "expected an array");
      p.emissions.clear();
      std::size_t i = 0;
      for (const auto& item : *list) {
        Section e(item, "powertrain.emissions[" + std::to_string(i++) + "]");
        EmissionSpec spec;
        e.get<std::string>("species", spec.species);
        e.get<double>("index", spec.index, nonneg, ">= 0");
        e.get<double>("cpf", spec.cpf, unit_closed, "[0, 1]");
        e.finish();
        p.emissions.push_back(spec);
      }
    }
    s->finish();
  }
  validated(c.powertrain, "powertrain");

  if (auto s = root.sub("ev")) {
    std::vector<double> l(c.ev.l.begin(), c.ev.l.end());
    s->get<std::vector<double>>("coefficients", l, [](const auto& v) { return v.size() == 9; }, "9 numbers");
    std::copy(l.begin(), l.end(), c.ev.l.begin());
    s->get<bool>("clamp_regen", c.ev.clamp_regen);
    s->finish();
  }
  validated(c.ev, "ev");

  if (auto s = root.sub("paths")) {
    auto& p = c.paths;
    s->get<std::vector<std::string>>("traces", p.traces);
    s->get<std::vector<std::string>>("test_traces", p.test_traces);
    s->get<std::string>("gap_checkpoint", p.gap_checkpoint);
    s->get<std::string>("force_checkpoint", p.force_checkpoint);
    s->get<std::vector<std::string>>("human_sessions", p.human_sessions);
    s->get<std::string>("output", p.output);
    s->finish();
    for (auto& t : p.traces) require_file(t = resolve(base_dir, t), "paths.traces");
    for (auto& t : p.test_traces) require_file(t = resolve(base_dir, t), "paths.test_traces");
    for (auto& t : p.human_sessions) require_file(t = resolve(base_dir, t), "paths.human_sessions");
    // Checkpoints may not exist yet (train writes them); eval checks.
    p.gap_checkpoint = resolve(base_dir, p.gap_checkpoint);
    p.force_checkpoint = resolve(base_dir, p.force_checkpoint);
    p.output = resolve(base_dir, p.output);
  }

  if (auto s = root.sub("eval")) {
    s->get<std::uint64_t>("test_set_seed", c.test_set_seed);
    s->finish();
  }

  if (auto s = root.sub("bridge")) {
    auto& b = c.bridge;
    s->get<std::uint16_t>("udp_port", b.udp);
    s->get<std::uint16_t>("ws_port", b.ws);
    s->get<std::uint32_t>("action_timeout_ms", b.action_timeout_ms, at_least_one<std::uint32_t>, ">= 1");
    s->get<std::uint32_t>("max_consecutive_timeouts", b.max_consecutive_timeouts, at_least_one<std::uint32_t>,
                          ">= 1");
    s->finish();
  }

  root.finish();
  return c;
}

RunConfig parse_config_text(const std::string& text, const std::string& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("not valid JSON: ") + e.what());
  }
  return parse_config(j, base_dir);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), fs::path(path).parent_path().string().empty()
                                         ? std::string(".")
                                         : fs::path(path).parent_path().string());
}

Json to_json(const RunConfig& c) {
  const auto iv = [](const Interval& i) { return Json::array({i.lo, i.hi}); };
  Json emissions = Json::array();
  for (const auto& e : c.powertrain.emissions) {
    emissions.push_back({{"species", e.species}, {"index", e.index}, {"cpf", e.cpf}});
  }
  const auto& t = c.train;
  const auto& p = c.powertrain;
  return {
      {"mode", to_string(c.mode)},
      {"reward", to_string(c.reward)},
      {"state", to_string(c.state)},
      {"seed", c.seed},
      {"consensus",
       {{"beta", c.consensus.beta},
        {"gamma_gain", c.consensus.gamma_gain},
        {"t_gap", c.consensus.t_gap},
        {"d_safe", c.consensus.d_safe}}},
      {"actuator", {{"max_accel", c.actuator.max_accel}, {"max_decel_magnitude", c.actuator.max_decel_magnitude}}},
      {"episode",
       {{"dt", c.episode.dt},
        {"max_gap", c.episode.max_gap},
        {"max_steps", c.episode.max_steps},
        {"vehicle_length", c.episode.vehicle_length},
        {"lead_v0", iv(c.episode.lead_v0)},
        {"host_v0", iv(c.episode.host_v0)},
        {"gap0", iv(c.episode.gap0)}}},
      {"train",
       {{"discount", t.discount},
        {"batch", t.batch},
        {"target_sync", t.target_sync},
        {"eps_start", t.eps_start},
        {"eps_end", t.eps_end},
        {"eps_decay_steps", t.eps_decay_steps},
        {"learning_rate", t.learning_rate},
        {"replay_capacity", t.replay_capacity},
        {"warmup", t.warmup},
        {"episodes", t.episodes},
        {"max_episode_ticks", t.max_episode_ticks},
        {"action_repeat", t.action_repeat},
        {"huber_delta", t.huber_delta},
        {"curve_window", t.curve_window},
        {"checkpoint_every", t.checkpoint_every}}},
      {"reward_shaping",
       {{"desired_gap", c.shaping.desired_gap},
        {"band_low", c.shaping.band_low},
        {"band_high", c.shaping.band_high},
        {"outer_low", c.shaping.outer_low},
        {"outer_high", c.shaping.outer_high},
        {"force_band", c.shaping.force_band}}},
      {"vision_divisor", c.vision_divisor},
      {"powertrain",
       {{"lambda", p.lambda},
        {"k_friction", p.k_friction},
        {"idle_speed", p.idle_speed},
        {"engine_slope", p.engine_slope},
        {"displacement", p.displacement},
        {"eta_engine", p.eta_engine},
        {"mass", p.mass},
        {"c_rr", p.c_rr},
        {"cd_area", p.cd_area},
        {"air_density", p.air_density},
        {"eta_driveline", p.eta_driveline},
        {"accessory_kw", p.accessory_kw},
        {"emissions", emissions}}},
      {"ev", {{"coefficients", c.ev.l}, {"clamp_regen", c.ev.clamp_regen}}},
      {"paths",
       {{"traces", c.paths.traces},
        {"test_traces", c.paths.test_traces},
        {"gap_checkpoint", c.paths.gap_checkpoint},
        {"force_checkpoint", c.paths.force_checkpoint},
        {"human_sessions", c.paths.human_sessions},
        {"output", c.paths.output}}},
      {"eval", {{"test_set_seed", c.test_set_seed}}},
      {"bridge",
       {{"udp_port", c.bridge.udp},
        {"ws_port", c.bridge.ws},
        {"action_timeout_ms", c.bridge.action_timeout_ms},
        {"max_consecutive_timeouts", c.bridge.max_consecutive_timeouts}}},
  };
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string config_digest(const RunConfig& cfg) {
  // Output location does not change any computed number.
  Json j = to_json(cfg);
  j["paths"].erase("output");
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------- methods

const char* key(Method m) {
  switch (m) {
    case Method::Lead: return "lead";
    case Method::GapAgent: return "gap";
    case Method::ForceAgent: return "force";
    case Method::Consensus: return "acc";
    case Method::Human: return "human";
  }
  return "?";
}

const char* label(Method m) {
  switch (m) {
    case Method::Lead: return "Leading vehicle";
    case Method::GapAgent: return "Gap-based agent";
    case Method::ForceAgent: return "Force-based agent";
    case Method::Consensus: return "Traditional ACC";
    case Method::Human: return "Human driver (mean)";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : kAllMethods) {
    if (s == key(m)) return m;
  }
  throw ConfigError("methods", "unknown method \"" + s + "\", expected lead|gap|force|acc|human");
}

std::vector<SpeedTrace> load_test_set(const RunConfig& cfg) {
  if (cfg.mode == PowertrainMode::Ice) return make_test_set(cfg.test_set_seed, cfg.episode.dt);
  if (cfg.paths.test_traces.empty()) throw MissingArtifact("EV evaluation needs paths.test_traces");
  const auto keep = std::size_t(std::llround(kTestTraceSeconds / cfg.episode.dt)) + 1;
  std::vector<SpeedTrace> out;
  for (const auto& p : cfg.paths.test_traces) {
    if (!fs::is_regular_file(p)) throw MissingArtifact("test trace not found: " + p);
    SpeedTrace t = load_trace_file(p, cfg.episode.dt);
    if (t.samples.size() > keep) t.samples.resize(keep);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> write_test_set(const std::vector<SpeedTrace>& traces, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const std::string path = (fs::path(out_dir) / ("test_trace" + std::to_string(i) + ".csv")).string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_trace(out, traces[i]);
    files.push_back(path);
  }
  return files;
}

// ---------------------------------------------------------------- evaluation

namespace {

TripMetrics metrics_of(const Trajectory& t, const RunConfig& cfg) {
  return cfg.mode == PowertrainMode::Ice ? trip_metrics(t, cfg.powertrain) : trip_metrics(t, cfg.ev);
}

net::QNetwork<float> load_agent(const std::string& path, Method m, const RunConfig& cfg) {
  if (path.empty()) throw MissingArtifact(std::string(key(m)) + ": no checkpoint configured");
  if (!fs::is_regular_file(path)) throw MissingArtifact(std::string(key(m)) + ": checkpoint not found: " + path);
  auto net = net::load_checkpoint_file<float>(path);
  const auto want = cfg.state == StateMode::Feature ? net::Topology::Kind::Feature : net::Topology::Kind::Vision;
  if (net.topology().kind != want) {
    throw ConfigError("state", std::string(key(m)) + " checkpoint does not match state mode " + to_string(cfg.state));
  }
  return net;
}

}  // namespace

RunReport run_eval(const RunConfig& cfg, const std::vector<Method>& methods, const std::string& out_dir) {
  const auto tests = load_test_set(cfg);
  fs::create_directories(out_dir);

  RunReport rep;
  rep.mode = cfg.mode;
  Json checkpoints = Json::object();
  std::size_t sessions = 0;

  // Loads fail before anything runs so a missing artifact leaves no partial report.
  std::optional<net::QNetwork<float>> gap_net, force_net;
  for (Method m : methods) {
    if (m == Method::GapAgent) {
      gap_net = load_agent(cfg.paths.gap_checkpoint, m, cfg);
      checkpoints["gap"] = file_sha256(cfg.paths.gap_checkpoint);
    } else if (m == Method::ForceAgent) {
      force_net = load_agent(cfg.paths.force_checkpoint, m, cfg);
      checkpoints["force"] = file_sha256(cfg.paths.force_checkpoint);
    } else if (m == Method::Human) {
      if (cfg.paths.human_sessions.empty()) throw MissingArtifact("human: no recorded sessions configured");
      for (const auto& s : cfg.paths.human_sessions) {
        if (!fs::is_regular_file(s)) throw MissingArtifact("human: session file not found: " + s);
      }
    }
  }

  auto log_run = [&](const Trajectory& t, const std::string& name, MethodRow& row) {
    write_trajectory_file((fs::path(out_dir) / name).string(), t);
    row.files.push_back(name);
    // Metrics come from the file as written, so the CSVs are the audit trail.
    return metrics_of(read_trajectory_file((fs::path(out_dir) / name).string()), cfg);
  };

  for (Method m : methods) {
    MethodRow row;
    row.method = m;
    std::vector<TripMetrics> trips;
    if (m == Method::Human) {
      for (std::size_t k = 0; k < cfg.paths.human_sessions.size(); ++k) {
        const Trajectory t = read_trajectory_file(cfg.paths.human_sessions[k]);
        trips.push_back(log_run(t, "human_session" + std::to_string(k) + ".csv", row));
      }
      sessions = trips.size();
      row.metrics = mean_of(trips);
    } else {
      for (std::size_t i = 0; i < tests.size(); ++i) {
        const std::string name = std::string(key(m)) + "_trace" + std::to_string(i) + ".csv";
        const WorldState start = eval_initial_state(cfg.episode, tests[i], cfg.seed, i);
        if (m == Method::Lead) {
          const auto ticks = std::min<std::uint64_t>(cfg.episode.max_steps, tests[i].samples.size() - 1);
          trips.push_back(log_run(lead_trajectory(tests[i], ticks), name, row));
          continue;
        }
        std::unique_ptr<Controller> ctrl;
        if (m == Method::Consensus) {
          ctrl = std::make_unique<ConsensusPolicy>(cfg.consensus, cfg.actuator);
        } else {
          const auto& net = m == Method::GapAgent ? *gap_net : *force_net;
          ctrl = std::make_unique<AgentPolicy>(net, cfg.state, cfg.train.action_repeat, cfg.vision_divisor);
        }
        const EpisodeRecord rec = run_episode(start, tests[i], *ctrl, cfg.episode, cfg.actuator);
        if (rec.status == TerminationStatus::Collision) ++row.collisions;
        trips.push_back(log_run(rec.host, name, row));
      }
      row.metrics = aggregate(trips);
    }
    row.runs = trips.size();
    rep.rows.push_back(std::move(row));
  }

  rep.provenance = {{"seed", cfg.seed},
                    {"test_set_seed", cfg.test_set_seed},
                    {"config_digest", config_digest(cfg)},
                    {"checkpoints", checkpoints},
                    {"human_sessions", sessions},
                    {"test_traces", tests.size()}};
  return rep;
}

// ---------------------------------------------------------------- report

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

struct Column {
  const char* key;
  const char* title;
};

constexpr Column kIceColumns[] = {{"fuel_g_per_mile", "Fuel (g/mi)"}, {"co2_g_per_mile", "CO2 (g/mi)"},
                                  {"co_g_per_mile", "CO (g/mi)"},     {"hc_g_per_mile", "HC (g/mi)"},
                                  {"nox_g_per_mile", "NOx (g/mi)"},   {"gap_rmse_m", "Gap RMSE (m)"}};
constexpr Column kEvColumns[] = {{"energy_kj_per_mile", "Energy (kJ/mi)"}, {"gap_rmse_m", "Gap RMSE (m)"}};

}  // namespace

Json to_json(const RunReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    const auto& m = row.metrics;
    rows.push_back({{"method", key(row.method)},
                    {"label", label(row.method)},
                    {"runs", row.runs},
                    {"collisions", row.collisions},
                    {"files", row.files},
                    {"metrics",
                     {{"distance_miles", m.distance_miles},
                      {"samples", m.samples},
                      {"fuel_g_per_mile", opt(m.fuel_g_per_mile)},
                      {"co2_g_per_mile", opt(m.co2_g_per_mile)},
                      {"co_g_per_mile", opt(m.co_g_per_mile)},
                      {"hc_g_per_mile", opt(m.hc_g_per_mile)},
                      {"nox_g_per_mile", opt(m.nox_g_per_mile)},
                      {"energy_kj_per_mile", opt(m.energy_kj_per_mile)},
                      {"gap_rmse_m", opt(m.gap_rmse)}}}});
  }
  return {{"format", "acc-report-1"}, {"mode", to_string(r.mode)}, {"methods", rows}, {"provenance", r.provenance}};
}

std::string render_report(const Json& report) {
  const bool ev = report.value("mode", "ice") == "ev";
  const auto cols = ev ? std::span<const Column>(kEvColumns) : std::span<const Column>(kIceColumns);

  std::string out = std::string(ev ? "EV" : "ICE") + " trip metrics over the test set\n\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-22s", "Method");
  out += buf;
  for (const auto& c : cols) {
    std::snprintf(buf, sizeof buf, "%16s", c.title);
    out += buf;
  }
  out += "\n";

  const Json rows = report.value("methods", Json::array());
  for (Method m : kAllMethods) {
    const Json* row = nullptr;
    for (const auto& r : rows) {
      if (r.value("method", "") == key(m)) row = &r;
    }
    std::snprintf(buf, sizeof buf, "%-22s", label(m));
    out += buf;
    for (const auto& c : cols) {
      std::string cell = "-";
      if (row) {
        const Json& v = (*row)["metrics"].value(c.key, Json(nullptr));
        if (v.is_number()) {
          std::snprintf(buf, sizeof buf, "%.3f", v.get<double>());
          cell = buf;
        } else {
          cell = "N/A";
        }
      }
      std::snprintf(buf, sizeof buf, "%16s", cell.c_str());
      out += buf;
    }
    if (!row) out += "   (not run)";
    out += "\n";
  }

  if (report.contains("provenance")) {
    const Json& p = report["provenance"];
    out += "\nseed " + p.value("seed", Json(nullptr)).dump() + ", config " +
           p.value("config_digest", std::string("?")).substr(0, 12);
    if (p.contains("human_sessions") && p["human_sessions"].get<std::size_t>() > 0) {
      out += ", human sessions " + p["human_sessions"].dump();
    }
    out += "\n";
  }
  return out;
}

}  // namespace acc::cli
