#include "acc/agent.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "acc/net/checkpoint.hpp"

namespace acc {

const char* to_string(RewardMode m) { return m == RewardMode::Gap ? "gap" : "force"; }
const char* to_string(StateMode m) { return m == StateMode::Feature ? "feature" : "vision"; }

void RewardConfig::validate() const {
  if (!(band_low < desired_gap && desired_gap < band_high)) {
    throw ContractError("reward bands must satisfy band_low < desired_gap < band_high");
  }
  if (!(outer_low > 0.0) || !(outer_high > 0.0)) throw ContractError("reward outer widths must be > 0");
  if (!(force_band >= 0.0 && force_band < 1.0)) throw ContractError("reward force band must be in [0, 1)");
}

double gap_reward(double g, const RewardConfig& cfg) {
  if (!std::isfinite(g)) throw ContractError("gap_reward: non-finite gap");
  double r = 0.0;
  if (g >= cfg.desired_gap) {
    r = g <= cfg.band_high ? (cfg.band_high - g) / (cfg.band_high - cfg.desired_gap)
                           : -(g - cfg.band_high) / cfg.outer_high;
  } else {
    r = g >= cfg.band_low ? (g - cfg.band_low) / (cfg.desired_gap - cfg.band_low)
                          : -(cfg.band_low - g) / cfg.outer_low;
  }
  return std::clamp(r, -1.0, 1.0);
}

double force_reward(double f, const RewardConfig& cfg) {
  const double a = std::abs(f);
  if (!(a <= 1.0)) throw ContractError("force_reward: |force| must be <= 1");
  if (a <= cfg.force_band) return 1.0;
  return std::clamp(1.0 - 2.0 * (a - cfg.force_band) / (1.0 - cfg.force_band), -1.0, 1.0);
}

double combined_reward(double g, double f, const RewardConfig& cfg) {
  if (g <= 0.0) return -1.0;
  const double rg = gap_reward(g, cfg);
  if (cfg.mode == RewardMode::Gap) return rg;
  return 0.5 * (rg + force_reward(f, cfg));
}

FeatureState push(FeatureState s, double gap_m, double speed) {
  if (!std::isfinite(gap_m) || !std::isfinite(speed)) throw ContractError("push: non-finite observation");
  if (!s.filled) {
    s.gaps.fill(float(gap_m));
    s.speeds.fill(float(speed));
    s.filled = true;
    return s;
  }
  std::shift_left(s.gaps.begin(), s.gaps.end(), 1);
  std::shift_left(s.speeds.begin(), s.speeds.end(), 1);
  s.gaps.back() = float(gap_m);
  s.speeds.back() = float(speed);
  return s;
}

float encode_speed(double v) { return float((v - 25.0) / 10.0); }

namespace {
constexpr float kGapDiffScale = 5.0f;
constexpr float kGapCenter = 55.0f;
constexpr float kGapScale = 25.0f;
}  // namespace

net::NetInput<float> encode(const FeatureState& s) {
  net::NetInput<float> in;
  in.primary.resize(kHistory);
  for (std::size_t i = 0; i + 1 < kHistory; ++i) in.primary[i] = (s.gaps[i + 1] - s.gaps[i]) * kGapDiffScale;
  in.primary[kHistory - 1] = (s.gaps.back() - kGapCenter) / kGapScale;
  in.speeds.resize(kHistory);
  for (std::size_t i = 0; i < kHistory; ++i) in.speeds[i] = encode_speed(s.speeds[i]);
  return in;
}

net::NetInput<float> encode(const FrameStack& s) {
  net::NetInput<float> in;
  if (s.frames.size() != kHistory) throw ContractError("encode: frame stack must hold 8 frames");
  const std::size_t per = s.frames.front().pixels.size();
  in.primary.resize(per * kHistory);
  for (std::size_t f = 0; f < kHistory; ++f) {
    const auto& px = s.frames[f].pixels;
    for (std::size_t i = 0; i < per; ++i) in.primary[f * per + i] = float(px[i]) * (1.0f / 255.0f);
  }
  in.speeds.resize(kHistory);
  for (std::size_t i = 0; i < kHistory; ++i) in.speeds[i] = encode_speed(s.speeds[i]);
  return in;
}

std::size_t argmax(std::span<const float> q) {
  if (q.empty()) throw ContractError("argmax of empty span");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

std::size_t select_action(std::span<const float> q, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractError("epsilon must be in [0, 1]");
  std::bernoulli_distribution explore(epsilon);
  if (explore(rng)) {
    std::uniform_int_distribution<std::size_t> any(0, q.size() - 1);
    return any(rng);
  }
  return argmax(q);
}

void TrainConfig::validate() const {
  if (!(discount > 0.0 && discount < 1.0)) throw ContractError("train.discount must be in (0, 1)");
  if (batch == 0) throw ContractError("train.batch must be > 0");
  if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0)) {
    throw ContractError("train epsilon schedule must stay in [0, 1]");
  }
  if (!(learning_rate > 0.0)) throw ContractError("train.learning_rate must be > 0");
  if (replay_capacity < batch) throw ContractError("train.replay_capacity must be >= batch");
  if (action_repeat == 0) throw ContractError("train.action_repeat must be >= 1");
  if (max_episode_ticks == 0 || episodes == 0) throw ContractError("train episode budget must be > 0");
  if (!(huber_delta > 0.0)) throw ContractError("train.huber_delta must be > 0");
}

double TrainConfig::epsilon(std::uint64_t decision) const {
  if (eps_decay_steps == 0 || decision >= eps_decay_steps) return eps_end;
  const double frac = double(decision) / double(eps_decay_steps);
  return eps_start + frac * (eps_end - eps_start);
}

// ---------------------------------------------------------------- AccEnv

AccEnv::AccEnv(EnvConfig cfg) : cfg_(std::move(cfg)), camera_(CameraModel::with_divisor(cfg_.vision_divisor)) {
  cfg_.episode.validate();
  cfg_.actuator.validate();
  cfg_.reward.validate();
  if (cfg_.action_repeat == 0) throw ContractError("action_repeat must be >= 1");
  if (cfg_.episode.mode == PowertrainMode::Ev && cfg_.ev_pool.empty()) {
    throw ContractError("EV mode needs at least one lead trace in the pool");
  }
}

void AccEnv::reset(Rng& rng) {
  WorldState start = acc::reset(cfg_.episode, rng);
  const std::uint64_t ticks = cfg_.episode.max_steps;
  SpeedTrace lead;
  if (cfg_.episode.mode == PowertrainMode::Ice) {
    const auto spec = sample_spec(rng);
    lead = generate_trace(spec, double(ticks) * cfg_.episode.dt, cfg_.episode.dt, TraceLimits::ice().accel);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, cfg_.ev_pool.size() - 1);
    const SpeedTrace& src = cfg_.ev_pool[pick(rng)];
    std::size_t offset = 0;
    if (src.samples.size() > ticks + 1) {
      std::uniform_int_distribution<std::size_t> off(0, src.samples.size() - ticks - 1);
      offset = off(rng);
    }
    lead.dt = src.dt;
    lead.source = src.source;
    lead.samples.assign(src.samples.begin() + std::ptrdiff_t(offset), src.samples.end());
  }
  start.lead.speed = lead.samples.front();
  reset_to(start, std::move(lead));
}

void AccEnv::reset_to(const WorldState& start, SpeedTrace lead) {
  world_ = start;
  lead_ = std::move(lead);
  features_ = {};
  frames_ = {};
  observe();
}

void AccEnv::observe() {
  const double g = gap(world_);
  if (cfg_.state == StateMode::Feature) {
    features_ = push(features_, g, world_.host.speed);
  } else if (g > 0.0) {
    frames_ = push(std::move(frames_), preprocess(render(world_, camera_), camera_.geometry), world_.host.speed);
  }
}

StepInfo AccEnv::step(std::size_t action) {
  if (action >= kNumActions) throw ContractError("action index out of range");
  const double force = ActionSpace::force(action);
  const double accel = force_to_accel(force, cfg_.actuator);
  StepInfo info;
  for (std::uint32_t k = 0; k < cfg_.action_repeat; ++k) {
    world_ = acc::step(world_, accel, lead_.at(world_.step_index + 1), cfg_.episode);
    info.status = check_termination(world_, cfg_.episode);
    if (info.status != TerminationStatus::Running) break;
  }
  info.gap = gap(world_);
  info.reward = combined_reward(info.gap, force, cfg_.reward);
  info.terminal = info.status == TerminationStatus::Collision || info.status == TerminationStatus::GapExceeded;
  info.truncated = info.status == TerminationStatus::TimeLimit;
  observe();
  return info;
}

// ---------------------------------------------------------------- AgentPolicy

AgentPolicy::AgentPolicy(net::QNetwork<float> net, StateMode mode, std::uint32_t action_repeat, int vision_divisor)
    : net_(std::move(net)),
      mode_(mode),
      repeat_(std::max<std::uint32_t>(action_repeat, 1)),
      camera_(CameraModel::with_divisor(vision_divisor)) {}

void AgentPolicy::reset() {
  features_ = {};
  frames_ = {};
  tick_ = 0;
  held_ = 0.0;
}

double AgentPolicy::act(const WorldState& world) {
  if (tick_ % repeat_ == 0) {
    std::size_t a = 0;
    if (mode_ == StateMode::Feature) {
      features_ = push(features_, gap(world), world.host.speed);
      a = argmax(net::forward(net_, encode(features_)));
    } else {
      frames_ = push(std::move(frames_), preprocess(render(world, camera_), camera_.geometry), world.host.speed);
      a = argmax(net::forward(net_, encode(frames_)));
    }
    held_ = ActionSpace::force(a);
  }
  ++tick_;
  return held_;
}

// ---------------------------------------------------------------- training loop

std::vector<double> moving_average(const std::vector<CurveRow>& curve, std::size_t window) {
  std::vector<double> out;
  double sum = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    sum += curve[i].mean_reward;
    if (window > 0 && i >= window) sum -= curve[i - window].mean_reward;
    const std::size_t n = window > 0 ? std::min(i + 1, window) : i + 1;
    out.push_back(sum / double(n));
  }
  return out;
}

void write_curve(std::ostream& out, const std::vector<CurveRow>& curve) {
  out << "episode,steps,mean_reward\n";
  char buf[96];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.17g\n", r.episode, static_cast<unsigned long long>(r.steps),
                  r.mean_reward);
    out << buf;
  }
}

namespace {

Rng stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{seed, id};
  return Rng(seq);
}

template <class State, class Current>
TrainResult train_impl(AccEnv& env, const TrainConfig& cfg, const net::Topology& topo, Current&& current,
                       const std::string& out_dir, const EpisodeHook& hook) {
  Rng env_rng = stream(cfg.seed, 1);
  Rng act_rng = stream(cfg.seed, 2);
  Rng sample_rng = stream(cfg.seed, 3);
  Rng init_rng = stream(cfg.seed, 4);

  Learner<State> learner(net::QNetwork<float>(topo, init_rng), cfg);
  ReplayBuffer<State> buffer(cfg.replay_capacity);
  TrainResult result;
  const std::size_t learn_after = std::max(cfg.batch, cfg.warmup);

  auto checkpoint = [&](const std::string& name) {
    if (out_dir.empty()) return;
    const auto path = (std::filesystem::path(out_dir) / name).string();
    net::save_checkpoint_file(path, learner.online());
    result.checkpoints.push_back(path);
  };

  for (std::size_t ep = 1; ep <= cfg.episodes; ++ep) {
    env.reset(env_rng);
    State state = current(env);
    double sum = 0.0;
    std::uint64_t n = 0;
    for (;;) {
      const std::size_t a = select_action(learner.online(), state, cfg.epsilon(result.decisions), act_rng);
      const StepInfo info = env.step(a);
      State next = current(env);
      buffer.push({state, static_cast<std::uint8_t>(a), float(info.reward), next, info.terminal});
      sum += info.reward;
      ++n;
      ++result.decisions;
      if (buffer.size() >= learn_after) learner.train_step(buffer, sample_rng);
      state = std::move(next);
      if (info.terminal || info.truncated) break;
    }
    result.curve.push_back({ep, n, sum / double(n)});
    if (hook) hook(result.curve.back());
    if (cfg.checkpoint_every > 0 && ep % cfg.checkpoint_every == 0 && ep != cfg.episodes) {
      checkpoint("checkpoint_ep" + std::to_string(ep) + ".qnet");
    }
  }
  checkpoint("policy.qnet");
  result.network = learner.online();
  result.updates = learner.updates();
  result.moving_average = moving_average(result.curve, cfg.curve_window);

  if (!out_dir.empty()) {
    std::ofstream curve(std::filesystem::path(out_dir) / "reward_curve.csv");
    write_curve(curve, result.curve);
    std::ofstream ma(std::filesystem::path(out_dir) / "reward_curve_ma.csv");
    ma << "episode,moving_average\n";
    char buf[64];
    for (std::size_t i = 0; i < result.moving_average.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, result.moving_average[i]);
      ma << buf;
    }
  }
  return result;
}

}  // namespace

TrainResult run_training(const EnvConfig& env_cfg, const TrainConfig& cfg, const std::string& out_dir,
                         const EpisodeHook& hook) {
  cfg.validate();
  EnvConfig ec = env_cfg;
  ec.episode.max_steps = cfg.max_episode_ticks;
  ec.action_repeat = cfg.action_repeat;
  AccEnv env(std::move(ec));
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  if (env.config().state == StateMode::Feature) {
    return train_impl<FeatureState>(env, cfg, net::Topology::feature(),
                                    [](const AccEnv& e) { return e.feature_state(); }, out_dir, hook);
  }
  const auto geo = PipelineGeometry::with_divisor(env.config().vision_divisor);
  return train_impl<FrameStack>(env, cfg,
                                net::Topology::vision(std::uint32_t(geo.crop_height), std::uint32_t(geo.crop_width)),
                                [](const AccEnv& e) { return e.frame_stack(); }, out_dir, hook);
}

}  // namespace acc
