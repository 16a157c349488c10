#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "acc/control.hpp"
#include "acc/episode.hpp"
#include "acc/net/adam.hpp"
#include "acc/net/qnetwork.hpp"
#include "acc/sim.hpp"
#include "acc/trajectory.hpp"
#include "acc/vision.hpp"

namespace acc {

// ---------------------------------------------------------------- rewards

enum class RewardMode { Gap, GapForce };

const char* to_string(RewardMode m);

/// Piecewise-linear shaping anchors. Gap reward peaks at `desired_gap`, hits
/// zero at the band edges, and reaches -1 `outer_*` meters beyond them.
struct RewardConfig {
  RewardMode mode = RewardMode::Gap;
  double desired_gap = 55.0;
  double band_low = 30.0;
  double band_high = 80.0;
  double outer_low = 25.0;
  double outer_high = 25.0;
  double force_band = 0.3;

  void validate() const;
};

double gap_reward(double gap_m, const RewardConfig& cfg);
double force_reward(double force, const RewardConfig& cfg = {});
/// A non-positive gap is a collision and always scores -1.
double combined_reward(double gap_m, double force, const RewardConfig& cfg);

// ---------------------------------------------------------------- states

enum class StateMode { Feature, Vision };

const char* to_string(StateMode m);

/// Last 8 host speeds and gaps sampled at decision instants, oldest first.
struct FeatureState {
  std::array<float, kHistory> speeds{};
  std::array<float, kHistory> gaps{};
  bool filled = false;

  bool operator==(const FeatureState&) const = default;
};

/// FIFO push with first-observation bootstrap, like the frame stack.
FeatureState push(FeatureState s, double gap_m, double speed);

/// Network input scaling. Gaps enter as 7 successive differences (scaled so
/// 1 m/s of closing speed over a 0.2 s decision interval is ~1) and the
/// newest gap relative to 55 m.
net::NetInput<float> encode(const FeatureState& s);
net::NetInput<float> encode(const FrameStack& s);
float encode_speed(double v);

// ---------------------------------------------------------------- replay

template <class State>
struct Transition {
  State state;
  std::uint8_t action = 0;
  float reward = 0.0f;
  State next_state;
  bool done = false;
};

/// Fixed-capacity ring of transitions with uniform sampling.
template <class State>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("replay capacity must be > 0");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition<State> t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition<State>& operator[](std::size_t i) const { return data_[i]; }

  /// `n` indices drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (data_.empty()) throw ContractError("sampling from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (const auto& t : data_) fn(t);
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition<State>> data_;
};

// ---------------------------------------------------------------- action selection

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const float> q);

/// Epsilon-greedy over `q`.
std::size_t select_action(std::span<const float> q, double epsilon, Rng& rng);

template <class State>
std::size_t select_action(const net::QNetwork<float>& net, const State& s, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractError("epsilon must be in [0, 1]");
  std::bernoulli_distribution explore(epsilon);
  if (explore(rng)) {
    std::uniform_int_distribution<std::size_t> any(0, kNumActions - 1);
    return any(rng);
  }
  const auto q = net::forward(net, encode(s));
  return argmax(q);
}

// ---------------------------------------------------------------- double-Q targets

/// y = r + gamma * (1 - done) * Q_target(s', argmax_a Q_online(s', a)).
/// `q_online`/`q_target` map a next-state to its action values.
template <class State, class QOnline, class QTarget>
std::vector<double> double_q_targets(std::span<const Transition<State>* const> batch, QOnline&& q_online,
                                     QTarget&& q_target, double gamma) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Transition<State>* t : batch) {
    double target = t->reward;
    if (!t->done && gamma != 0.0) {
      const auto qo = q_online(t->next_state);
      const auto qt = q_target(t->next_state);
      const std::size_t a = argmax(std::span<const float>(qo.data(), qo.size()));
      target += gamma * double(qt[a]);
    }
    y.push_back(target);
  }
  return y;
}

template <class State>
std::vector<double> ddqn_targets(std::span<const Transition<State>* const> batch, const net::QNetwork<float>& online,
                                 const net::QNetwork<float>& target, double gamma) {
  return double_q_targets<State>(
      batch, [&](const State& s) { return net::forward(online, encode(s)); },
      [&](const State& s) { return net::forward(target, encode(s)); }, gamma);
}

// ---------------------------------------------------------------- training

struct TrainConfig {
  double discount = 0.99;
  std::size_t batch = 32;
  std::uint64_t target_sync = 1000;  // learner updates between target copies
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::uint64_t eps_decay_steps = 50000;
  double learning_rate = 1e-4;
  std::size_t replay_capacity = 50000;
  std::size_t warmup = 1000;  // transitions collected before learning starts
  std::uint64_t seed = 1;
  std::size_t episodes = 300;
  std::uint64_t max_episode_ticks = 3000;
  std::uint32_t action_repeat = 1;  // ticks each chosen action is held
  double huber_delta = 1.0;
  std::size_t curve_window = 100;
  std::size_t checkpoint_every = 100;  // episodes; 0 = final only

  void validate() const;
  double epsilon(std::uint64_t decision) const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Huber(delta) derivative.
inline double huber_grad(double err, double delta) { return std::clamp(err, -delta, delta); }
inline double huber_loss(double err, double delta) {
  const double a = std::abs(err);
  return a <= delta ? 0.5 * err * err : delta * (a - 0.5 * delta);
}

/// Online/target pair plus optimizer: one update = one sampled minibatch.
template <class State>
class Learner {
 public:
  Learner(net::QNetwork<float> online, const TrainConfig& cfg)
      : online_(std::move(online)), target_(net::clone_into_target(online_)), opt_(online_), cfg_(cfg) {}

  /// Samples a batch, takes one optimizer step on the Huber loss of the
  /// chosen actions, and refreshes the target every `target_sync` updates.
  double train_step(const ReplayBuffer<State>& buffer, Rng& rng) {
    const auto idx = buffer.sample_indices(cfg_.batch, rng);
    std::vector<const Transition<State>*> batch;
    for (auto i : idx) batch.push_back(&buffer[i]);
    const auto y = ddqn_targets<State>(std::span<const Transition<State>* const>(batch), online_, target_,
                                       cfg_.discount);

    auto grads = online_.zero_grads();
    double loss = 0.0;
    std::vector<float> dq(kNumActions);
    const double inv = 1.0 / double(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto tape = net::forward_tape(online_, encode(batch[b]->state));
      const std::size_t a = batch[b]->action;
      const double err = double(tape.outputs.back()[a]) - y[b];
      loss += huber_loss(err, cfg_.huber_delta) * inv;
      std::fill(dq.begin(), dq.end(), 0.0f);
      dq[a] = float(huber_grad(err, cfg_.huber_delta) * inv);
      net::backward_accumulate(online_, tape, std::span<const float>(dq), grads);
    }
    if (!std::isfinite(loss)) throw TrainingError("non-finite loss at update " + std::to_string(updates_));
    net::apply_update(online_, grads, opt_, cfg_.learning_rate);
    ++updates_;
    if (cfg_.target_sync > 0 && updates_ % cfg_.target_sync == 0) target_ = net::clone_into_target(online_);
    return loss;
  }

  const net::QNetwork<float>& online() const { return online_; }
  const net::QNetwork<float>& target() const { return target_; }
  std::uint64_t updates() const { return updates_; }

 private:
  net::QNetwork<float> online_;
  net::QNetwork<float> target_;
  net::AdamState<float> opt_;
  TrainConfig cfg_;
  std::uint64_t updates_ = 0;
};

// ---------------------------------------------------------------- environment

struct EnvConfig {
  EpisodeSpec episode = EpisodeSpec::ice();
  ActuatorMap actuator;
  RewardConfig reward;
  StateMode state = StateMode::Feature;
  int vision_divisor = 4;
  std::uint32_t action_repeat = 1;
  std::vector<SpeedTrace> ev_pool;  // lead traces for EV mode
};

struct StepInfo {
  double reward = 0.0;
  bool terminal = false;   // collision or gap exceeded
  bool truncated = false;  // tick budget exhausted
  TerminationStatus status = TerminationStatus::Running;
  double gap = 0.0;
};

/// Gym-style wrapper over the simulator: lead trace, observation history, and
/// reward. `step` holds the chosen force for `action_repeat` ticks and scores
/// the gap reached at the end together with that force.
class AccEnv {
 public:
  explicit AccEnv(EnvConfig cfg);

  /// New episode with a freshly drawn lead trace and initial condition.
  void reset(Rng& rng);
  /// New episode on a given trace/start.
  void reset_to(const WorldState& start, SpeedTrace lead);

  StepInfo step(std::size_t action);

  const WorldState& world() const { return world_; }
  const FeatureState& feature_state() const { return features_; }
  const FrameStack& frame_stack() const { return frames_; }
  const EnvConfig& config() const { return cfg_; }
  const SpeedTrace& lead_trace() const { return lead_; }

 private:
  void observe();

  EnvConfig cfg_;
  CameraModel camera_;
  SpeedTrace lead_;
  WorldState world_;
  FeatureState features_;
  FrameStack frames_;
};

/// Greedy Q-network driver for evaluation; decides every `action_repeat` ticks.
class AgentPolicy final : public Controller {
 public:
  AgentPolicy(net::QNetwork<float> net, StateMode mode, std::uint32_t action_repeat, int vision_divisor = 4);

  void reset() override;
  double act(const WorldState& world) override;

 private:
  net::QNetwork<float> net_;
  StateMode mode_;
  std::uint32_t repeat_;
  CameraModel camera_;
  FeatureState features_;
  FrameStack frames_;
  std::uint64_t tick_ = 0;
  double held_ = 0.0;
};

struct CurveRow {
  std::size_t episode = 0;
  std::uint64_t steps = 0;  // decisions in the episode
  double mean_reward = 0.0;
};

struct TrainResult {
  net::QNetwork<float> network;
  std::vector<CurveRow> curve;
  std::vector<double> moving_average;
  std::uint64_t decisions = 0;
  std::uint64_t updates = 0;
  std::vector<std::string> checkpoints;
};

/// Called after each finished episode (for progress logging).
using EpisodeHook = std::function<void(const CurveRow&)>;

/// Full DDQN loop. Writes `reward_curve.csv`, `reward_curve_ma.csv` and
/// checkpoints under `out_dir` when it is non-empty.
TrainResult run_training(const EnvConfig& env_cfg, const TrainConfig& cfg, const std::string& out_dir = {},
                         const EpisodeHook& hook = {});

std::vector<double> moving_average(const std::vector<CurveRow>& curve, std::size_t window);

void write_curve(std::ostream& out, const std::vector<CurveRow>& curve);

}  // namespace acc
