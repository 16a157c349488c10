#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "acc/control.hpp"
#include "acc/energy.hpp"
#include "acc/sim.hpp"
#include "acc/trajectory.hpp"

namespace acc {

/// Anything that chooses a normalized force for the host each tick.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset() {}
  /// Force in [-1, 1] to apply over [t, t + dt).
  virtual double act(const WorldState& world) = 0;
};

class ConsensusPolicy final : public Controller {
 public:
  ConsensusPolicy(ConsensusGains gains, ActuatorMap map) : ctrl_(gains, map) {}
  double act(const WorldState& world) override { return ActionSpace::force(ctrl_.act(Measurement::of(world))); }

 private:
  ConsensusController ctrl_;
};

/// Replays a fixed per-tick force list; nullopt entries hold the previous force.
class ScriptedPolicy final : public Controller {
 public:
  explicit ScriptedPolicy(std::vector<std::optional<double>> script) : script_(std::move(script)) {}
  void reset() override {
    tick_ = 0;
    held_ = 0.0;
  }
  double act(const WorldState&) override {
    if (tick_ < script_.size() && script_[tick_]) held_ = *script_[tick_];
    ++tick_;
    return held_;
  }

 private:
  std::vector<std::optional<double>> script_;
  std::size_t tick_ = 0;
  double held_ = 0.0;
};

struct EpisodeRecord {
  Trajectory host;  // row k: state at t_k and the command applied over [t_k, t_k+1)
  std::vector<double> forces;
  TerminationStatus status = TerminationStatus::Running;
  WorldState final_world;
};

/// Drives `ctrl` against the lead `trace` starting from `initial`, for at most
/// trace.samples.size() - 1 ticks or until termination.
EpisodeRecord run_episode(const WorldState& initial, const SpeedTrace& trace, Controller& ctrl,
                          const EpisodeSpec& spec, const ActuatorMap& map);

/// The lead trace as a trajectory (no gap/force columns); a by forward difference.
Trajectory lead_trajectory(const SpeedTrace& trace, std::size_t ticks);

/// Episode start for evaluation trace `index`: host speed and gap from the
/// seeded reset, lead speed pinned to the trace's first sample.
WorldState eval_initial_state(const EpisodeSpec& spec, const SpeedTrace& trace, std::uint64_t seed,
                              std::size_t index);

}  // namespace acc
