#include "acc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace acc {

void ActuatorMap::validate() const {
  if (!(max_accel > 0.0) || !(max_decel_magnitude > 0.0)) {
    throw ContractError("actuator limits must be strictly positive");
  }
}

EpisodeSpec EpisodeSpec::ice() { return EpisodeSpec{}; }

EpisodeSpec EpisodeSpec::ev() {
  EpisodeSpec s;
  s.mode = PowertrainMode::Ev;
  s.lead_v0 = {11.2, 15.6};
  s.host_v0 = {11.0, 16.0};
  s.gap0 = {25.0, 35.0};
  return s;
}

void EpisodeSpec::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractError("episode.dt must be > 0");
  if (!lead_v0.valid() || !host_v0.valid() || !gap0.valid()) {
    throw ContractError("episode init range lower bound exceeds upper bound");
  }
  if (!(max_gap > gap0.hi)) throw ContractError("episode.max_gap must exceed every initial gap");
  if (lead_v0.lo < 0.0 || host_v0.lo < 0.0) throw ContractError("initial speeds must be >= 0");
  if (!(vehicle_length >= 0.0)) throw ContractError("episode.vehicle_length must be >= 0");
}

const char* to_string(TerminationStatus s) {
  switch (s) {
    case TerminationStatus::Running: return "running";
    case TerminationStatus::Collision: return "collision";
    case TerminationStatus::GapExceeded: return "gap_exceeded";
    case TerminationStatus::TimeLimit: return "time_limit";
  }
  return "unknown";
}

double force_to_accel(double force, const ActuatorMap& map) {
  if (!(std::abs(force) <= 1.0)) {
    throw ContractError("normalized force outside [-1, 1]: " + std::to_string(force));
  }
  return force >= 0.0 ? force * map.max_accel : force * map.max_decel_magnitude;
}

double gap(const WorldState& world) {
  return world.lead.position - world.host.position - world.vehicle_length;
}

WorldState step(const WorldState& world, double host_accel, double lead_speed_next,
                const EpisodeSpec& spec) {
  if (!(spec.dt > 0.0)) throw ContractError("step: dt must be > 0");
  if (!std::isfinite(host_accel) || !std::isfinite(lead_speed_next)) {
    throw ContractError("step: non-finite input");
  }
  if (lead_speed_next < 0.0) throw ContractError("step: lead speed must be >= 0");

  const double dt = spec.dt;
  WorldState next = world;

  double v = world.host.speed + host_accel * dt;
  double applied = host_accel;
  if (v < 0.0) {
    v = 0.0;
    applied = -world.host.speed / dt;
  }
  next.host.speed = v;
  next.host.accel = applied;
  next.host.position = world.host.position + v * dt;

  next.lead.accel = (lead_speed_next - world.lead.speed) / dt;
  next.lead.speed = lead_speed_next;
  next.lead.position = world.lead.position + lead_speed_next * dt;

  next.step_index = world.step_index + 1;
  next.sim_time = static_cast<double>(next.step_index) * dt;
  return next;
}

TerminationStatus check_termination(const WorldState& world, const EpisodeSpec& spec) {
  const double g = gap(world);
  if (g <= 0.0) return TerminationStatus::Collision;
  if (g > spec.max_gap) return TerminationStatus::GapExceeded;
  if (world.step_index >= spec.max_steps) return TerminationStatus::TimeLimit;
  return TerminationStatus::Running;
}

WorldState reset(const EpisodeSpec& spec, Rng& rng) {
  spec.validate();
  WorldState w;
  w.vehicle_length = spec.vehicle_length;
  w.lead.speed = draw_uniform(rng, spec.lead_v0);
  w.host.speed = draw_uniform(rng, spec.host_v0);
  const double g0 = draw_uniform(rng, spec.gap0);
  w.host.position = 0.0;
  w.lead.position = g0 + spec.vehicle_length;
  return w;
}

}  // namespace acc
