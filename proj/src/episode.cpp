#include "acc/episode.hpp"

#include <algorithm>

namespace acc {

EpisodeRecord run_episode(const WorldState& initial, const SpeedTrace& trace, Controller& ctrl,
                          const EpisodeSpec& spec, const ActuatorMap& map) {
  if (trace.samples.size() < 2) throw ContractError("run_episode: trace needs at least 2 samples");
  EpisodeSpec s = spec;
  s.max_steps = std::min<std::uint64_t>(spec.max_steps, trace.samples.size() - 1);

  ctrl.reset();
  EpisodeRecord rec;
  WorldState w = initial;
  rec.status = check_termination(w, s);
  while (rec.status == TerminationStatus::Running) {
    const double force = std::clamp(ctrl.act(w), -1.0, 1.0);
    const double accel = force_to_accel(force, map);
    WorldState next = step(w, accel, trace.at(w.step_index + 1), s);
    rec.host.push_back({w.sim_time, w.host.speed, next.host.accel, gap(w), force});
    rec.forces.push_back(force);
    w = next;
    rec.status = check_termination(w, s);
  }
  // Closing row: final state, nothing applied afterwards.
  rec.host.push_back({w.sim_time, w.host.speed, 0.0, gap(w), rec.forces.empty() ? 0.0 : rec.forces.back()});
  rec.final_world = w;
  return rec;
}

Trajectory lead_trajectory(const SpeedTrace& trace, std::size_t ticks) {
  Trajectory out;
  const std::size_t n = std::min(ticks + 1, trace.samples.size());
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k + 1 < n ? (trace.samples[k + 1] - trace.samples[k]) / trace.dt : 0.0;
    out.push_back({double(k) * trace.dt, trace.samples[k], a, std::nullopt, std::nullopt});
  }
  return out;
}

WorldState eval_initial_state(const EpisodeSpec& spec, const SpeedTrace& trace, std::uint64_t seed,
                              std::size_t index) {
  std::seed_seq seq{seed, std::uint64_t(index), std::uint64_t(0xACC)};
  Rng rng(seq);
  WorldState w = reset(spec, rng);
  w.lead.speed = trace.samples.front();
  return w;
}

}  // namespace acc
