#include "acc/gateway.hpp"

#include <cmath>
#include <utility>

#include <json.hpp>

namespace acc::bridge {

void GatewayConfig::validate() const {
  if (!(frame_hz > 0.0) || !(control_timeout > 0.0)) throw ContractError("GatewayConfig: rates must be positive");
}

DriveSession::DriveSession(const WorldState& initial, SpeedTrace trace, EpisodeSpec spec, ActuatorMap map,
                           RewardConfig reward, GatewayConfig cfg)
    : world_(initial), trace_(std::move(trace)), spec_(spec), map_(map), reward_(reward), cfg_(std::move(cfg)) {
  cfg_.validate();
  reward_.validate();
  if (trace_.samples.size() < 2) throw ContractError("DriveSession: trace needs at least 2 samples");
  spec_.max_steps = std::min<std::uint64_t>(spec_.max_steps, trace_.samples.size() - 1);
  status_ = check_termination(world_, spec_);
}

bool DriveSession::on_text(std::string_view text) {
  auto reject = [&](const std::string& why) {
    ++ignored_;
    if (warn) warn("ignoring frame: " + why);
    return false;
  };
  const auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return reject("not a JSON object");
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string() || *type != "control") return reject("type is not \"control\"");
  const auto force = j.find("force");
  if (force == j.end() || !force->is_number()) return reject("missing numeric force");
  const double f = force->get<double>();
  if (!std::isfinite(f)) return reject("non-finite force");

  held_ = std::clamp(f, -1.0, 1.0);
  last_control_ = world_.sim_time + pending_;
  started_ = true;
  return true;
}

std::string DriveSession::on_connect() {
  connected_ = true;
  return state_frame();
}

void DriveSession::on_disconnect() { connected_ = false; }

double DriveSession::applied_force() const {
  if (!started_) return 0.0;
  return world_.sim_time + pending_ - last_control_ > cfg_.control_timeout ? 0.0 : held_;
}

void DriveSession::tick() {
  const double force = world_.sim_time - last_control_ > cfg_.control_timeout ? 0.0 : held_;
  const double accel = force_to_accel(force, map_);
  WorldState next = step(world_, accel, trace_.at(world_.step_index + 1), spec_);
  log_.push_back({world_.sim_time, world_.host.speed, next.host.accel, gap(world_), force});
  last_applied_ = force;
  world_ = next;
  status_ = check_termination(world_, spec_);
}

std::vector<std::string> DriveSession::advance(double wall_seconds) {
  std::vector<std::string> frames;
  if (!connected_ || !started_ || finished()) return frames;
  pending_ += std::max(wall_seconds, 0.0);
  auto emit_due = [&] {
    const auto idx = std::int64_t(std::floor(world_.sim_time * cfg_.frame_hz + 1e-9));
    if (idx > frames_sent_) {
      frames_sent_ = idx;
      frames.push_back(state_frame());
    }
  };
  emit_due();
  // Slack so wall slices that sum to whole ticks are not lost to roundoff.
  while (pending_ >= spec_.dt - 1e-9 && !finished()) {
    pending_ -= spec_.dt;
    tick();
    emit_due();
  }
  return frames;
}

Trajectory DriveSession::recording() const {
  Trajectory out = log_;
  out.push_back({world_.sim_time, world_.host.speed, 0.0, gap(world_), last_applied_});
  return out;
}

std::string DriveSession::state_frame() const {
  const double g = gap(world_);
  const double f = applied_force();
  nlohmann::json j = {{"type", "state"},    {"t", world_.sim_time}, {"vHost", world_.host.speed},
                      {"vLead", world_.lead.speed}, {"gap", g},     {"force", f},
                      {"reward", combined_reward(g, f, reward_)}};
  return j.dump();
}

}  // namespace acc::bridge
