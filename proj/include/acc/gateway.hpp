#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "acc/agent.hpp"
#include "acc/energy.hpp"
#include "acc/sim.hpp"
#include "acc/trajectory.hpp"

namespace acc::bridge {

struct GatewayConfig {
  double frame_hz = 20.0;
  double control_timeout = 0.5;  // s without control before force drops to 0
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;

  void validate() const;
};

/// Human drive session behind the cockpit gateway, free of any I/O.
///
/// The simulation does not tick until the first control frame arrives and
/// pauses whenever the client disconnects. Time only moves through
/// advance(), so tests can drive it with synthetic clocks.
class DriveSession {
 public:
  DriveSession(const WorldState& initial, SpeedTrace trace, EpisodeSpec spec, ActuatorMap map,
               RewardConfig reward, GatewayConfig cfg);

  /// Parses one text frame. Malformed or unknown frames are ignored and
  /// reported through the warning sink; returns whether it was applied.
  bool on_text(std::string_view text);
  /// Returns the current state frame so a fresh client has something to draw.
  std::string on_connect();
  void on_disconnect();

  /// Runs the simulation forward by `wall_seconds` of real time and returns
  /// the state frames due in that span.
  std::vector<std::string> advance(double wall_seconds);

  bool started() const { return started_; }
  bool paused() const { return !connected_; }
  bool finished() const { return status_ != TerminationStatus::Running; }
  TerminationStatus status() const { return status_; }
  const WorldState& world() const { return world_; }
  /// Force the next tick will apply.
  double applied_force() const;
  double commanded_force() const { return held_; }
  /// Per-tick log in trajectory CSV layout plus a closing row for the current state.
  Trajectory recording() const;
  std::size_t ignored_frames() const { return ignored_; }

  std::function<void(const std::string&)> warn;

 private:
  std::string state_frame() const;
  void tick();

  WorldState world_;
  SpeedTrace trace_;
  EpisodeSpec spec_;
  ActuatorMap map_;
  RewardConfig reward_;
  GatewayConfig cfg_;

  bool connected_ = false;
  bool started_ = false;
  TerminationStatus status_ = TerminationStatus::Running;
  double held_ = 0.0;
  double pending_ = 0.0;       // started, unpaused wall time not yet consumed by ticks
  double last_control_ = 0.0;  // session clock (sim_time + pending_) at the latest control
  double last_applied_ = 0.0;
  std::int64_t frames_sent_ = -1;
  std::size_t ignored_ = 0;
  Trajectory log_;
};

/// Serves cockpit clients (one at a time) over a WebSocket on cfg.host:cfg.port
/// until the session finishes or `stop` is raised. Returns the recording.
/// `on_listen` receives the bound port, which matters when cfg.port is 0.
Trajectory serve_drive(DriveSession& session, const GatewayConfig& cfg,
                       const std::function<void(std::uint16_t)>& on_listen = {},
                       const std::atomic<bool>* stop = nullptr);

}  // namespace acc::bridge
