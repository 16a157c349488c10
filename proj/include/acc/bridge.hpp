#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "acc/episode.hpp"
#include "acc/vision.hpp"

namespace acc::bridge {

// ---- wire format -----------------------------------------------------------
//
// Every datagram: "ACC1" | version u8 | type u8 | seq u32 | payload_len u16,
// then the payload. All multi-byte fields little-endian.

inline constexpr std::uint8_t kMagic[4] = {0x41, 0x43, 0x43, 0x31};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::size_t kMaxDatagram = 65507;  // IPv4 UDP payload limit

enum class MsgType : std::uint8_t { State = 1, Action = 2, Reset = 3, EpisodeEnd = 4, Ack = 5 };

struct FrameData {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, width * height

  bool operator==(const FrameData&) const = default;
};

struct StateMsg {
  std::uint32_t step = 0;
  double sim_time = 0.0;
  float host_speed = 0.0f;
  float lead_speed = 0.0f;
  float gap = 0.0f;
  std::optional<FrameData> frame;

  bool operator==(const StateMsg&) const = default;
};

enum class ActionMode : std::uint8_t { Index = 0, Force = 1 };

struct ActionMsg {
  std::uint32_t step = 0;
  ActionMode mode = ActionMode::Index;
  std::uint8_t index = 0;  // used when mode == Index
  float force = 0.0f;      // used when mode == Force

  static ActionMsg of_index(std::uint32_t step, std::uint8_t index) { return {step, ActionMode::Index, index, 0.0f}; }
  static ActionMsg of_force(std::uint32_t step, float force) { return {step, ActionMode::Force, 0, force}; }
  /// Normalized force this action commands.
  double commanded_force() const;

  bool operator==(const ActionMsg&) const = default;
};

/// Agent asks for a fresh episode.
struct ResetMsg {
  std::uint64_t seed = 0;
  bool operator==(const ResetMsg&) const = default;
};

enum class EndReason : std::uint8_t { Collision = 1, GapExceeded = 2, TimeLimit = 3, TransportFailure = 4 };

struct EpisodeEndMsg {
  std::uint32_t step = 0;
  EndReason reason = EndReason::TimeLimit;
  bool operator==(const EpisodeEndMsg&) const = default;
};

struct AckMsg {
  std::uint32_t acked_seq = 0;
  bool operator==(const AckMsg&) const = default;
};

using Body = std::variant<StateMsg, ActionMsg, ResetMsg, EpisodeEndMsg, AckMsg>;

struct Message {
  std::uint32_t seq = 0;
  Body body;

  MsgType type() const { return MsgType(body.index() + 1); }
  bool operator==(const Message&) const = default;
};

enum class DecodeError {
  TooShort,         // fewer bytes than a header
  BadMagic,
  BadVersion,
  UnknownType,
  LengthMismatch,   // payload_len disagrees with the bytes present
  Truncated,        // payload shorter than its type requires
  TrailingBytes,    // payload longer than its type requires
  BadFrameFlag,
  BadFrameSize,     // width * height disagrees with the pixel bytes
  BadActionMode,
  BadActionIndex,
  BadForce,
  BadEndReason,
};

const char* to_string(DecodeError e);

/// Throws ContractError for messages that violate their own invariants or do
/// not fit in one datagram.
std::vector<std::uint8_t> encode(const Message& msg);

/// Total: every byte string yields a message or a DecodeError.
std::variant<Message, DecodeError> decode(std::span<const std::uint8_t> bytes);

// ---- transport ---------------------------------------------------------------

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DatagramChannel {
 public:
  virtual ~DatagramChannel() = default;
  virtual void send(std::span<const std::uint8_t> datagram) = 0;
  /// Next datagram, or nullopt once `timeout` elapses with nothing received.
  virtual std::optional<std::vector<std::uint8_t>> receive(std::chrono::milliseconds timeout) = 0;
};

/// Connected-style UDP socket on IPv4.
class UdpChannel final : public DatagramChannel {
 public:
  /// Binds host:port; port 0 picks an ephemeral one.
  explicit UdpChannel(const std::string& host = "127.0.0.1", std::uint16_t port = 0);
  ~UdpChannel() override;
  UdpChannel(const UdpChannel&) = delete;
  UdpChannel& operator=(const UdpChannel&) = delete;

  std::uint16_t local_port() const;
  /// Without a peer, replies go to whoever sent the last datagram.
  void set_peer(const std::string& host, std::uint16_t port);

  void send(std::span<const std::uint8_t> datagram) override;
  std::optional<std::vector<std::uint8_t>> receive(std::chrono::milliseconds timeout) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Drops each outgoing datagram with probability `drop`, from a seeded stream.
class LossyChannel final : public DatagramChannel {
 public:
  LossyChannel(DatagramChannel& inner, double drop, std::uint64_t seed);
  void send(std::span<const std::uint8_t> datagram) override;
  std::optional<std::vector<std::uint8_t>> receive(std::chrono::milliseconds timeout) override;
  std::size_t dropped() const { return dropped_; }

 private:
  DatagramChannel& inner_;
  double drop_;
  Rng rng_;
  std::size_t dropped_ = 0;
};

// ---- lockstep session --------------------------------------------------------

struct SessionConfig {
  std::chrono::milliseconds action_timeout{100};
  std::uint32_t max_consecutive_timeouts = 50;
  double cockpit_hz = 20.0;
  bool send_frames = false;  // attach the preprocessed camera frame to STATE
  int vision_divisor = 1;

  void validate() const;
};

enum class SessionStatus { Completed, TransportFailure };

struct BridgedEpisode {
  EpisodeRecord record;
  SessionStatus session = SessionStatus::Completed;
  /// Per tick: the force taken from an accepted ACTION, or nullopt for a hold.
  std::vector<std::optional<double>> accepted;
  std::size_t holds = 0;
  std::size_t stale_discarded = 0;
  std::size_t malformed = 0;
};

StateMsg make_state(const WorldState& world, const std::optional<FrameData>& frame = std::nullopt);

/// Simulator side of the lockstep protocol. Each tick sends STATE(seq = step),
/// waits for an ACTION echoing that step, and holds the previous force on
/// timeout. Ends with EPISODE_END.
BridgedEpisode serve_episode(const WorldState& initial, const SpeedTrace& trace, const EpisodeSpec& spec,
                             const ActuatorMap& map, DatagramChannel& channel, const SessionConfig& cfg);

using Responder = std::function<ActionMsg(const StateMsg&)>;

struct AgentLoopStats {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::optional<EpisodeEndMsg> end;
};

/// Agent side: answers every STATE via `respond` until EPISODE_END arrives,
/// `idle` passes with no traffic, or `stop` is raised.
AgentLoopStats run_agent(DatagramChannel& channel, const Responder& respond, std::chrono::milliseconds idle,
                         const std::atomic<bool>* stop = nullptr);

/// Answers with the consensus controller's action index, reading the same
/// float32 measurements an in-process ConsensusPolicy would.
Responder consensus_responder(ConsensusGains gains = {}, ActuatorMap map = {});

}  // namespace acc::bridge
