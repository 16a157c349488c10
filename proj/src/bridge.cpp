#include "acc/bridge.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>

namespace acc::bridge {
namespace {

class Writer {
 public:
  void u8(std::uint8_t x) { out_.push_back(x); }
  void u16(std::uint16_t x) { le(x, 2); }
  void u32(std::uint32_t x) { le(x, 4); }
  void u64(std::uint64_t x) { le(x, 8); }
  void f32(float x) { u32(std::bit_cast<std::uint32_t>(x)); }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  void le(std::uint64_t x, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(std::uint8_t(x >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t left() const { return b_.size() - pos_; }
  bool has(std::size_t n) const { return left() >= n; }
  std::uint8_t u8() { return b_[pos_++]; }
  std::uint16_t u16() { return std::uint16_t(le(2)); }
  std::uint32_t u32() { return std::uint32_t(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<std::uint8_t> take(std::size_t n) {
    std::vector<std::uint8_t> v(b_.begin() + pos_, b_.begin() + pos_ + n);
    pos_ += n;
    return v;
  }

 private:
  std::uint64_t le(int n) {
    std::uint64_t x = 0;
    for (int i = 0; i < n; ++i) x |= std::uint64_t(b_[pos_++]) << (8 * i);
    return x;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

bool force_ok(float f) { return std::isfinite(f) && std::abs(f) <= 1.0f; }

void write_body(Writer& w, const StateMsg& m) {
  w.u32(m.step);
  w.f64(m.sim_time);
  w.f32(m.host_speed);
  w.f32(m.lead_speed);
  w.f32(m.gap);
  w.u8(m.frame ? 1 : 0);
  if (m.frame) {
    if (m.frame->pixels.size() != std::size_t(m.frame->width) * m.frame->height) {
      throw ContractError("encode: frame pixel count does not match width*height");
    }
    w.u16(m.frame->width);
    w.u16(m.frame->height);
    w.bytes(m.frame->pixels);
  }
}

void write_body(Writer& w, const ActionMsg& m) {
  w.u32(m.step);
  w.u8(std::uint8_t(m.mode));
  if (m.mode == ActionMode::Index) {
    if (m.index >= kNumActions) throw ContractError("encode: action index out of range");
    w.u8(m.index);
  } else if (m.mode == ActionMode::Force) {
    if (!force_ok(m.force)) throw ContractError("encode: action force outside [-1, 1]");
    w.f32(m.force);
  } else {
    throw ContractError("encode: unknown action mode");
  }
}

void write_body(Writer& w, const ResetMsg& m) { w.u64(m.seed); }

void write_body(Writer& w, const EpisodeEndMsg& m) {
  w.u32(m.step);
  w.u8(std::uint8_t(m.reason));
}

void write_body(Writer& w, const AckMsg& m) { w.u32(m.acked_seq); }

using Decoded = std::variant<Message, DecodeError>;

template <class T>
std::variant<T, DecodeError> read_body(Reader& r);

template <>
std::variant<StateMsg, DecodeError> read_body<StateMsg>(Reader& r) {
  if (!r.has(25)) return DecodeError::Truncated;
  StateMsg m;
  m.step = r.u32();
  m.sim_time = r.f64();
  m.host_speed = r.f32();
  m.lead_speed = r.f32();
  m.gap = r.f32();
  const std::uint8_t flag = r.u8();
  if (flag > 1) return DecodeError::BadFrameFlag;
  if (flag == 1) {
    if (!r.has(4)) return DecodeError::Truncated;
    FrameData f;
    f.width = r.u16();
    f.height = r.u16();
    const std::size_t n = std::size_t(f.width) * f.height;
    if (r.left() != n) return DecodeError::BadFrameSize;
    f.pixels = r.take(n);
    m.frame = std::move(f);
  }
  return m;
}

template <>
std::variant<ActionMsg, DecodeError> read_body<ActionMsg>(Reader& r) {
  if (!r.has(5)) return DecodeError::Truncated;
  ActionMsg m;
  m.step = r.u32();
  const std::uint8_t mode = r.u8();
  if (mode == 0) {
    if (!r.has(1)) return DecodeError::Truncated;
    m.mode = ActionMode::Index;
    m.index = r.u8();
    if (m.index >= kNumActions) return DecodeError::BadActionIndex;
  } else if (mode == 1) {
    if (!r.has(4)) return DecodeError::Truncated;
    m.mode = ActionMode::Force;
    m.force = r.f32();
    if (!force_ok(m.force)) return DecodeError::BadForce;
  } else {
    return DecodeError::BadActionMode;
  }
  return m;
}

template <>
std::variant<ResetMsg, DecodeError> read_body<ResetMsg>(Reader& r) {
  if (!r.has(8)) return DecodeError::Truncated;
  return ResetMsg{r.u64()};
}

template <>
std::variant<EpisodeEndMsg, DecodeError> read_body<EpisodeEndMsg>(Reader& r) {
  if (!r.has(5)) return DecodeError::Truncated;
  EpisodeEndMsg m;
  m.step = r.u32();
  const std::uint8_t reason = r.u8();
  if (reason < 1 || reason > 4) return DecodeError::BadEndReason;
  m.reason = EndReason(reason);
  return m;
}

template <>
std::variant<AckMsg, DecodeError> read_body<AckMsg>(Reader& r) {
  if (!r.has(4)) return DecodeError::Truncated;
  return AckMsg{r.u32()};
}

template <class T>
Decoded finish(Reader& r, std::uint32_t seq) {
  auto body = read_body<T>(r);
  if (auto* e = std::get_if<DecodeError>(&body)) return *e;
  if (r.left() != 0) return DecodeError::TrailingBytes;
  return Message{seq, std::move(std::get<T>(body))};
}

EndReason end_reason(TerminationStatus s) {
  switch (s) {
    case TerminationStatus::Collision: return EndReason::Collision;
    case TerminationStatus::GapExceeded: return EndReason::GapExceeded;
    default: return EndReason::TimeLimit;
  }
}

}  // namespace

double ActionMsg::commanded_force() const {
  return mode == ActionMode::Index ? ActionSpace::force(index) : double(force);
}

const char* to_string(DecodeError e) {
  switch (e) {
    case DecodeError::TooShort: return "too_short";
    case DecodeError::BadMagic: return "bad_magic";
    case DecodeError::BadVersion: return "bad_version";
    case DecodeError::UnknownType: return "unknown_type";
    case DecodeError::LengthMismatch: return "length_mismatch";
    case DecodeError::Truncated: return "truncated";
    case DecodeError::TrailingBytes: return "trailing_bytes";
    case DecodeError::BadFrameFlag: return "bad_frame_flag";
    case DecodeError::BadFrameSize: return "bad_frame_size";
    case DecodeError::BadActionMode: return "bad_action_mode";
    case DecodeError::BadActionIndex: return "bad_action_index";
    case DecodeError::BadForce: return "bad_force";
    case DecodeError::BadEndReason: return "bad_end_reason";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode(const Message& msg) {
  Writer payload;
  std::visit([&](const auto& body) { write_body(payload, body); }, msg.body);
  const std::size_t n = payload.data().size();
  if (n > 0xFFFF || kHeaderSize + n > kMaxDatagram) throw ContractError("encode: message exceeds one datagram");

  Writer w;
  w.bytes(kMagic);
  w.u8(kVersion);
  w.u8(std::uint8_t(msg.type()));
  w.u32(msg.seq);
  w.u16(std::uint16_t(n));
  w.bytes(payload.data());
  return std::move(w.data());
}

std::variant<Message, DecodeError> decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) return DecodeError::TooShort;
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) return DecodeError::BadMagic;
  Reader r(bytes.subspan(4));
  if (r.u8() != kVersion) return DecodeError::BadVersion;
  const std::uint8_t type = r.u8();
  const std::uint32_t seq = r.u32();
  const std::uint16_t len = r.u16();
  if (type < 1 || type > 5) return DecodeError::UnknownType;
  if (r.left() != len) return DecodeError::LengthMismatch;

  switch (MsgType(type)) {
    case MsgType::State: return finish<StateMsg>(r, seq);
    case MsgType::Action: return finish<ActionMsg>(r, seq);
    case MsgType::Reset: return finish<ResetMsg>(r, seq);
    case MsgType::EpisodeEnd: return finish<EpisodeEndMsg>(r, seq);
    case MsgType::Ack: return finish<AckMsg>(r, seq);
  }
  return DecodeError::UnknownType;
}

// ---- UDP -------------------------------------------------------------------

struct UdpChannel::Impl {
  int fd = -1;
  sockaddr_in peer{};
  bool fixed_peer = false;
  bool have_peer = false;
};

namespace {

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw SessionError("bad IPv4 address: " + host);
  return a;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

UdpChannel::UdpChannel(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  impl_->fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (impl_->fd < 0) throw SessionError(errno_text("socket"));
  const sockaddr_in a = make_addr(host, port);
  if (::bind(impl_->fd, reinterpret_cast<const sockaddr*>(&a), sizeof a) != 0) {
    const std::string msg = errno_text("bind");
    ::close(impl_->fd);
    throw SessionError(msg);
  }
}

UdpChannel::~UdpChannel() {
  if (impl_ && impl_->fd >= 0) ::close(impl_->fd);
}

std::uint16_t UdpChannel::local_port() const {
  sockaddr_in a{};
  socklen_t len = sizeof a;
  if (::getsockname(impl_->fd, reinterpret_cast<sockaddr*>(&a), &len) != 0) throw SessionError(errno_text("getsockname"));
  return ntohs(a.sin_port);
}

void UdpChannel::set_peer(const std::string& host, std::uint16_t port) {
  impl_->peer = make_addr(host, port);
  impl_->fixed_peer = impl_->have_peer = true;
}

void UdpChannel::send(std::span<const std::uint8_t> datagram) {
  if (!impl_->have_peer) throw SessionError("send: no peer address known");
  const auto n = ::sendto(impl_->fd, datagram.data(), datagram.size(), 0,
                          reinterpret_cast<const sockaddr*>(&impl_->peer), sizeof impl_->peer);
  if (n < 0) throw SessionError(errno_text("sendto"));
}

std::optional<std::vector<std::uint8_t>> UdpChannel::receive(std::chrono::milliseconds timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    pollfd p{impl_->fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, int(std::max<std::int64_t>(left.count(), 0)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw SessionError(errno_text("poll"));
    }
    if (rc == 0) return std::nullopt;

    std::vector<std::uint8_t> buf(kMaxDatagram);
    sockaddr_in from{};
    socklen_t len = sizeof from;
    const auto n = ::recvfrom(impl_->fd, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n < 0) {
      // Loopback ICMP unreachable surfaces here when the peer is gone.
      if (errno == EINTR || errno == ECONNREFUSED) continue;
      throw SessionError(errno_text("recvfrom"));
    }
    if (!impl_->fixed_peer) {
      impl_->peer = from;
      impl_->have_peer = true;
    }
    buf.resize(std::size_t(n));
    return buf;
  }
}

LossyChannel::LossyChannel(DatagramChannel& inner, double drop, std::uint64_t seed)
    : inner_(inner), drop_(drop), rng_(seed) {
  if (!(drop >= 0.0 && drop <= 1.0)) throw ContractError("LossyChannel: drop probability outside [0, 1]");
}

void LossyChannel::send(std::span<const std::uint8_t> datagram) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng_) < drop_) {
    ++dropped_;
    return;
  }
  inner_.send(datagram);
}

std::optional<std::vector<std::uint8_t>> LossyChannel::receive(std::chrono::milliseconds timeout) {
  return inner_.receive(timeout);
}

// ---- sessions ----------------------------------------------------------------

void SessionConfig::validate() const {
  if (action_timeout.count() <= 0 || max_consecutive_timeouts == 0 || !(cockpit_hz > 0.0) || vision_divisor <= 0) {
    throw ContractError("SessionConfig: all fields must be positive");
  }
}

StateMsg make_state(const WorldState& world, const std::optional<FrameData>& frame) {
  const Measurement m = Measurement::of(world);
  return {std::uint32_t(world.step_index), world.sim_time, m.host_speed, m.lead_speed, m.gap, frame};
}

BridgedEpisode serve_episode(const WorldState& initial, const SpeedTrace& trace, const EpisodeSpec& spec,
                             const ActuatorMap& map, DatagramChannel& channel, const SessionConfig& cfg) {
  cfg.validate();
  if (trace.samples.size() < 2) throw ContractError("serve_episode: trace needs at least 2 samples");
  EpisodeSpec s = spec;
  s.max_steps = std::min<std::uint64_t>(spec.max_steps, trace.samples.size() - 1);

  std::optional<CameraModel> cam;
  if (cfg.send_frames) cam = CameraModel::with_divisor(cfg.vision_divisor);

  using clock = std::chrono::steady_clock;
  BridgedEpisode out;
  EpisodeRecord& rec = out.record;
  WorldState w = initial;
  double held = 0.0;
  std::uint32_t consecutive = 0;
  rec.status = check_termination(w, s);

  while (rec.status == TerminationStatus::Running) {
    std::optional<FrameData> frame;
    if (cam) {
      ProcFrame img = preprocess(render(w, *cam), cam->geometry);
      frame = FrameData{std::uint16_t(img.width), std::uint16_t(img.height), std::move(img.pixels)};
    }
    const auto step_no = std::uint32_t(w.step_index);
    channel.send(encode({step_no, make_state(w, frame)}));

    std::optional<double> accepted;
    const auto deadline = clock::now() + cfg.action_timeout;
    for (;;) {
      const auto now = clock::now();
      if (now >= deadline) break;
      // Rounded up so a sub-millisecond remainder still polls once.
      auto dgram = channel.receive(std::chrono::ceil<std::chrono::milliseconds>(deadline - now));
      if (!dgram) break;
      auto decoded = decode(*dgram);
      if (std::holds_alternative<DecodeError>(decoded)) {
        ++out.malformed;
        continue;
      }
      const auto* action = std::get_if<ActionMsg>(&std::get<Message>(decoded).body);
      if (!action) continue;
      if (action->step < step_no) {
        ++out.stale_discarded;
        continue;
      }
      if (action->step == step_no) {
        accepted = action->commanded_force();
        break;
      }
    }

    if (accepted) {
      held = *accepted;
      consecutive = 0;
    } else {
      ++out.holds;
      if (++consecutive >= cfg.max_consecutive_timeouts) {
        out.session = SessionStatus::TransportFailure;
        break;
      }
    }
    out.accepted.push_back(accepted);

    const double force = std::clamp(held, -1.0, 1.0);
    const double accel = force_to_accel(force, map);
    WorldState next = step(w, accel, trace.at(w.step_index + 1), s);
    rec.host.push_back({w.sim_time, w.host.speed, next.host.accel, gap(w), force});
    rec.forces.push_back(force);
    w = next;
    rec.status = check_termination(w, s);
  }

  rec.host.push_back({w.sim_time, w.host.speed, 0.0, gap(w), rec.forces.empty() ? 0.0 : rec.forces.back()});
  rec.final_world = w;

  const EndReason reason =
      out.session == SessionStatus::TransportFailure ? EndReason::TransportFailure : end_reason(rec.status);
  // The end marker is sent twice: a lone drop would otherwise leave the agent
  // waiting out its idle timeout.
  const auto end = encode({std::uint32_t(w.step_index), EpisodeEndMsg{std::uint32_t(w.step_index), reason}});
  channel.send(end);
  channel.send(end);
  return out;
}

AgentLoopStats run_agent(DatagramChannel& channel, const Responder& respond, std::chrono::milliseconds idle,
                         const std::atomic<bool>* stop) {
  AgentLoopStats stats;
  std::uint32_t seq = 0;
  const auto slice = std::min(idle, std::chrono::milliseconds(50));
  auto quiet = std::chrono::milliseconds(0);
  while (!(stop && stop->load())) {
    auto dgram = channel.receive(slice);
    if (!dgram) {
      quiet += slice;
      if (quiet >= idle) break;
      continue;
    }
    quiet = std::chrono::milliseconds(0);
    auto decoded = decode(*dgram);
    if (std::holds_alternative<DecodeError>(decoded)) continue;
    const Message& msg = std::get<Message>(decoded);
    if (const auto* end = std::get_if<EpisodeEndMsg>(&msg.body)) {
      stats.end = *end;
      break;
    }
    if (const auto* state = std::get_if<StateMsg>(&msg.body)) {
      ++stats.states;
      ActionMsg a = respond(*state);
      a.step = state->step;
      channel.send(encode({seq++, a}));
      ++stats.actions;
    }
  }
  return stats;
}

Responder consensus_responder(ConsensusGains gains, ActuatorMap map) {
  return [ctrl = ConsensusController(gains, map)](const StateMsg& s) {
    const Measurement m{s.host_speed, s.lead_speed, s.gap};
    return ActionMsg::of_index(s.step, std::uint8_t(ctrl.act(m)));
  };
}

}  // namespace acc::bridge
