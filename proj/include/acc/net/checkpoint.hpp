#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "acc/net/qnetwork.hpp"

namespace acc::net {

// Layout:
//   "QNET1"
//   u32 descriptor length n, then n x u32 topology fields
//   u32 layer count
//   per layer in declaration order: u32 count + f32[count] weights, u32 count + f32[count] bias
// All integers and floats little-endian.

inline constexpr std::array<char, 5> kCheckpointMagic = {'Q', 'N', 'E', 'T', '1'};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("checkpoint truncated");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

template <class T>
void put_block(std::ostream& out, const Tensor<T>& t) {
  put_u32(out, static_cast<std::uint32_t>(t.size()));
  for (T v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

template <class T>
void get_block(std::istream& in, Tensor<T>& t, const std::string& layer) {
  const std::uint32_t n = get_u32(in);
  if (n != t.size()) {
    throw CheckpointError("checkpoint layer " + layer + ": expected " + std::to_string(t.size()) +
                          " parameters, found " + std::to_string(n));
  }
  for (auto& v : t.values) v = static_cast<T>(std::bit_cast<float>(get_u32(in)));
}

}  // namespace detail

template <class T>
void save_checkpoint(std::ostream& out, const QNetwork<T>& net) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  const auto desc = net.topology().descriptor();
  detail::put_u32(out, static_cast<std::uint32_t>(desc.size()));
  for (auto d : desc) detail::put_u32(out, d);
  detail::put_u32(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    detail::put_block(out, l.weight);
    detail::put_block(out, l.bias);
  }
}

template <class T>
QNetwork<T> load_checkpoint(std::istream& in) {
  std::array<char, 5> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw CheckpointError("not a QNET1 checkpoint");
  }
  const std::uint32_t n = detail::get_u32(in);
  if (n > 64) throw CheckpointError("implausible topology descriptor length");
  std::vector<std::uint32_t> desc(n);
  for (auto& d : desc) d = detail::get_u32(in);
  QNetwork<T> net(Topology::from_descriptor(desc));
  if (detail::get_u32(in) != net.layers().size()) throw CheckpointError("checkpoint layer count mismatch");
  for (auto& l : net.layers()) {
    detail::get_block(in, l.weight, l.name);
    detail::get_block(in, l.bias, l.name);
  }
  return net;
}

template <class T>
void save_checkpoint_file(const std::string& path, const QNetwork<T>& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path);
  save_checkpoint(out, net);
}

template <class T>
QNetwork<T> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  return load_checkpoint<T>(in);
}

}  // namespace acc::net
