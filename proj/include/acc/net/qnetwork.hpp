#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acc/net/layers.hpp"

namespace acc::net {

struct ConvSpec {
  std::uint32_t filters = 16;
  std::uint32_t kernel = 8;
  std::uint32_t stride = 4;
  bool operator==(const ConvSpec&) const = default;
};

/// Architecture of the two-branch Q-network. All sizes are configuration and
/// travel with checkpoints.
///
///   Vision:  image[history x H x W] -> conv1 -> relu -> conv2 -> relu -> dense -> relu
///   Feature: gaps[history]          -> dense -> relu
///   both:    speeds[history]        -> dense -> relu
///   head:    concat -> dense -> relu -> dense(outputs)
struct Topology {
  enum class Kind : std::uint32_t { Vision = 1, Feature = 2 };

  Kind kind = Kind::Feature;
  std::uint32_t history = 8;
  std::uint32_t image_height = 105;
  std::uint32_t image_width = 150;
  ConvSpec conv1{16, 8, 4};
  ConvSpec conv2{32, 4, 2};
  std::uint32_t image_dense = 256;
  std::uint32_t gap_dense = 32;
  std::uint32_t speed_dense = 32;
  std::uint32_t head_dense = 128;
  std::uint32_t outputs = 21;

  static Topology vision(std::uint32_t height, std::uint32_t width) {
    Topology t;
    t.kind = Kind::Vision;
    t.image_height = height;
    t.image_width = width;
    return t;
  }

  static Topology feature() {
    Topology t;
    t.kind = Kind::Feature;
    t.gap_dense = 32;
    t.speed_dense = 32;
    t.head_dense = 64;
    return t;
  }

  std::size_t primary_inputs() const {
    return kind == Kind::Vision ? std::size_t(history) * image_height * image_width : history;
  }

  std::vector<std::uint32_t> descriptor() const {
    return {static_cast<std::uint32_t>(kind), history, image_height, image_width, conv1.filters, conv1.kernel,
            conv1.stride, conv2.filters, conv2.kernel, conv2.stride, image_dense, gap_dense, speed_dense,
            head_dense, outputs};
  }

  static Topology from_descriptor(std::span<const std::uint32_t> d) {
    if (d.size() != 15) throw ShapeError("topology descriptor must have 15 fields");
    Topology t;
    if (d[0] != 1 && d[0] != 2) throw ShapeError("unknown topology kind " + std::to_string(d[0]));
    t.kind = static_cast<Kind>(d[0]);
    t.history = d[1];
    t.image_height = d[2];
    t.image_width = d[3];
    t.conv1 = {d[4], d[5], d[6]};
    t.conv2 = {d[7], d[8], d[9]};
    t.image_dense = d[10];
    t.gap_dense = d[11];
    t.speed_dense = d[12];
    t.head_dense = d[13];
    t.outputs = d[14];
    return t;
  }

  bool operator==(const Topology&) const = default;
};

/// Network inputs, already normalized by the caller.
template <class T>
struct NetInput {
  std::vector<T> primary;  // image [history x H x W] or gaps [history]
  std::vector<T> speeds;   // [history]
};

template <class T>
struct GradBundle {
  std::vector<Tensor<T>> weight;
  std::vector<Tensor<T>> bias;

  void zero() {
    for (auto& w : weight) std::fill(w.values.begin(), w.values.end(), T(0));
    for (auto& b : bias) std::fill(b.values.begin(), b.values.end(), T(0));
  }
  void scale(T s) {
    for (auto& w : weight) for (auto& v : w.values) v *= s;
    for (auto& b : bias) for (auto& v : b.values) v *= s;
  }
};

/// Activations recorded by forward_tape; required by backward.
template <class T>
struct Tape {
  bool valid = false;
  NetInput<T> input;
  std::vector<std::vector<T>> outputs;  // per layer, post-activation
  std::vector<T> merged;                // concat of branch outputs
};

template <class T>
class QNetwork {
 public:
  QNetwork() = default;

  explicit QNetwork(const Topology& topo) : topo_(topo) { build(); }

  template <class Rng>
  QNetwork(const Topology& topo, Rng& rng) : QNetwork(topo) {
    for (auto& l : layers_) l.init(rng);
  }

  const Topology& topology() const { return topo_; }
  std::vector<Layer<T>>& layers() { return layers_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  GradBundle<T> zero_grads() const {
    GradBundle<T> g;
    for (const auto& l : layers_) {
      g.weight.emplace_back(l.weight.shape);
      g.bias.emplace_back(l.bias.shape);
    }
    return g;
  }

  template <class U>
  QNetwork<U> cast() const {
    QNetwork<U> out;
    out.topo_ = topo_;
    for (const auto& l : layers_) out.layers_.push_back(l.template cast<U>());
    out.primary_layers_ = primary_layers_;
    return out;
  }

  bool operator==(const QNetwork& o) const {
    if (!(topo_ == o.topo_) || layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!(layers_[i].weight == o.layers_[i].weight) || !(layers_[i].bias == o.layers_[i].bias)) return false;
    }
    return true;
  }

  /// Layers [0, primary_layers) form the primary branch, then one speed layer,
  /// one hidden head layer, and the output layer.
  std::size_t primary_layers() const { return primary_layers_; }

 private:
  template <class U>
  friend class QNetwork;

  void build() {
    layers_.clear();
    const auto& t = topo_;
    if (t.history == 0 || t.outputs == 0) throw ShapeError("topology: history and outputs must be > 0");
    std::size_t primary_out = 0;
    if (t.kind == Topology::Kind::Vision) {
      auto c1 = Layer<T>::conv("conv1", t.history, t.image_height, t.image_width, t.conv1.filters, t.conv1.kernel,
                               t.conv1.stride, true);
      auto c2 = Layer<T>::conv("conv2", c1.filters, c1.out_h, c1.out_w, t.conv2.filters, t.conv2.kernel,
                               t.conv2.stride, true);
      auto fc = Layer<T>::dense("fc_image", c2.out, t.image_dense, true);
      layers_.push_back(std::move(c1));
      layers_.push_back(std::move(c2));
      layers_.push_back(std::move(fc));
      primary_out = t.image_dense;
      primary_layers_ = 3;
    } else {
      layers_.push_back(Layer<T>::dense("fc_gap", t.history, t.gap_dense, true));
      primary_out = t.gap_dense;
      primary_layers_ = 1;
    }
    layers_.push_back(Layer<T>::dense("fc_speed", t.history, t.speed_dense, true));
    layers_.push_back(Layer<T>::dense("fc_head", primary_out + t.speed_dense, t.head_dense, true));
    layers_.push_back(Layer<T>::dense("q_out", t.head_dense, t.outputs, false));
  }

  Topology topo_;
  std::vector<Layer<T>> layers_;
  std::size_t primary_layers_ = 0;
};

template <class T>
Tape<T> forward_tape(const QNetwork<T>& net, const NetInput<T>& in) {
  const auto& layers = net.layers();
  const std::size_t np = net.primary_layers();
  Tape<T> tape;
  tape.input = in;
  tape.outputs.resize(layers.size());
  const std::vector<T>* x = &in.primary;
  for (std::size_t i = 0; i < np; ++i) {
    layer_forward(layers[i], *x, tape.outputs[i]);
    x = &tape.outputs[i];
  }
  layer_forward(layers[np], in.speeds, tape.outputs[np]);
  tape.merged = tape.outputs[np - 1];
  tape.merged.insert(tape.merged.end(), tape.outputs[np].begin(), tape.outputs[np].end());
  layer_forward(layers[np + 1], tape.merged, tape.outputs[np + 1]);
  layer_forward(layers[np + 2], tape.outputs[np + 1], tape.outputs[np + 2]);
  tape.valid = true;
  return tape;
}

/// Q-values for one input. Pure.
template <class T>
std::vector<T> forward(const QNetwork<T>& net, const NetInput<T>& in) {
  return forward_tape(net, in).outputs.back();
}

/// Accumulates dL/dparams into `grads` given dL/dQ.
template <class T>
void backward_accumulate(const QNetwork<T>& net, const Tape<T>& tape, std::span<const T> dq, GradBundle<T>& grads) {
  if (!tape.valid) throw std::logic_error("backward called without a forward tape");
  const auto& layers = net.layers();
  const std::size_t np = net.primary_layers();
  if (dq.size() != layers.back().out) {
    throw ShapeError("layer q_out: dLoss/dQ has " + std::to_string(dq.size()) + " values, expected " +
                     std::to_string(layers.back().out));
  }
  std::vector<T> d_head, d_merged, d_tmp;
  layer_backward(layers[np + 2], tape.outputs[np + 1], tape.outputs[np + 2], std::vector<T>(dq.begin(), dq.end()),
                 grads.weight[np + 2], grads.bias[np + 2], &d_head);
  layer_backward(layers[np + 1], tape.merged, tape.outputs[np + 1], std::move(d_head), grads.weight[np + 1],
                 grads.bias[np + 1], &d_merged);

  const std::size_t primary_out = tape.outputs[np - 1].size();
  std::vector<T> d_speed(d_merged.begin() + std::ptrdiff_t(primary_out), d_merged.end());
  layer_backward(layers[np], tape.input.speeds, tape.outputs[np], std::move(d_speed), grads.weight[np],
                 grads.bias[np], static_cast<std::vector<T>*>(nullptr));

  std::vector<T> d(d_merged.begin(), d_merged.begin() + std::ptrdiff_t(primary_out));
  for (std::size_t i = np; i-- > 0;) {
    const std::vector<T>& x = i == 0 ? tape.input.primary : tape.outputs[i - 1];
    layer_backward(layers[i], x, tape.outputs[i], std::move(d), grads.weight[i], grads.bias[i],
                   i == 0 ? nullptr : &d_tmp);
    d = std::move(d_tmp);
    d_tmp.clear();
  }
}

template <class T>
GradBundle<T> backward(const QNetwork<T>& net, const Tape<T>& tape, std::span<const T> dq) {
  GradBundle<T> g = net.zero_grads();
  backward_accumulate(net, tape, dq, g);
  return g;
}

/// Independent deep copy for use as the target network.
template <class T>
QNetwork<T> clone_into_target(const QNetwork<T>& online) {
  return online;
}

}  // namespace acc::net
