#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "acc/net/qnetwork.hpp"

namespace acc::net {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected adaptive-moment step on a flat parameter block.
/// `step` is the 1-based step count after incrementing.
template <class T>
void adam_block(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::uint64_t step,
                double lr, const AdamHyper& h) {
  if (params.size() != grads.size() || params.size() != m.size() || params.size() != v.size()) {
    throw ShapeError("adam: parameter/gradient/moment sizes differ");
  }
  const double c1 = 1.0 - std::pow(h.beta1, double(step));
  const double c2 = 1.0 - std::pow(h.beta2, double(step));
  const T b1 = T(h.beta1), b2 = T(h.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const double mh = double(m[i]) / c1;
    const double vh = double(v[i]) / c2;
    params[i] -= T(lr * mh / (std::sqrt(vh) + h.epsilon));
  }
}

template <class T>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m_weight, v_weight, m_bias, v_bias;

  AdamState() = default;
  explicit AdamState(const QNetwork<T>& net, AdamHyper h = {}) : hyper(h) {
    for (const auto& l : net.layers()) {
      m_weight.emplace_back(l.weight.shape);
      v_weight.emplace_back(l.weight.shape);
      m_bias.emplace_back(l.bias.shape);
      v_bias.emplace_back(l.bias.shape);
    }
  }
};

template <class T>
void apply_update(QNetwork<T>& net, const GradBundle<T>& grads, AdamState<T>& opt, double lr) {
  auto& layers = net.layers();
  if (grads.weight.size() != layers.size() || opt.m_weight.size() != layers.size()) {
    throw ShapeError("apply_update: layer count mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!grads.weight[i].same_shape(layers[i].weight) || !grads.bias[i].same_shape(layers[i].bias)) {
      throw ShapeError("apply_update: gradient shape mismatch at layer " + layers[i].name);
    }
  }
  ++opt.step;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    adam_block<T>(layers[i].weight.values, grads.weight[i].values, opt.m_weight[i].values, opt.v_weight[i].values,
                  opt.step, lr, opt.hyper);
    adam_block<T>(layers[i].bias.values, grads.bias[i].values, opt.m_bias[i].values, opt.v_bias[i].values, opt.step,
                  lr, opt.hyper);
  }
}

}  // namespace acc::net
