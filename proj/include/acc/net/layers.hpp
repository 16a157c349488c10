#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "acc/net/tensor.hpp"

namespace acc::net {

enum class LayerKind { Conv, Dense };

/// One parameterized layer, optionally followed by a ReLU.
///   Dense: weight [out x in], bias [out]
///   Conv:  weight [filters x channels x k x k], bias [filters], valid padding
template <class T>
struct Layer {
  LayerKind kind = LayerKind::Dense;
  std::string name;
  bool relu = true;

  // Dense
  std::size_t in = 0, out = 0;
  // Conv
  std::size_t channels = 0, in_h = 0, in_w = 0, filters = 0, kernel = 0, stride = 1, out_h = 0, out_w = 0;

  Tensor<T> weight;
  Tensor<T> bias;

  static Layer dense(std::string name, std::size_t in, std::size_t out, bool relu) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.name = std::move(name);
    l.relu = relu;
    l.in = in;
    l.out = out;
    l.weight = Tensor<T>({out, in});
    l.bias = Tensor<T>({out});
    return l;
  }

  static Layer conv(std::string name, std::size_t channels, std::size_t h, std::size_t w, std::size_t filters,
                    std::size_t kernel, std::size_t stride, bool relu) {
    if (h < kernel || w < kernel || stride == 0) {
      throw ShapeError("layer " + name + ": input " + std::to_string(h) + "x" + std::to_string(w) +
                       " too small for kernel " + std::to_string(kernel));
    }
    Layer l;
    l.kind = LayerKind::Conv;
    l.name = std::move(name);
    l.relu = relu;
    l.channels = channels;
    l.in_h = h;
    l.in_w = w;
    l.filters = filters;
    l.kernel = kernel;
    l.stride = stride;
    l.out_h = (h - kernel) / stride + 1;
    l.out_w = (w - kernel) / stride + 1;
    l.in = channels * h * w;
    l.out = filters * l.out_h * l.out_w;
    l.weight = Tensor<T>({filters, channels, kernel, kernel});
    l.bias = Tensor<T>({filters});
    return l;
  }

  std::size_t fan_in() const { return kind == LayerKind::Dense ? in : channels * kernel * kernel; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  template <class Rng>
  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(fan_in()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : weight.values) w = T(dist(rng));
    for (auto& b : bias.values) b = T(dist(rng));
  }

  template <class U>
  Layer<U> cast() const {
    Layer<U> l;
    l.kind = kind;
    l.name = name;
    l.relu = relu;
    l.in = in;
    l.out = out;
    l.channels = channels;
    l.in_h = in_h;
    l.in_w = in_w;
    l.filters = filters;
    l.kernel = kernel;
    l.stride = stride;
    l.out_h = out_h;
    l.out_w = out_w;
    l.weight = weight.template cast<U>();
    l.bias = bias.template cast<U>();
    return l;
  }
};

/// y = act(layer(x)); `y` is resized to layer.out.
template <class T>
void layer_forward(const Layer<T>& l, const std::vector<T>& x, std::vector<T>& y) {
  if (x.size() != l.in) {
    throw ShapeError("layer " + l.name + ": expected input of " + std::to_string(l.in) + " values, got " +
                     std::to_string(x.size()));
  }
  y.assign(l.out, T(0));
  const T* W = l.weight.data();
  if (l.kind == LayerKind::Dense) {
    for (std::size_t o = 0; o < l.out; ++o) {
      const T* row = W + o * l.in;
      T acc = l.bias[o];
      for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
  } else {
    const std::size_t k = l.kernel, s = l.stride;
    for (std::size_t f = 0; f < l.filters; ++f) {
      T* yf = y.data() + f * l.out_h * l.out_w;
      for (std::size_t i = 0; i < l.out_h * l.out_w; ++i) yf[i] = l.bias[f];
      for (std::size_t c = 0; c < l.channels; ++c) {
        const T* xc = x.data() + c * l.in_h * l.in_w;
        const T* wfc = W + (f * l.channels + c) * k * k;
        for (std::size_t oy = 0; oy < l.out_h; ++oy) {
          for (std::size_t ox = 0; ox < l.out_w; ++ox) {
            T acc = T(0);
            const T* patch = xc + (oy * s) * l.in_w + ox * s;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const T* prow = patch + ky * l.in_w;
              const T* wrow = wfc + ky * k;
              for (std::size_t kx = 0; kx < k; ++kx) acc += wrow[kx] * prow[kx];
            }
            yf[oy * l.out_w + ox] += acc;
          }
        }
      }
    }
  }
  if (l.relu) {
    for (auto& v : y) v = v > T(0) ? v : T(0);
  }
}

/// Accumulates dW, db for this layer and, when `dx` is non-null, writes dL/dx.
/// `y` is the layer's post-activation output from the forward pass.
template <class T>
void layer_backward(const Layer<T>& l, const std::vector<T>& x, const std::vector<T>& y, std::vector<T> dy,
                    Tensor<T>& dW, Tensor<T>& db, std::vector<T>* dx) {
  if (l.relu) {
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (!(y[i] > T(0))) dy[i] = T(0);
    }
  }
  if (dx) dx->assign(l.in, T(0));
  const T* W = l.weight.data();
  T* gW = dW.data();
  if (l.kind == LayerKind::Dense) {
    for (std::size_t o = 0; o < l.out; ++o) {
      const T g = dy[o];
      if (g == T(0)) continue;
      db[o] += g;
      T* grow = gW + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) grow[i] += g * x[i];
      if (dx) {
        const T* row = W + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) (*dx)[i] += g * row[i];
      }
    }
    return;
  }
  const std::size_t k = l.kernel, s = l.stride;
  for (std::size_t f = 0; f < l.filters; ++f) {
    const T* dyf = dy.data() + f * l.out_h * l.out_w;
    for (std::size_t i = 0; i < l.out_h * l.out_w; ++i) db[f] += dyf[i];
    for (std::size_t c = 0; c < l.channels; ++c) {
      const T* xc = x.data() + c * l.in_h * l.in_w;
      const T* wfc = W + (f * l.channels + c) * k * k;
      T* gfc = gW + (f * l.channels + c) * k * k;
      T* dxc = dx ? dx->data() + c * l.in_h * l.in_w : nullptr;
      for (std::size_t oy = 0; oy < l.out_h; ++oy) {
        for (std::size_t ox = 0; ox < l.out_w; ++ox) {
          const T g = dyf[oy * l.out_w + ox];
          if (g == T(0)) continue;
          const std::size_t base = (oy * s) * l.in_w + ox * s;
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::size_t idx = base + ky * l.in_w + kx;
              gfc[ky * k + kx] += g * xc[idx];
              if (dxc) dxc[idx] += g * wfc[ky * k + kx];
            }
          }
        }
      }
    }
  }
}

}  // namespace acc::net
