// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "partsmine/kernels.hpp"

namespace partsmine::encoder {

constexpr double kLogProbFloor = 1e-12;

template <class T>
struct Mat {
  int rows = 0, cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, T(0)) {}
  std::span<T> row(int r) {
    return std::span<T>(v).subspan(static_cast<std::size_t>(r) * cols, cols);
  }
  std::span<const T> row(int r) const {
    return std::span<const T>(v).subspan(static_cast<std::size_t>(r) * cols, cols);
  }
};

// Gate rows ordered [input; forget; cell; output], each block `hidden` rows.
template <class T>
struct LstmLayer {
  int input_dim = 0, hidden_dim = 0;
  Mat<T> wx;  // 4H x In
  Mat<T> wh;  // 4H x H
  std::vector<T> b;  // 4H

  LstmLayer() = default;
  LstmLayer(int in, int hidden)
      : input_dim(in), hidden_dim(hidden), wx(4 * hidden, in),
        wh(4 * hidden, hidden), b(static_cast<std::size_t>(4) * hidden, T(0)) {}
};

// Two stacked layers; the second consumes the first layer's hidden states in
// reversed order. One classifier head is shared across steps.
template <class T>
struct StackedLstm {
  LstmLayer<T> l1, l2;
  int num_classes = 0;
  Mat<T> wc;          // C x H
  std::vector<T> bc;  // C

  static StackedLstm zeros(int input_dim, int hidden_dim, int num_classes) {
    StackedLstm net;
    net.l1 = LstmLayer<T>(input_dim, hidden_dim);
    net.l2 = LstmLayer<T>(hidden_dim, hidden_dim);
    net.num_classes = num_classes;
    net.wc = Mat<T>(num_classes, hidden_dim);
    net.bc.assign(num_classes, T(0));
    return net;
  }

  static StackedLstm randomized(int input_dim, int hidden_dim, int num_classes,
                                std::mt19937_64& rng, double scale = 0.1) {
    StackedLstm net = zeros(input_dim, hidden_dim, num_classes);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto* m : {&net.l1.wx.v, &net.l1.wh.v, &net.l2.wx.v, &net.l2.wh.v, &net.wc.v})
      for (T& x : *m) x = static_cast<T>(u(rng));
    // forget-gate bias at 1 eases gradient flow early in training
    for (int r = hidden_dim; r < 2 * hidden_dim; ++r) {
      net.l1.b[r] = T(1);
      net.l2.b[r] = T(1);
    }
    return net;
  }
};

template <class T>
struct LayerTrace {
  std::vector<std::vector<T>> x, gi, gf, gg, go, c, tc, h;
};

template <class T>
struct ForwardTrace {
  LayerTrace<T> l1, l2;
  std::vector<std::vector<T>> logits;  // per output step t (input order)
  std::vector<std::vector<T>> probs;
};

namespace detail {

template <class T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
void layer_forward(const LstmLayer<T>& layer,
                   const std::vector<std::vector<T>>& inputs, LayerTrace<T>& tr) {
  const int H = layer.hidden_dim;
  const int steps = static_cast<int>(inputs.size());
  tr.x = inputs;
  tr.gi.assign(steps, {});
  tr.gf.assign(steps, {});
  tr.gg.assign(steps, {});
  tr.go.assign(steps, {});
  tr.c.assign(steps, {});
  tr.tc.assign(steps, {});
  tr.h.assign(steps, {});

  std::vector<T> h_prev(H, T(0)), c_prev(H, T(0)), z(4 * H);
  for (int t = 0; t < steps; ++t) {
    const std::span<const T> x(inputs[t]);
    if (static_cast<int>(x.size()) != layer.input_dim)
      throw std::invalid_argument("lstm_forward: input dim mismatch");
    for (int r = 0; r < 4 * H; ++r)
      z[r] = layer.b[r] + kern::dot(layer.wx.row(r), x) +
             kern::dot(layer.wh.row(r), std::span<const T>(h_prev));
    auto& gi = tr.gi[t];
    auto& gf = tr.gf[t];
    auto& gg = tr.gg[t];
    auto& go = tr.go[t];
    gi.resize(H);
    gf.resize(H);
    gg.resize(H);
    go.resize(H);
    auto& c = tr.c[t];
    auto& tc = tr.tc[t];
    auto& h = tr.h[t];
    c.resize(H);
    tc.resize(H);
    h.resize(H);
    for (int j = 0; j < H; ++j) {
      gi[j] = sigmoid(z[j]);
      gf[j] = sigmoid(z[H + j]);
      gg[j] = std::tanh(z[2 * H + j]);
      go[j] = sigmoid(z[3 * H + j]);
      c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
      tc[j] = std::tanh(c[j]);
      h[j] = go[j] * tc[j];
    }
    h_prev = h;
    c_prev = c;
  }
}

template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  T hi = logits[0];
  for (T v : logits) hi = std::max(hi, v);
  std::vector<T> p(logits.size());
  T z = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - hi);
    z += p[i];
  }
  for (T& v : p) v /= z;
  return p;
}

}  // namespace detail

// Runs both layers and the shared softmax head; probs[t] corresponds to input
// element t (layer-2 outputs are re-reversed).
template <class T>
ForwardTrace<T> lstm_forward_trace(const std::vector<std::vector<T>>& sequence,
                                   const StackedLstm<T>& net) {
  if (sequence.empty())
    throw std::invalid_argument("lstm_forward: empty sequence");
  const int steps = static_cast<int>(sequence.size());
  ForwardTrace<T> tr;
  detail::layer_forward(net.l1, sequence, tr.l1);

  std::vector<std::vector<T>> reversed(steps);
  for (int s = 0; s < steps; ++s) reversed[s] = tr.l1.h[steps - 1 - s];
  detail::layer_forward(net.l2, reversed, tr.l2);

  tr.logits.resize(steps);
  tr.probs.resize(steps);
  for (int t = 0; t < steps; ++t) {
    const int s = steps - 1 - t;  // layer-2 position holding input element t
    std::vector<T> logits(net.num_classes);
    for (int k = 0; k < net.num_classes; ++k)
      logits[k] = net.bc[k] +
                  kern::dot(net.wc.row(k), std::span<const T>(tr.l2.h[s]));
    tr.logits[t] = logits;
    tr.probs[t] = detail::softmax(logits);
  }
  return tr;
}

template <class T>
std::vector<std::vector<T>> lstm_forward(const std::vector<std::vector<T>>& sequence,
                                         const StackedLstm<T>& net) {
  return lstm_forward_trace(sequence, net).probs;
}

// Per-patch loss weights; position 0 (whole image) is always weight 1.
struct LossConfig {
  std::vector<double> gamma;  // weights for positions 1..n+2

  static LossConfig single(int n) {
    return LossConfig{std::vector<double>(static_cast<std::size_t>(n) + 2, 0.0)};
  }
  static LossConfig multi(int n) {
    return LossConfig{std::vector<double>(static_cast<std::size_t>(n) + 2, 1.0)};
  }
  double weight(int position) const {
    if (position == 0) return 1.0;
    return gamma.at(static_cast<std::size_t>(position) - 1);
  }
};

template <class T>
double loss(const std::vector<std::vector<T>>& step_probs, int label,
            const LossConfig& cfg) {
  if (step_probs.empty()) throw std::invalid_argument("loss: no outputs");
  if (step_probs.size() != cfg.gamma.size() + 1)
    throw std::invalid_argument("loss: output count does not match gamma length");
  double total = 0.0;
  for (std::size_t t = 0; t < step_probs.size(); ++t) {
    const double w = cfg.weight(static_cast<int>(t));
    if (w == 0.0) continue;
    const double p =
        std::max(static_cast<double>(step_probs[t][static_cast<std::size_t>(label)]),
                 kLogProbFloor);
    total += w * -std::log(p);
  }
  return total;
}

template <class T>
struct Gradients {
  StackedLstm<T> params;  // same shapes as the network
  std::vector<std::vector<T>> inputs;
};

namespace detail {

template <class T>
void layer_backward(const LstmLayer<T>& layer, const LayerTrace<T>& tr,
                    std::vector<std::vector<T>>& dh_steps, LstmLayer<T>& grad,
                    std::vector<std::vector<T>>& dx_steps) {
  const int H = layer.hidden_dim;
  const int steps = static_cast<int>(tr.h.size());
  dx_steps.assign(steps, std::vector<T>(layer.input_dim, T(0)));
  std::vector<T> dc(H, T(0)), dz(4 * H);
  for (int t = steps - 1; t >= 0; --t) {
    const auto& gi = tr.gi[t];
    const auto& gf = tr.gf[t];
    const auto& gg = tr.gg[t];
    const auto& go = tr.go[t];
    const auto& tc = tr.tc[t];
    const std::vector<T>* c_prev = t > 0 ? &tr.c[t - 1] : nullptr;
    const std::vector<T>* h_prev = t > 0 ? &tr.h[t - 1] : nullptr;
    auto& dh = dh_steps[t];
    for (int j = 0; j < H; ++j) {
      dc[j] += dh[j] * go[j] * (T(1) - tc[j] * tc[j]);
      const T dgo = dh[j] * tc[j] * go[j] * (T(1) - go[j]);
      const T dgi = dc[j] * gg[j] * gi[j] * (T(1) - gi[j]);
      const T dgg = dc[j] * gi[j] * (T(1) - gg[j] * gg[j]);
      const T cp = c_prev ? (*c_prev)[j] : T(0);
      const T dgf = dc[j] * cp * gf[j] * (T(1) - gf[j]);
      dz[j] = dgi;
      dz[H + j] = dgf;
      dz[2 * H + j] = dgg;
      dz[3 * H + j] = dgo;
      dc[j] *= gf[j];  // flows to c_{t-1}
    }
    const std::span<const T> x(tr.x[t]);
    for (int r = 0; r < 4 * H; ++r) {
      grad.b[r] += dz[r];
      kern::axpy(dz[r], x, grad.wx.row(r));
      kern::axpy(dz[r], layer.wx.row(r), std::span<T>(dx_steps[t]));
      if (h_prev) {
        kern::axpy(dz[r], std::span<const T>(*h_prev), grad.wh.row(r));
        kern::axpy(dz[r], layer.wh.row(r), std::span<T>(dh_steps[t - 1]));
      }
    }
  }
}

}  // namespace detail

// Exact gradients of `loss` with respect to every parameter and every input
// feature.
template <class T>
Gradients<T> backward(const std::vector<std::vector<T>>& sequence,
                      const StackedLstm<T>& net, int label,
                      const LossConfig& cfg) {
  const ForwardTrace<T> tr = lstm_forward_trace(sequence, net);
  const int steps = static_cast<int>(sequence.size());
  const int H = net.l1.hidden_dim;

  Gradients<T> g;
  g.params = StackedLstm<T>::zeros(net.l1.input_dim, H, net.num_classes);

  std::vector<std::vector<T>> dh2(steps, std::vector<T>(H, T(0)));
  for (int t = 0; t < steps; ++t) {
    const double w = cfg.weight(t);
    if (w == 0.0) continue;
    const int s = steps - 1 - t;
    const auto& p = tr.probs[t];
    // d(-w log p_y)/dlogit_k = w * (p_k - [k == y]); once p_y hits the clamp
    // floor the loss term is constant and the gradient vanishes.
    const bool floored =
        static_cast<double>(p[static_cast<std::size_t>(label)]) < kLogProbFloor;
    std::vector<T> dlogit(net.num_classes, T(0));
    if (!floored)
      for (int k = 0; k < net.num_classes; ++k)
        dlogit[k] = static_cast<T>(
            w * (static_cast<double>(p[k]) - (k == label ? 1.0 : 0.0)));
    for (int k = 0; k < net.num_classes; ++k) {
      g.params.bc[k] += dlogit[k];
      kern::axpy(dlogit[k], std::span<const T>(tr.l2.h[s]), g.params.wc.row(k));
      kern::axpy(dlogit[k], net.wc.row(k), std::span<T>(dh2[s]));
    }
  }

  std::vector<std::vector<T>> dx2;
  detail::layer_backward(net.l2, tr.l2, dh2, g.params.l2, dx2);

  std::vector<std::vector<T>> dh1(steps, std::vector<T>(H, T(0)));
  for (int s = 0; s < steps; ++s)
    for (int j = 0; j < H; ++j) dh1[steps - 1 - s][j] += dx2[s][j];

  detail::layer_backward(net.l1, tr.l1, dh1, g.params.l1, g.inputs);
  return g;
}

}  // namespace partsmine::encoder
