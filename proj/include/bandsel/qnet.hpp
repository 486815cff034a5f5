#pragma once

// Three-layer fully connected Q-network (L -> 2L -> 2L -> L, ReLU hidden
// units, linear head) with hand-written backprop and a Nesterov-Adam update.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bandsel/error.hpp"

namespace bandsel {

/// Row-major dense matrix; vectors are stored as rows x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum ParamSlot : std::size_t { kW1 = 0, kB1, kW2, kB2, kW3, kB3, kParamSlots };

inline constexpr std::array<const char*, kParamSlots> kParamNames = {"W1", "b1", "W2",
                                                                    "b2", "W3", "b3"};

/// Weights and biases for a given band count L. Gradients use the same type.
struct QNetworkParams {
  std::size_t bands = 0;
  std::array<Tensor, kParamSlots> tensors;

  static QNetworkParams zeros(std::size_t l) {
    if (l == 0) throw Error(ErrorCode::kShapeMismatch, "network needs L >= 1");
    const std::size_t h = 2 * l;
    QNetworkParams p;
    p.bands = l;
    p.tensors[kW1] = Tensor(h, l);
    p.tensors[kB1] = Tensor(h, 1);
    p.tensors[kW2] = Tensor(h, h);
    p.tensors[kB2] = Tensor(h, 1);
    p.tensors[kW3] = Tensor(l, h);
    p.tensors[kB3] = Tensor(l, 1);
    return p;
  }

  std::size_t hidden() const noexcept { return 2 * bands; }
  Tensor& operator[](ParamSlot s) { return tensors[s]; }
  const Tensor& operator[](ParamSlot s) const { return tensors[s]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }

  bool same_shape(const QNetworkParams& other) const {
    if (bands != other.bands) return false;
    for (std::size_t s = 0; s < kParamSlots; ++s) {
      if (tensors[s].rows != other.tensors[s].rows || tensors[s].cols != other.tensors[s].cols) {
        return false;
      }
    }
    return true;
  }

  void set_zero() {
    for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), 0.0);
  }

  friend bool operator==(const QNetworkParams&, const QNetworkParams&) = default;
};

using QNetworkGradients = QNetworkParams;

/// Glorot-uniform weights, zero biases.
inline QNetworkParams init_params(std::size_t l, std::uint64_t seed) {
  QNetworkParams p = QNetworkParams::zeros(l);
  std::mt19937_64 rng(seed);
  for (ParamSlot s : {kW1, kW2, kW3}) {
    Tensor& w = p[s];
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : w.data) x = dist(rng);
  }
  return p;
}

/// Activations kept from a forward pass for backprop.
struct ForwardCache {
  std::vector<double> input;
  std::vector<double> z1, h1;
  std::vector<double> z2, h2;
};

struct ForwardResult {
  std::vector<double> q;
  ForwardCache cache;
};

namespace detail {

inline void check_input(const QNetworkParams& params, std::size_t width) {
  if (width != params.bands) {
    throw Error(ErrorCode::kShapeMismatch,
                "input width " + std::to_string(width) + " != L " + std::to_string(params.bands));
  }
}

// out = W x + b, skipping zero inputs (states are sparse multi-hot vectors).
inline void affine(const Tensor& w, const Tensor& b, std::span<const double> x,
                   std::vector<double>& out) {
  out.assign(b.data.begin(), b.data.end());
  for (std::size_t c = 0; c < w.cols; ++c) {
    const double xc = x[c];
    if (xc == 0.0) continue;
    for (std::size_t r = 0; r < w.rows; ++r) out[r] += w.data[r * w.cols + c] * xc;
  }
}

}  // namespace detail

/// q = W3 relu(W2 relu(W1 s + b1) + b2) + b3
inline ForwardResult forward(const QNetworkParams& params, std::span<const double> state) {
  detail::check_input(params, state.size());
  ForwardResult out;
  ForwardCache& c = out.cache;
  c.input.assign(state.begin(), state.end());
  detail::affine(params[kW1], params[kB1], c.input, c.z1);
  c.h1.resize(c.z1.size());
  for (std::size_t i = 0; i < c.z1.size(); ++i) c.h1[i] = c.z1[i] > 0.0 ? c.z1[i] : 0.0;
  detail::affine(params[kW2], params[kB2], c.h1, c.z2);
  c.h2.resize(c.z2.size());
  for (std::size_t i = 0; i < c.z2.size(); ++i) c.h2[i] = c.z2[i] > 0.0 ? c.z2[i] : 0.0;
  detail::affine(params[kW3], params[kB3], c.h2, out.q);
  return out;
}

inline ForwardResult forward(const QNetworkParams& params, std::span<const std::uint8_t> bits) {
  std::vector<double> x(bits.begin(), bits.end());
  return forward(params, std::span<const double>(x));
}

/// Adds dLoss/dparams for one sample to `grads`, given dLoss/dq.
inline void accumulate_backward(const QNetworkParams& params, const ForwardCache& cache,
                                std::span<const double> dq, QNetworkGradients& grads) {
  const std::size_t l = params.bands;
  const std::size_t h = params.hidden();
  if (dq.size() != l || cache.input.size() != l || cache.h2.size() != h || !grads.same_shape(params)) {
    throw Error(ErrorCode::kShapeMismatch, "backward inputs do not match the network");
  }
  const Tensor& w2 = params[kW2];
  const Tensor& w3 = params[kW3];

  std::vector<double> dz2(h, 0.0);
  for (std::size_t k = 0; k < l; ++k) {
    const double g = dq[k];
    if (g == 0.0) continue;
    grads[kB3].data[k] += g;
    double* gw3 = &grads[kW3].data[k * h];
    const double* w3row = &w3.data[k * h];
    for (std::size_t j = 0; j < h; ++j) {
      gw3[j] += g * cache.h2[j];
      dz2[j] += g * w3row[j];
    }
  }
  for (std::size_t j = 0; j < h; ++j) {
    if (!(cache.z2[j] > 0.0)) dz2[j] = 0.0;
  }

  std::vector<double> dz1(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double g = dz2[j];
    if (g == 0.0) continue;
    grads[kB2].data[j] += g;
    double* gw2 = &grads[kW2].data[j * h];
    const double* w2row = &w2.data[j * h];
    for (std::size_t i = 0; i < h; ++i) {
      gw2[i] += g * cache.h1[i];
      dz1[i] += g * w2row[i];
    }
  }
  for (std::size_t i = 0; i < h; ++i) {
    if (!(cache.z1[i] > 0.0)) dz1[i] = 0.0;
  }

  for (std::size_t i = 0; i < h; ++i) {
    const double g = dz1[i];
    if (g == 0.0) continue;
    grads[kB1].data[i] += g;
    double* gw1 = &grads[kW1].data[i * l];
    for (std::size_t c = 0; c < l; ++c) gw1[c] += g * cache.input[c];
  }
}

inline QNetworkGradients backward(const QNetworkParams& params, const ForwardCache& cache,
                                  std::span<const double> dq) {
  QNetworkGradients grads = QNetworkParams::zeros(params.bands);
  accumulate_backward(params, cache, dq, grads);
  return grads;
}

struct NadamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const NadamConfig&, const NadamConfig&) = default;
};

/// First/second moment estimates per parameter tensor and the update count.
struct OptimizerState {
  NadamConfig config;
  std::uint64_t step = 0;
  std::array<Tensor, kParamSlots> first_moment;
  std::array<Tensor, kParamSlots> second_moment;

  static OptimizerState for_params(const QNetworkParams& params, NadamConfig config = {}) {
    OptimizerState s;
    s.config = config;
    for (std::size_t i = 0; i < kParamSlots; ++i) {
      s.first_moment[i] = Tensor(params.tensors[i].rows, params.tensors[i].cols);
      s.second_moment[i] = Tensor(params.tensors[i].rows, params.tensors[i].cols);
    }
    return s;
  }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One Nesterov-Adam step with step count t (1-based):
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   m_hat = b1 m / (1 - b1^(t+1)) + (1 - b1) g / (1 - b1^t)
///   v_hat = v / (1 - b2^t)
///   theta -= lr m_hat / (sqrt(v_hat) + eps)
/// Parameters are left untouched if any gradient is non-finite.
inline void nadam_update(QNetworkParams& params, const QNetworkGradients& grads,
                         OptimizerState& state) {
  if (!grads.same_shape(params)) throw Error(ErrorCode::kShapeMismatch, "gradient shapes");
  for (std::size_t s = 0; s < kParamSlots; ++s) {
    if (state.first_moment[s].size() != params.tensors[s].size() ||
        state.second_moment[s].size() != params.tensors[s].size()) {
      throw Error(ErrorCode::kShapeMismatch, "optimizer moment shapes");
    }
    for (double g : grads.tensors[s].data) {
      if (!std::isfinite(g)) {
        throw Error(ErrorCode::kNonFiniteGradient, std::string("in ") + kParamNames[s]);
      }
    }
  }
  const NadamConfig& c = state.config;
  const auto t = static_cast<double>(++state.step);
  const double bias1_next = 1.0 - std::pow(c.beta1, t + 1.0);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t s = 0; s < kParamSlots; ++s) {
    auto& theta = params.tensors[s].data;
    const auto& g = grads.tensors[s].data;
    auto& m = state.first_moment[s].data;
    auto& v = state.second_moment[s].data;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = c.beta1 * m[i] / bias1_next + (1.0 - c.beta1) * g[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace bandsel
