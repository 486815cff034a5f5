#pragma once

// Independent reference computations used by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bandsel/qnet.hpp"

namespace bandsel::oracle {

/// Scalar Nadam written straight from the update rule, sharing no code with
/// nadam_update.
struct ScalarNadam {
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  long t = 0;

  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double m_hat = b1 * m / (1.0 - std::pow(b1, static_cast<double>(t + 1))) +
                         (1.0 - b1) * g / (1.0 - std::pow(b1, static_cast<double>(t)));
    const double v_hat = v / (1.0 - std::pow(b2, static_cast<double>(t)));
    return theta - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

/// f(params) = sum_k c_k q_k(x), whose parameter gradient is backward(c).
inline double probe(const QNetworkParams& p, const std::vector<double>& x,
                    const std::vector<double>& c) {
  const auto q = forward(p, std::span<const double>(x)).q;
  double f = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) f += c[k] * q[k];
  return f;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences over every parameter of a random network of width l.
/// Relative error is |a - n| / max(|a|, |n|), with entries where both are
/// below `floor` compared absolutely against floor instead.
inline GradCheck finite_difference_check(std::size_t l, std::uint64_t seed, double h = 1e-5,
                                         double floor = 1e-7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  QNetworkParams p = init_params(l, seed);
  for (ParamSlot s : {kB1, kB2, kB3}) {
    for (double& b : p[s].data) b = 0.1 * u(rng);
  }
  std::vector<double> x(l), c(l);
  for (auto& xi : x) xi = (rng() % 2) ? 1.0 : u(rng);
  for (auto& ci : c) ci = u(rng);

  const auto fwd = forward(p, std::span<const double>(x));
  const auto g = backward(p, fwd.cache, c);
  GradCheck out;
  for (std::size_t s = 0; s < kParamSlots; ++s) {
    for (std::size_t i = 0; i < p.tensors[s].data.size(); ++i) {
      QNetworkParams plus = p, minus = p;
      plus.tensors[s].data[i] += h;
      minus.tensors[s].data[i] -= h;
      const double numeric = (probe(plus, x, c) - probe(minus, x, c)) / (2.0 * h);
      const double analytic = g.tensors[s].data[i];
      const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / scale);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace bandsel::oracle
