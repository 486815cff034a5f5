#pragma once

// Deep Q-learning over the band-selection environment: FIFO experience
// replay, epsilon-greedy exploration on the legal action set, one-step
// bootstrapped targets from the current network, and greedy test-time
// selection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <iterator>
#include <limits>
#include <optional>
#include <random>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bandsel/band_env.hpp"
#include "bandsel/band_stats.hpp"
#include "bandsel/error.hpp"
#include "bandsel/qnet.hpp"

namespace bandsel {

using Rng = std::mt19937_64;

/// One transition (s, a, r, s'). `terminal` marks s' holding K bands.
struct Experience {
  std::vector<std::uint8_t> state;
  BandIndex action = 0;
  double reward = 0.0;
  std::vector<std::uint8_t> next_state;
  bool terminal = false;
};

/// Bounded FIFO of experiences; pushing past capacity evicts the oldest.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorCode::kInvalidConfig, "replay capacity must be >= 1");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return buffer_.size(); }
  bool empty() const noexcept { return buffer_.empty(); }

  void push(Experience e) {
    if (buffer_.size() == capacity_) buffer_.pop_front();
    buffer_.push_back(std::move(e));
  }

  /// Oldest first.
  const Experience& operator[](std::size_t i) const { return buffer_[i]; }

  /// Uniform sample of `count` distinct entries (count is capped at size()).
  std::vector<const Experience*> sample(std::size_t count, Rng& rng) const {
    std::vector<std::size_t> picked;
    picked.reserve(count);
    std::vector<std::size_t> indices(buffer_.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    std::sample(indices.begin(), indices.end(), std::back_inserter(picked), count, rng);
    std::vector<const Experience*> out;
    out.reserve(picked.size());
    for (auto i : picked) out.push_back(&buffer_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Experience> buffer_;
};

struct TrainConfig {
  double gamma = 0.9;
  std::size_t batch_size = 100;
  std::size_t replay_capacity = 50000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  double epsilon_decay = 0.95;
  std::size_t max_episodes = 2000;
  /// 0 disables the plateau stop.
  std::size_t plateau_window = 0;
  double plateau_tolerance = 1e-4;
  std::size_t updates_per_episode = 10;
  NadamConfig optimizer;
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
    if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0, 1)");
    if (batch_size == 0) fail("batch_size must be >= 1");
    if (replay_capacity == 0) fail("replay_capacity must be >= 1");
    if (!(epsilon_end >= 0.0 && epsilon_end <= epsilon_start && epsilon_start <= 1.0)) {
      fail("epsilon must satisfy 0 <= end <= start <= 1");
    }
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) fail("epsilon_decay must lie in (0, 1]");
    if (max_episodes == 0) fail("max_episodes must be >= 1");
    if (!(plateau_tolerance >= 0.0)) fail("plateau_tolerance must be >= 0");
    if (updates_per_episode == 0) fail("updates_per_episode must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) fail("learning rate must be > 0");
    if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) fail("beta1 must lie in [0, 1)");
    if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) fail("beta2 must lie in [0, 1)");
    if (!(optimizer.epsilon > 0.0)) fail("optimizer epsilon must be > 0");
  }
};

/// Multiplicative per-episode decay floored at epsilon_end.
inline double next_epsilon(double epsilon, const TrainConfig& cfg) {
  return std::max(cfg.epsilon_end, epsilon * cfg.epsilon_decay);
}

/// With probability epsilon a uniform legal action, otherwise the legal action
/// with the largest Q-value (lowest index on ties).
inline BandIndex select_action(std::span<const double> q_values, std::span<const BandIndex> legal,
                               double epsilon, Rng& rng) {
  if (legal.empty()) throw Error(ErrorCode::kNoLegalAction, "no band left to choose");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
    return legal[pick(rng)];
  }
  BandIndex best = legal.front();
  for (BandIndex a : legal) {
    if (a >= q_values.size()) throw Error(ErrorCode::kShapeMismatch, "legal action beyond Q");
    if (q_values[a] > q_values[best] || (q_values[a] == q_values[best] && a < best)) best = a;
  }
  return best;
}

/// Largest Q-value over unselected bands; -inf when every band is selected.
inline double masked_max(std::span<const double> q, std::span<const std::uint8_t> selected) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (!selected[a]) best = std::max(best, q[a]);
  }
  return best;
}

/// y = r at terminal transitions, else r + gamma * max over legal a' of Q(s', a').
inline std::vector<double> compute_targets(std::span<const Experience* const> batch,
                                           const QNetworkParams& params, double gamma) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Experience* e : batch) {
    if (e->terminal) {
      y.push_back(e->reward);
      continue;
    }
    auto next = forward(params, std::span<const std::uint8_t>(e->next_state));
    const double best = masked_max(next.q, e->next_state);
    y.push_back(std::isfinite(best) ? e->reward + gamma * best : e->reward);
  }
  return y;
}

/// One minibatch step on the mean squared Bellman error. Returns the batch
/// loss evaluated before the update.
inline double train_on_batch(std::span<const Experience* const> batch, QNetworkParams& params,
                             OptimizerState& opt, double gamma) {
  const auto targets = compute_targets(batch, params, gamma);
  QNetworkGradients grads = QNetworkParams::zeros(params.bands);
  std::vector<double> dq(params.bands, 0.0);
  const auto n = static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Experience& e = *batch[i];
    auto fwd = forward(params, std::span<const std::uint8_t>(e.state));
    const double err = fwd.q[e.action] - targets[i];
    loss += err * err / n;
    // The factor 2 of d(err^2)/dq is folded into the learning rate.
    dq[e.action] = err / n;
    accumulate_backward(params, fwd.cache, dq, grads);
    dq[e.action] = 0.0;
  }
  if (!std::isfinite(loss)) throw Error(ErrorCode::kDivergedLoss, "batch loss is not finite");
  try {
    nadam_update(params, grads, opt);
  } catch (const Error& err) {
    if (err.code() == ErrorCode::kNonFiniteGradient) {
      throw Error(ErrorCode::kDivergedLoss, err.what());
    }
    throw;
  }
  return loss;
}

struct EpisodeRecord {
  std::size_t episode = 0;
  double epsilon = 0.0;
  double episode_return = 0.0;
  std::optional<double> loss;
  std::vector<BandIndex> selected;
  std::size_t replay_size = 0;
};

/// A trained Q-network plus everything needed to resume, select, or report.
struct TrainedPolicy {
  QNetworkParams params;
  OptimizerState optimizer;
  EnvConfig env;
  TrainConfig config;
  /// Index of every network input in the source image's numbering.
  std::vector<BandIndex> band_numbers;
  std::size_t episodes = 0;
  /// Exploration rate the next episode would use.
  double epsilon = 1.0;
  std::vector<double> returns;
  bool stopped_on_plateau = false;
  double wall_seconds = 0.0;
  std::optional<BandStats> stats;

  std::size_t bands() const noexcept { return params.bands; }
};

using EpisodeObserver = std::function<void(const EpisodeRecord&)>;

namespace detail {

/// Mean of the last window vs the window before it; stops once they agree.
inline bool plateaued(const std::vector<double>& returns, std::size_t window, double tolerance) {
  if (window == 0 || returns.size() < 2 * window) return false;
  double recent = 0.0;
  double before = 0.0;
  const std::size_t n = returns.size();
  for (std::size_t i = 0; i < window; ++i) {
    recent += returns[n - 1 - i];
    before += returns[n - 1 - window - i];
  }
  const auto w = static_cast<double>(window);
  return std::abs(recent / w - before / w) < tolerance;
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

}  // namespace detail

/// Deep Q-learning: every episode rolls K epsilon-greedy steps into replay,
/// then takes `updates_per_episode` minibatch steps once replay holds a full
/// batch, then decays epsilon. Deterministic for a fixed seed.
inline TrainedPolicy train(const BandStats& stats, const EnvConfig& env_config,
                           const TrainConfig& cfg, const EpisodeObserver& observer = {}) {
  cfg.validate();
  const BandEnv env(stats, env_config);
  const auto started = std::chrono::steady_clock::now();

  TrainedPolicy policy;
  policy.env = env_config;
  policy.config = cfg;
  policy.params = init_params(stats.bands(), cfg.seed);
  policy.optimizer = OptimizerState::for_params(policy.params, cfg.optimizer);
  policy.band_numbers.resize(stats.bands());
  for (BandIndex b = 0; b < stats.bands(); ++b) policy.band_numbers[b] = b;
  policy.epsilon = cfg.epsilon_start;
  policy.stats = stats;

  ReplayMemory memory(cfg.replay_capacity);
  Rng rng = detail::make_rng(cfg.seed, 1);

  for (std::size_t episode = 0; episode < cfg.max_episodes; ++episode) {
    EpisodeRecord record;
    record.episode = episode;
    record.epsilon = policy.epsilon;

    SelectionState state = env.reset();
    while (!env.finished(state)) {
      const auto legal = env.legal_actions(state);
      const auto q = forward(policy.params, state.bits()).q;
      const BandIndex action = select_action(q, legal, policy.epsilon, rng);
      StepResult step = env.step(state, action);
      record.episode_return += step.reward;
      memory.push(Experience{std::vector<std::uint8_t>(state.bits().begin(), state.bits().end()),
                             action, step.reward,
                             std::vector<std::uint8_t>(step.state.bits().begin(),
                                                       step.state.bits().end()),
                             step.terminal});
      state = std::move(step.state);
    }
    record.selected.assign(state.selected().begin(), state.selected().end());

    if (memory.size() >= cfg.batch_size) {
      double loss = 0.0;
      for (std::size_t u = 0; u < cfg.updates_per_episode; ++u) {
        const auto batch = memory.sample(cfg.batch_size, rng);
        loss = train_on_batch(batch, policy.params, policy.optimizer, cfg.gamma);
      }
      record.loss = loss;
    }
    record.replay_size = memory.size();

    policy.returns.push_back(record.episode_return);
    policy.episodes = episode + 1;
    if (observer) observer(record);
    const bool exploring = policy.epsilon > cfg.epsilon_end;
    policy.epsilon = next_epsilon(policy.epsilon, cfg);

    // Only judge convergence once exploration has bottomed out.
    if (!exploring && detail::plateaued(policy.returns, cfg.plateau_window, cfg.plateau_tolerance)) {
      policy.stopped_on_plateau = true;
      break;
    }
  }
  policy.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return policy;
}

struct Selection {
  /// Band indices in pick order, in the policy's input numbering.
  std::vector<BandIndex> bands;
  /// The same bands in the source image's numbering.
  std::vector<BandIndex> original;
};

/// K greedy masked-argmax steps from the empty state.
inline Selection select_bands(const TrainedPolicy& policy, std::size_t k) {
  const std::size_t l = policy.bands();
  if (k > l) {
    throw Error(ErrorCode::kInvalidConfig,
                "K=" + std::to_string(k) + " exceeds band count " + std::to_string(l));
  }
  Selection out;
  std::vector<std::uint8_t> bits(l, 0);
  for (std::size_t step = 0; step < k; ++step) {
    const auto q = forward(policy.params, std::span<const std::uint8_t>(bits)).q;
    BandIndex best = l;
    for (BandIndex a = 0; a < l; ++a) {
      if (bits[a]) continue;
      if (best == l || q[a] > q[best]) best = a;
    }
    bits[best] = 1;
    out.bands.push_back(best);
    out.original.push_back(policy.band_numbers.empty() ? best : policy.band_numbers[best]);
  }
  return out;
}

}  // namespace bandsel
