#pragma once

// Band selection as a deterministic MDP: the state is the multi-hot vector of
// picked bands, an action adds one unpicked band, an episode lasts K steps.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bandsel/band_stats.hpp"
#include "bandsel/error.hpp"

namespace bandsel {

enum class RewardScheme { kEntropy, kCorrelation };

inline std::string to_string(RewardScheme scheme) {
  return scheme == RewardScheme::kEntropy ? "entropy" : "correlation";
}

/// Multi-hot state plus the bands in pick order. Also carries running
/// entropy / correlation totals so rewards cost O(|B|) per step.
class SelectionState {
 public:
  SelectionState() = default;
  explicit SelectionState(std::size_t bands) : bits_(bands, 0) {}

  std::size_t bands() const noexcept { return bits_.size(); }
  std::size_t size() const noexcept { return selected_.size(); }
  bool empty() const noexcept { return selected_.empty(); }
  bool contains(BandIndex b) const { return b < bits_.size() && bits_[b] != 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<const BandIndex> selected() const noexcept { return selected_; }

  /// Sum of entropies over the selected bands.
  double entropy_total() const noexcept { return entropy_total_; }
  /// Sum of all |B|^2 correlation entries over the selected bands.
  double correlation_total() const noexcept { return correlation_total_; }

  friend bool operator==(const SelectionState& a, const SelectionState& b) {
    return a.bits_ == b.bits_ && a.selected_ == b.selected_;
  }

 private:
  friend class BandEnv;

  std::vector<std::uint8_t> bits_;
  std::vector<BandIndex> selected_;
  double entropy_total_ = 0.0;
  double correlation_total_ = 0.0;
};

struct EnvConfig {
  std::size_t k = 1;
  RewardScheme reward = RewardScheme::kEntropy;
};

struct StepResult {
  SelectionState state;
  double reward = 0.0;
  bool terminal = false;
};

struct EpisodeResult {
  std::vector<BandIndex> subset;
  std::vector<double> rewards;
};

class BandEnv {
 public:
  BandEnv(const BandStats& stats, EnvConfig config) : stats_(&stats), config_(config) {
    if (config_.k < 1 || config_.k > stats.bands()) {
      throw Error(ErrorCode::kInvalidConfig, "K=" + std::to_string(config_.k) +
                                                 " must lie in [1, " +
                                                 std::to_string(stats.bands()) + "]");
    }
  }

  const BandStats& stats() const noexcept { return *stats_; }
  const EnvConfig& config() const noexcept { return config_; }
  std::size_t bands() const noexcept { return stats_->bands(); }

  SelectionState reset() const { return SelectionState(bands()); }

  std::vector<BandIndex> legal_actions(const SelectionState& state) const {
    std::vector<BandIndex> out;
    out.reserve(bands() - state.size());
    for (BandIndex b = 0; b < state.bands(); ++b) {
      if (!state.bits_[b]) out.push_back(b);
    }
    return out;
  }

  bool finished(const SelectionState& state) const { return state.size() >= config_.k; }

  StepResult step(const SelectionState& state, BandIndex action) const {
    if (state.bands() != bands()) throw Error(ErrorCode::kShapeMismatch, "state width != L");
    if (finished(state)) {
      throw Error(ErrorCode::kEpisodeFinished,
                  "state already holds K=" + std::to_string(config_.k) + " bands");
    }
    if (action >= bands()) {
      throw Error(ErrorCode::kIllegalAction, "band " + std::to_string(action) + " out of range");
    }
    if (state.bits_[action]) {
      throw Error(ErrorCode::kIllegalAction, "band " + std::to_string(action) + " already chosen");
    }

    StepResult out{state, 0.0, false};
    SelectionState& next = out.state;
    const auto m = static_cast<double>(state.size());

    next.entropy_total_ += stats_->entropy(action);
    double cross = 0.0;
    for (BandIndex j : state.selected_) cross += stats_->correlation(action, j);
    next.correlation_total_ += 2.0 * cross + stats_->correlation(action, action);

    next.bits_[action] = 1;
    next.selected_.push_back(action);

    if (config_.reward == RewardScheme::kEntropy) {
      out.reward = state.empty() ? stats_->entropy(action)
                                 : next.entropy_total_ / (m + 1.0) - state.entropy_total_ / m;
    } else {
      out.reward = state.empty() ? 0.0
                                 : state.correlation_total_ / (m * m) -
                                       next.correlation_total_ / ((m + 1.0) * (m + 1.0));
    }
    out.terminal = finished(next);
    return out;
  }

  /// Runs K steps from the empty state, asking `policy` for each action.
  EpisodeResult run_episode(const std::function<BandIndex(const SelectionState&)>& policy) const {
    EpisodeResult out;
    SelectionState state = reset();
    while (!finished(state)) {
      StepResult r = step(state, policy(state));
      out.rewards.push_back(r.reward);
      state = std::move(r.state);
    }
    out.subset.assign(state.selected().begin(), state.selected().end());
    return out;
  }

  /// Mean entropy of the state from the running total (0 for the empty state).
  double mean_entropy(const SelectionState& state) const {
    return state.empty() ? 0.0 : state.entropy_total() / static_cast<double>(state.size());
  }
  double mean_corr(const SelectionState& state) const {
    const auto m = static_cast<double>(state.size());
    return state.empty() ? 0.0 : state.correlation_total() / (m * m);
  }

 private:
  const BandStats* stats_;
  EnvConfig config_;
};

}  // namespace bandsel
