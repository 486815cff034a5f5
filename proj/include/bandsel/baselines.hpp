#pragma once

// Reference selectors: entropy ranking, uniform random subsets, greedy
// forward selection, and exhaustive search (the exact oracle for small L).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bandsel/band_env.hpp"
#include "bandsel/band_stats.hpp"
#include "bandsel/error.hpp"

namespace bandsel {

enum class ObjectiveKind { kMaxMie, kMinCorr };

inline std::string to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::kMaxMie ? "max_mie" : "min_corr";
}

/// Subset score to maximize mean entropy or minimize mean correlation.
class Objective {
 public:
  Objective(ObjectiveKind kind, const BandStats& stats) : kind_(kind), stats_(&stats) {}

  ObjectiveKind kind() const noexcept { return kind_; }
  const BandStats& stats() const noexcept { return *stats_; }

  double score(std::span<const BandIndex> subset) const {
    return kind_ == ObjectiveKind::kMaxMie ? mean_information_entropy(*stats_, subset)
                                           : mean_correlation(*stats_, subset);
  }

  /// True when score `a` is strictly better than score `b`.
  bool better(double a, double b) const {
    return kind_ == ObjectiveKind::kMaxMie ? a > b : a < b;
  }

  /// The environment reward scheme whose step rewards measure this objective.
  RewardScheme reward_scheme() const {
    return kind_ == ObjectiveKind::kMaxMie ? RewardScheme::kEntropy : RewardScheme::kCorrelation;
  }

 private:
  ObjectiveKind kind_;
  const BandStats* stats_;
};

struct ScoredSubset {
  std::vector<BandIndex> subset;
  double score = 0.0;
};

/// The K highest-entropy bands, descending, lower index first on ties.
inline std::vector<BandIndex> rank_by_entropy(const BandStats& stats, std::size_t k) {
  if (k > stats.bands()) throw Error(ErrorCode::kInvalidConfig, "K exceeds band count");
  std::vector<BandIndex> order(stats.bands());
  std::iota(order.begin(), order.end(), BandIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](BandIndex a, BandIndex b) {
    return stats.entropy(a) > stats.entropy(b);
  });
  order.resize(k);
  return order;
}

/// Uniform over all (L choose K) subsets; returned ascending.
template <typename Urbg>
std::vector<BandIndex> random_subset(std::size_t bands, std::size_t k, Urbg& rng) {
  if (k > bands) throw Error(ErrorCode::kInvalidConfig, "K exceeds band count");
  std::vector<BandIndex> all(bands);
  std::iota(all.begin(), all.end(), BandIndex{0});
  std::vector<BandIndex> out;
  out.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

/// Sequential forward selection: each step adds the band with the largest
/// objective gain, scored with the same step rewards the environment uses
/// (first pick: entropy for max_mie, 0 for min_corr). Lower index wins ties.
inline std::vector<BandIndex> greedy_select(const Objective& objective, std::size_t k) {
  const BandStats& stats = objective.stats();
  if (k > stats.bands()) throw Error(ErrorCode::kInvalidConfig, "K exceeds band count");
  if (k == 0) return {};
  const BandEnv env(stats, EnvConfig{k, objective.reward_scheme()});
  SelectionState state = env.reset();
  while (!env.finished(state)) {
    std::optional<StepResult> best;
    for (BandIndex a : env.legal_actions(state)) {
      StepResult r = env.step(state, a);
      if (!best || r.reward > best->reward) best = std::move(r);
    }
    state = std::move(best->state);
  }
  return {state.selected().begin(), state.selected().end()};
}

/// (n choose k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(acc);
}

struct ExhaustiveOptions {
  std::uint64_t budget = 10'000'000;
  unsigned threads = 1;
};

/// Exact optimum over every K-subset, visited in lexicographic order; the
/// lexicographically first subset wins ties. Workers split the range by the
/// first element and the reduction keeps (score, lexicographic) order, so the
/// result does not depend on the thread count.
inline ScoredSubset exhaustive_best(const Objective& objective, std::size_t k,
                                    const ExhaustiveOptions& options = {}) {
  const std::size_t l = objective.stats().bands();
  if (k == 0 || k > l) {
    throw Error(ErrorCode::kInvalidConfig, "K must lie in [1, " + std::to_string(l) + "]");
  }
  const std::uint64_t count = binomial(l, k);
  if (count > options.budget) {
    throw Error(ErrorCode::kBudgetExceeded, "C(" + std::to_string(l) + ", " + std::to_string(k) +
                                                ") = " + std::to_string(count) +
                                                " subsets exceeds budget " +
                                                std::to_string(options.budget));
  }

  auto search = [&](std::size_t worker, std::size_t workers, ScoredSubset& best) {
    bool found = false;
    std::vector<BandIndex> combo(k);
    for (BandIndex first = worker; first + k <= l; first += workers) {
      std::iota(combo.begin(), combo.end(), first);
      while (true) {
        const double s = objective.score(combo);
        if (!found || objective.better(s, best.score)) {
          best.subset = combo;
          best.score = s;
          found = true;
        }
        // Advance positions 1..k-1 lexicographically, keeping combo[0] fixed.
        std::size_t i = k;
        while (i > 1 && combo[i - 1] == l - k + i - 1) --i;
        if (i <= 1) break;
        ++combo[i - 1];
        for (std::size_t j = i; j < k; ++j) combo[j] = combo[j - 1] + 1;
      }
    }
  };

  const std::size_t firsts = l - k + 1;
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(options.threads, firsts));
  std::vector<ScoredSubset> partial(workers);
  if (workers == 1) {
    search(0, 1, partial[0]);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] { search(w, workers, partial[w]); });
    }
  }
  ScoredSubset best = partial.front();
  for (std::size_t w = 1; w < workers; ++w) {
    const auto& cand = partial[w];
    if (cand.subset.empty()) continue;
    if (objective.better(cand.score, best.score) ||
        (cand.score == best.score && cand.subset < best.subset)) {
      best = cand;
    }
  }
  return best;
}

}  // namespace bandsel
