#pragma once

// Per-band Shannon entropies and the inter-band Pearson matrix, plus the two
// subset objectives built on them (mean entropy, mean correlation) and the
// step rewards derived from those objectives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <span>
#include <thread>
#include <vector>

#include "bandsel/error.hpp"
#include "bandsel/hsi_data.hpp"

namespace bandsel {

/// How the entropy sum is read. kDistinctValues is ordinary Shannon entropy
/// over the empirical value distribution. kPerPixel sums -P log2 P once per
/// pixel, i.e. weights every distinct value by its multiplicity.
enum class EntropyMode { kDistinctValues, kPerPixel };

/// kPerBand rescales each band to its own min/max before binning; kGlobal uses
/// one range for the whole cube.
enum class QuantizationRange { kPerBand, kGlobal };

struct StatsOptions {
  std::size_t bin_count = 256;
  EntropyMode entropy_mode = EntropyMode::kDistinctValues;
  QuantizationRange range = QuantizationRange::kPerBand;
  bool absolute_correlation = false;
  unsigned threads = 1;
};

/// Entropy in bits of a quantized band.
inline double band_entropy(const QuantizedBand& q,
                           EntropyMode mode = EntropyMode::kDistinctValues) {
  if (q.codes.empty()) return 0.0;
  std::vector<std::uint64_t> counts(q.bin_count, 0);
  for (auto c : q.codes) ++counts.at(c);
  const auto n = static_cast<double>(q.codes.size());
  double h = 0.0;
  for (auto count : counts) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    const double term = p * std::log2(p);
    h -= mode == EntropyMode::kPerPixel ? static_cast<double>(count) * term : term;
  }
  return h + 0.0;  // no negative zero for constant bands
}

namespace detail {

struct CenteredBand {
  std::vector<double> centered;
  double sum_sq = 0.0;
  bool constant = false;
};

inline CenteredBand center_band(std::span<const double> x) {
  CenteredBand out;
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  out.constant = *lo == *hi;
  if (out.constant) return out;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  out.centered.resize(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) {
    out.centered[p] = x[p] - mean;
    out.sum_sq += out.centered[p] * out.centered[p];
  }
  return out;
}

// The 1/N of the population moments cancels between numerator and denominator.
inline double pearson_centered(const CenteredBand& a, const CenteredBand& b) {
  double dot = 0.0;
  for (std::size_t p = 0; p < a.centered.size(); ++p) dot += a.centered[p] * b.centered[p];
  return std::clamp(dot / std::sqrt(a.sum_sq * b.sum_sq), -1.0, 1.0);
}

}  // namespace detail

/// Population Pearson coefficient of two bands on raw values.
/// Throws ConstantBand when either band has zero variance.
inline double pearson(const HyperspectralImage& image, BandIndex i, BandIndex j) {
  auto a = detail::center_band(image.band(i));
  if (a.constant) throw Error(ErrorCode::kConstantBand, "band " + std::to_string(i));
  if (i == j) return 1.0;
  auto b = detail::center_band(image.band(j));
  if (b.constant) throw Error(ErrorCode::kConstantBand, "band " + std::to_string(j));
  return detail::pearson_centered(a, b);
}

/// Immutable per-image statistics. Correlations of a constant band (with
/// anything, itself included) are stored as 0.
class BandStats {
 public:
  BandStats() = default;

  BandStats(std::vector<double> entropies, std::vector<double> correlation,
            std::size_t bin_count)
      : entropies_(std::move(entropies)),
        correlation_(std::move(correlation)),
        bin_count_(bin_count) {
    const auto l = entropies_.size();
    if (l == 0) throw Error(ErrorCode::kSizeMismatch, "stats need at least one band");
    if (correlation_.size() != l * l) {
      throw Error(ErrorCode::kSizeMismatch, "correlation matrix must be L x L");
    }
  }

  static BandStats compute(const HyperspectralImage& image, const StatsOptions& options = {}) {
    const std::size_t l = image.bands();
    std::vector<double> entropies(l);
    const ValueRange shared = global_range(image);
    for (BandIndex b = 0; b < l; ++b) {
      auto q = options.range == QuantizationRange::kGlobal
                   ? quantize_band(image, b, options.bin_count, shared)
                   : quantize_band(image, b, options.bin_count);
      entropies[b] = band_entropy(q, options.entropy_mode);
    }

    std::vector<detail::CenteredBand> centered(l);
    for (BandIndex b = 0; b < l; ++b) centered[b] = detail::center_band(image.band(b));

    std::vector<double> corr(l * l, 0.0);
    auto fill_rows = [&](std::size_t worker, std::size_t workers) {
      for (std::size_t i = worker; i < l; i += workers) {
        if (centered[i].constant) continue;
        corr[i * l + i] = 1.0;
        for (std::size_t j = i + 1; j < l; ++j) {
          if (centered[j].constant) continue;
          double r = detail::pearson_centered(centered[i], centered[j]);
          if (options.absolute_correlation) r = std::abs(r);
          corr[i * l + j] = r;
        }
      }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(options.threads, l));
    if (workers == 1) {
      fill_rows(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w, workers);
    }
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = 0; j < i; ++j) corr[i * l + j] = corr[j * l + i];
    }
    return BandStats(std::move(entropies), std::move(corr), options.bin_count);
  }

  std::size_t bands() const noexcept { return entropies_.size(); }
  std::size_t bin_count() const noexcept { return bin_count_; }
  std::span<const double> entropies() const noexcept { return entropies_; }
  double entropy(BandIndex b) const { return entropies_.at(b); }
  double correlation(BandIndex i, BandIndex j) const { return correlation_[i * bands() + j]; }
  std::span<const double> correlation_matrix() const noexcept { return correlation_; }

 private:
  std::vector<double> entropies_;
  std::vector<double> correlation_;
  std::size_t bin_count_ = 0;
};

struct CorrelationSummary {
  double min = 0.0;
  double max = 0.0;
  double mean_offdiag = 0.0;
};

/// Range and mean of the off-diagonal correlations (diagonal used when L = 1).
inline CorrelationSummary summarize_correlation(const BandStats& stats) {
  const std::size_t l = stats.bands();
  if (l == 1) {
    double c = stats.correlation(0, 0);
    return {c, c, 0.0};
  }
  CorrelationSummary s{1.0, -1.0, 0.0};
  for (std::size_t i = 0; i < l; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      if (i == j) continue;
      double c = stats.correlation(i, j);
      s.min = std::min(s.min, c);
      s.max = std::max(s.max, c);
      s.mean_offdiag += c;
    }
  }
  s.mean_offdiag /= static_cast<double>(l * (l - 1));
  return s;
}

namespace detail {

// Subset sums run in ascending index order so a subset scores identically no
// matter the order its bands were picked in.
inline std::vector<BandIndex> canonical_subset(const BandStats& stats,
                                               std::span<const BandIndex> subset) {
  if (subset.empty()) throw Error(ErrorCode::kEmptySubset, "subset is empty");
  std::vector<BandIndex> sorted(subset.begin(), subset.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.back() >= stats.bands()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "band " + std::to_string(sorted.back()) + " >= " + std::to_string(stats.bands()));
  }
  return sorted;
}

/// Returns the single band in `next` that is not in `prev`.
inline BandIndex added_band(std::span<const BandIndex> prev, std::span<const BandIndex> next) {
  std::vector<BandIndex> p(prev.begin(), prev.end());
  std::vector<BandIndex> n(next.begin(), next.end());
  std::sort(p.begin(), p.end());
  std::sort(n.begin(), n.end());
  const bool distinct = std::adjacent_find(n.begin(), n.end()) == n.end();
  std::vector<BandIndex> extra;
  std::set_difference(n.begin(), n.end(), p.begin(), p.end(), std::back_inserter(extra));
  if (!distinct || n.size() != p.size() + 1 || extra.size() != 1 ||
      !std::includes(n.begin(), n.end(), p.begin(), p.end())) {
    throw Error(ErrorCode::kNotSuccessor, "next subset must be prev plus exactly one new band");
  }
  return extra.front();
}

}  // namespace detail

/// Mean of the per-band entropies over `subset`.
inline double mean_information_entropy(const BandStats& stats,
                                       std::span<const BandIndex> subset) {
  auto sorted = detail::canonical_subset(stats, subset);
  double total = 0.0;
  for (auto b : sorted) total += stats.entropy(b);
  return total / static_cast<double>(sorted.size());
}

/// Mean of all |B|^2 signed correlation entries over the subset, self-terms
/// and both orderings included.
inline double mean_correlation(const BandStats& stats, std::span<const BandIndex> subset) {
  auto sorted = detail::canonical_subset(stats, subset);
  double total = 0.0;
  for (auto i : sorted) {
    for (auto j : sorted) total += stats.correlation(i, j);
  }
  const auto m = static_cast<double>(sorted.size());
  return total / (m * m);
}

/// Gain in mean entropy; the first pick is rewarded with the band's entropy.
inline double entropy_reward(const BandStats& stats, std::span<const BandIndex> prev,
                             std::span<const BandIndex> next) {
  const BandIndex added = detail::added_band(prev, next);
  if (added >= stats.bands()) throw Error(ErrorCode::kIndexOutOfRange, "added band");
  if (prev.empty()) return stats.entropy(added);
  return mean_information_entropy(stats, next) - mean_information_entropy(stats, prev);
}

/// Drop in mean correlation; the first pick earns 0.
inline double corr_reward(const BandStats& stats, std::span<const BandIndex> prev,
                          std::span<const BandIndex> next) {
  const BandIndex added = detail::added_band(prev, next);
  if (added >= stats.bands()) throw Error(ErrorCode::kIndexOutOfRange, "added band");
  if (prev.empty()) return 0.0;
  return mean_correlation(stats, prev) - mean_correlation(stats, next);
}

}  // namespace bandsel
