#pragma once

// Supervised check of a band subset: stratified train/test split, k-NN on the
// selected bands, and OA / AA / Cohen's kappa over repeated seeded runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bandsel/error.hpp"
#include "bandsel/hsi_data.hpp"

namespace bandsel {

struct SplitSpec {
  double per_class_ratio = 0.1;
  std::size_t min_per_class = 1;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class c with n_c labeled pixels, max(min_per_class, round(ratio * n_c))
/// of them (capped at n_c) go to training, chosen uniformly. Label 0 is
/// ignored. Both index lists come back ascending.
inline Split stratified_split(std::span<const ClassId> labels, const SplitSpec& spec) {
  if (!(spec.per_class_ratio > 0.0 && spec.per_class_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "per-class ratio must lie in (0, 1]");
  }
  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] != 0) by_class[labels[p]].push_back(p);
  }
  if (by_class.empty()) throw Error(ErrorCode::kEmptyClass, "no labeled pixels");

  std::mt19937_64 rng(spec.seed);
  Split out;
  for (auto& [cls, members] : by_class) {
    const std::size_t n = members.size();
    auto want = static_cast<std::size_t>(std::llround(spec.per_class_ratio * static_cast<double>(n)));
    want = std::min(n, std::max(spec.min_per_class, want));
    std::shuffle(members.begin(), members.end(), rng);
    out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(want));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(want), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

/// Row-major samples x dims feature block.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t dims = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t r) const { return {data.data() + r * dims, dims}; }
};

/// Values of `bands` at the given pixels.
inline FeatureMatrix extract_features(const HyperspectralImage& image,
                                      std::span<const BandIndex> bands,
                                      std::span<const std::size_t> pixels) {
  FeatureMatrix f{pixels.size(), bands.size(), std::vector<double>(pixels.size() * bands.size())};
  for (std::size_t d = 0; d < bands.size(); ++d) {
    auto row = image.band(bands[d]);
    for (std::size_t r = 0; r < pixels.size(); ++r) f.data[r * f.dims + d] = row[pixels[r]];
  }
  return f;
}

/// Standardizes both blocks with the training block's per-dimension mean and
/// population std (dimensions with zero spread are only centered).
inline void zscore_inplace(FeatureMatrix& train, FeatureMatrix& test) {
  for (std::size_t d = 0; d < train.dims; ++d) {
    double mean = 0.0;
    for (std::size_t r = 0; r < train.rows; ++r) mean += train.data[r * train.dims + d];
    mean /= static_cast<double>(train.rows);
    double var = 0.0;
    for (std::size_t r = 0; r < train.rows; ++r) {
      const double c = train.data[r * train.dims + d] - mean;
      var += c * c;
    }
    const double sd = std::sqrt(var / static_cast<double>(train.rows));
    const double scale = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t r = 0; r < train.rows; ++r) {
      auto& v = train.data[r * train.dims + d];
      v = (v - mean) * scale;
    }
    for (std::size_t r = 0; r < test.rows; ++r) {
      auto& v = test.data[r * test.dims + d];
      v = (v - mean) * scale;
    }
  }
}

/// Brute-force k-NN with Euclidean distance. Distance ties go to the lower
/// training index; vote ties go to the smallest class id.
inline std::vector<ClassId> knn_classify(const FeatureMatrix& train,
                                         std::span<const ClassId> train_labels,
                                         const FeatureMatrix& test, std::size_t k) {
  if (train.rows == 0) throw Error(ErrorCode::kEmptyTrainingSet, "no training samples");
  if (train_labels.size() != train.rows) {
    throw Error(ErrorCode::kSizeMismatch, "one label per training sample required");
  }
  if (k == 0 || k > train.rows) {
    throw Error(ErrorCode::kInvalidConfig, "k=" + std::to_string(k) + " must lie in [1, " +
                                               std::to_string(train.rows) + "]");
  }
  if (test.rows > 0 && test.dims != train.dims) {
    throw Error(ErrorCode::kShapeMismatch, "train/test feature widths differ");
  }
  std::vector<ClassId> out(test.rows);
  std::vector<std::pair<double, std::size_t>> dist(train.rows);
  std::map<ClassId, std::size_t> votes;
  for (std::size_t t = 0; t < test.rows; ++t) {
    auto x = test.row(t);
    for (std::size_t r = 0; r < train.rows; ++r) {
      auto y = train.row(r);
      double d2 = 0.0;
      for (std::size_t d = 0; d < train.dims; ++d) {
        const double diff = x[d] - y[d];
        d2 += diff * diff;
      }
      dist[r] = {d2, r};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    votes.clear();
    for (std::size_t i = 0; i < k; ++i) ++votes[train_labels[dist[i].second]];
    ClassId best = votes.begin()->first;
    std::size_t best_votes = 0;
    for (auto [cls, n] : votes) {
      if (n > best_votes) {
        best = cls;
        best_votes = n;
      }
    }
    out[t] = best;
  }
  return out;
}

/// Counts indexed [true class][predicted class] over `classes` (ascending ids).
struct ConfusionMatrix {
  std::vector<ClassId> classes;
  std::vector<std::uint64_t> counts;

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix m;
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (rows[c].size() != rows.size()) throw Error(ErrorCode::kShapeMismatch, "confusion must be square");
      m.classes.push_back(static_cast<ClassId>(c + 1));
      m.counts.insert(m.counts.end(), rows[c].begin(), rows[c].end());
    }
    return m;
  }

  static ConfusionMatrix tally(std::vector<ClassId> classes, std::span<const ClassId> truth,
                               std::span<const ClassId> predicted) {
    if (truth.size() != predicted.size()) {
      throw Error(ErrorCode::kSizeMismatch, "truth / prediction lengths differ");
    }
    std::sort(classes.begin(), classes.end());
    ConfusionMatrix m{classes, std::vector<std::uint64_t>(classes.size() * classes.size(), 0)};
    auto index = [&](ClassId c) {
      auto it = std::lower_bound(m.classes.begin(), m.classes.end(), c);
      if (it == m.classes.end() || *it != c) {
        throw Error(ErrorCode::kIndexOutOfRange, "class " + std::to_string(c) + " not in class list");
      }
      return static_cast<std::size_t>(it - m.classes.begin());
    };
    for (std::size_t i = 0; i < truth.size(); ++i) ++m.at(index(truth[i]), index(predicted[i]));
    return m;
  }

  std::size_t size() const noexcept { return classes.size(); }
  std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * size() + p]; }
  std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * size() + p]; }
  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
};

struct Metrics {
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;
  double kappa = 0.0;
};

/// OA = trace / total; AA = mean per-class recall over classes present in the
/// truth; kappa = (p_o - p_e) / (1 - p_e), evaluated in integer arithmetic as
/// (N trace - S) / (N^2 - S) with S = sum_c row_c col_c. When p_e = 1 kappa is
/// reported as 1 for perfect agreement and 0 otherwise.
inline Metrics metrics(const ConfusionMatrix& m) {
  const std::size_t c = m.size();
  if (m.counts.size() != c * c) throw Error(ErrorCode::kShapeMismatch, "confusion must be C x C");
  const std::uint64_t total = m.total();
  if (total == 0) throw Error(ErrorCode::kEmptyConfusion, "confusion matrix is empty");

  std::uint64_t trace = 0;
  std::uint64_t chance = 0;
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < c; ++i) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += m.at(i, j);
      col += m.at(j, i);
    }
    trace += m.at(i, i);
    chance += row * col;
    if (row > 0) {
      recall_sum += static_cast<double>(m.at(i, i)) / static_cast<double>(row);
      ++present;
    }
  }
  Metrics out;
  out.overall_accuracy = static_cast<double>(trace) / static_cast<double>(total);
  out.average_accuracy = recall_sum / static_cast<double>(present);
  const std::uint64_t total_sq = total * total;
  if (chance == total_sq) {
    out.kappa = trace == total ? 1.0 : 0.0;
  } else {
    const auto num = static_cast<double>(static_cast<std::int64_t>(total * trace) -
                                         static_cast<std::int64_t>(chance));
    out.kappa = num / static_cast<double>(total_sq - chance);
  }
  return out;
}

struct EvalOptions {
  SplitSpec split;
  std::size_t neighbors = 3;
  std::size_t runs = 10;
  bool zscore = false;
  unsigned threads = 1;
};

struct RunResult {
  std::uint64_t seed = 0;
  Metrics metrics;
  ConfusionMatrix confusion;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct EvalReport {
  std::size_t runs = 0;
  double oa_mean = 0.0, oa_std = 0.0;
  double aa_mean = 0.0, aa_std = 0.0;
  double kappa_mean = 0.0, kappa_std = 0.0;
  std::vector<RunResult> per_run;
};

namespace detail {

inline std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs) {
  const auto n = static_cast<double>(xs.size());
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace detail

/// One split + k-NN + metrics pass.
inline RunResult evaluate_once(const HyperspectralImage& image, std::span<const BandIndex> bands,
                               const EvalOptions& options, std::uint64_t seed) {
  SplitSpec spec = options.split;
  spec.seed = seed;
  const Split split = stratified_split(image.labels(), spec);
  FeatureMatrix train = extract_features(image, bands, split.train);
  FeatureMatrix test = extract_features(image, bands, split.test);
  if (options.zscore) zscore_inplace(train, test);

  std::vector<ClassId> train_labels, test_labels;
  for (auto p : split.train) train_labels.push_back(image.labels()[p]);
  for (auto p : split.test) test_labels.push_back(image.labels()[p]);
  std::vector<ClassId> classes(train_labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  const auto predicted = knn_classify(train, train_labels, test, options.neighbors);
  RunResult r;
  r.seed = seed;
  r.train_size = split.train.size();
  r.test_size = split.test.size();
  r.confusion = ConfusionMatrix::tally(classes, test_labels, predicted);
  if (!test_labels.empty()) r.metrics = metrics(r.confusion);
  return r;
}

/// `runs` independent splits seeded (split.seed + run); sample std across runs.
inline EvalReport repeated_eval(const HyperspectralImage& image, std::span<const BandIndex> bands,
                                const EvalOptions& options) {
  if (!image.has_labels()) throw Error(ErrorCode::kEmptyClass, "image has no labels");
  if (bands.empty()) throw Error(ErrorCode::kEmptySubset, "no bands to evaluate");
  if (options.runs == 0) throw Error(ErrorCode::kInvalidConfig, "runs must be >= 1");
  for (auto b : bands) {
    if (b >= image.bands()) throw Error(ErrorCode::kIndexOutOfRange, "band " + std::to_string(b));
  }

  EvalReport report;
  report.runs = options.runs;
  report.per_run.resize(options.runs);
  auto work = [&](std::size_t worker, std::size_t workers) {
    for (std::size_t run = worker; run < options.runs; run += workers) {
      report.per_run[run] = evaluate_once(image, bands, options, options.split.seed + run);
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(options.threads, options.runs));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }

  std::vector<double> oa, aa, kappa;
  for (const auto& r : report.per_run) {
    oa.push_back(r.metrics.overall_accuracy);
    aa.push_back(r.metrics.average_accuracy);
    kappa.push_back(r.metrics.kappa);
  }
  std::tie(report.oa_mean, report.oa_std) = detail::mean_and_sample_std(oa);
  std::tie(report.aa_mean, report.aa_std) = detail::mean_and_sample_std(aa);
  std::tie(report.kappa_mean, report.kappa_std) = detail::mean_and_sample_std(kappa);
  return report;
}

}  // namespace bandsel
