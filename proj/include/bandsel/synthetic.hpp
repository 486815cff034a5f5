#pragma once

// Seeded synthetic scenes for tests, benchmarks, and `bandsel synth`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bandsel/hsi_data.hpp"

namespace bandsel {

/// Band i takes round(2^(1 + (max_log2 - 1) * i / (L - 1))) distinct values,
/// each equally often, so entropies rise strictly with the level count. Levels
/// are assigned to bands in shuffled order and pixels are shuffled per band.
inline HyperspectralImage entropy_ladder_scene(std::size_t bands, std::size_t pixels,
                                               std::uint64_t seed, double max_log2 = 8.0) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> levels(bands);
  for (std::size_t i = 0; i < bands; ++i) {
    const double t = bands > 1 ? static_cast<double>(i) / static_cast<double>(bands - 1) : 0.0;
    levels[i] = static_cast<std::size_t>(std::lround(std::pow(2.0, 1.0 + (max_log2 - 1.0) * t)));
  }
  std::shuffle(levels.begin(), levels.end(), rng);
  std::vector<std::vector<double>> rows(bands, std::vector<double>(pixels));
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t p = 0; p < pixels; ++p) rows[b][p] = static_cast<double>(p % levels[b]);
    std::shuffle(rows[b].begin(), rows[b].end(), rng);
  }
  return HyperspectralImage::from_rows(rows);
}

/// Each band is a random signed mix of `sources` Gaussian latent signals plus
/// independent noise, which yields a spread of positive and negative
/// inter-band correlations.
inline HyperspectralImage mixed_source_scene(std::size_t bands, std::size_t pixels,
                                             std::size_t sources, double noise,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> weight(-1.0, 1.0);
  std::vector<std::vector<double>> latent(sources, std::vector<double>(pixels));
  for (auto& s : latent) {
    for (double& x : s) x = gauss(rng);
  }
  std::vector<std::vector<double>> rows(bands, std::vector<double>(pixels, 0.0));
  for (auto& row : rows) {
    for (const auto& s : latent) {
      const double w = weight(rng);
      for (std::size_t p = 0; p < pixels; ++p) row[p] += w * s[p];
    }
    for (double& x : row) x += noise * gauss(rng);
  }
  return HyperspectralImage::from_rows(rows);
}

/// Labeled scene: `classes` classes of equal size, each with its own mean
/// spectrum; pixels are the class mean plus Gaussian noise of `spread`.
inline HyperspectralImage labeled_scene(std::size_t bands, std::size_t pixels, std::size_t classes,
                                        double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> level(0.0, 10.0);
  std::vector<std::vector<double>> means(classes, std::vector<double>(bands));
  for (auto& m : means) {
    for (double& x : m) x = level(rng);
  }
  std::vector<std::vector<double>> rows(bands, std::vector<double>(pixels));
  std::vector<ClassId> labels(pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::size_t c = p % classes;
    labels[p] = static_cast<ClassId>(c + 1);
    for (std::size_t b = 0; b < bands; ++b) rows[b][p] = means[c][b] + spread * gauss(rng);
  }
  auto image = HyperspectralImage::from_rows(rows);
  image.set_labels(std::move(labels));
  return image;
}

}  // namespace bandsel
