#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "bandsel/error.hpp"
#include "bandsel/hsi_data.hpp"

namespace bandsel::testing {

/// Fresh scratch directory per test, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "scratch";
    path_ = std::filesystem::temp_directory_path() / ("bandsel_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline HyperspectralImage random_image(std::size_t bands, std::size_t pixels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows(bands, std::vector<double>(pixels));
  for (auto& r : rows) {
    for (double& v : r) v = g(rng);
  }
  return HyperspectralImage::from_rows(rows);
}

}  // namespace bandsel::testing

#define EXPECT_BANDSEL_ERROR(stmt, expected_code)                        \
  do {                                                                   \
    try {                                                                \
      stmt;                                                              \
      ADD_FAILURE() << "expected " << ::bandsel::to_string(expected_code); \
    } catch (const ::bandsel::Error& e) {                                \
      EXPECT_EQ(e.code(), expected_code) << e.what();                    \
    }                                                                    \
  } while (0)
