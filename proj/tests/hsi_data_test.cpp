#include <cmath>
#include <limits>

#include "bandsel/hsi_data.hpp"
#include "support.hpp"

using namespace bandsel;
using bandsel::testing::TempDir;
using bandsel::testing::write_file;

namespace {

void write_float_payload(const std::filesystem::path& p, const std::vector<float>& v) {
  std::ofstream out(p, std::ios::binary);
  for (float x : v) detail::store_le(out, x);
}

}  // namespace

TEST(LoadImage, CsvThreeBandsFourPixels) {
  TempDir dir;
  write_file(dir / "a.csv", "1,2,3,4\n5,6,7,8\n9,10,11,12.5\n");
  const auto img = load_image(dir / "a.csv");
  EXPECT_EQ(img.bands(), 3u);
  EXPECT_EQ(img.pixels(), 4u);
  EXPECT_DOUBLE_EQ(img.at(2, 3), 12.5);
  EXPECT_DOUBLE_EQ(img.at(1, 0), 5.0);
  EXPECT_FALSE(img.has_labels());
}

TEST(LoadImage, CsvSkipsCommentsAndBlankLines) {
  TempDir dir;
  write_file(dir / "a.csv", "# header\n\n1, 2\n 3 ,4\r\n");
  const auto img = load_image(dir / "a.csv");
  EXPECT_EQ(img.bands(), 2u);
  EXPECT_DOUBLE_EQ(img.at(1, 0), 3.0);
}

TEST(LoadImage, CsvRaggedRowsAreSizeMismatch) {
  TempDir dir;
  write_file(dir / "a.csv", "1,2,3\n4,5\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "a.csv"), ErrorCode::kSizeMismatch);
}

TEST(LoadImage, CsvNonFiniteReportsLocation) {
  TempDir dir;
  write_file(dir / "a.csv", "1,2\n3,nan\n");
  try {
    load_image(dir / "a.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteValue);
    EXPECT_NE(std::string(e.what()).find("band 1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("pixel 1"), std::string::npos) << e.what();
  }
}

TEST(LoadImage, CsvGarbageTokenIsMalformed) {
  TempDir dir;
  write_file(dir / "a.csv", "1,abc\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "a.csv"), ErrorCode::kMalformedHeader);
}

TEST(LoadImage, MissingFileIsIoError) {
  TempDir dir;
  EXPECT_BANDSEL_ERROR(load_image(dir / "nope.csv"), ErrorCode::kIo);
  EXPECT_BANDSEL_ERROR(load_image(dir / "nope.hdr"), ErrorCode::kIo);
}

TEST(LoadImage, CompanionLabelsAreDiscovered) {
  TempDir dir;
  write_file(dir / "a.csv", "1,2,3\n");
  write_file(dir / "a.labels.csv", "0,2,1\n");
  const auto img = load_image(dir / "a.csv");
  ASSERT_TRUE(img.has_labels());
  EXPECT_EQ(std::vector<ClassId>(img.labels().begin(), img.labels().end()),
            (std::vector<ClassId>{0, 2, 1}));
}

TEST(LoadImage, LabelCountMustMatchPixels) {
  TempDir dir;
  write_file(dir / "a.csv", "1,2,3\n");
  write_file(dir / "a.labels.csv", "1,2\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "a.csv"), ErrorCode::kSizeMismatch);
}

TEST(LoadImage, EnviFloat32TwoBandsTwoByTwo) {
  TempDir dir;
  write_file(dir / "s.hdr",
             "ENVI\nsamples = 2\nlines = 2\nbands = 2\nheader offset = 0\n"
             "data type = 4\ninterleave = bsq\nbyte order = 0\n"
             "wavelength = {\n 400.5, 410.0 }\n");
  write_float_payload(dir / "s.raw", {1, 2, 3, 4, 5, 6, 7, 8});
  const auto img = load_image(dir / "s.hdr");
  EXPECT_EQ(img.bands(), 2u);
  EXPECT_EQ(img.pixels(), 4u);
  EXPECT_DOUBLE_EQ(img.at(1, 0), 5.0);
  EXPECT_DOUBLE_EQ(img.at(0, 3), 4.0);
  ASSERT_EQ(img.wavelengths().size(), 2u);
  EXPECT_DOUBLE_EQ(img.wavelengths()[0], 400.5);
}

TEST(LoadImage, EnviSixteenFloatsForTwoBandsIsSizeMismatch) {
  // 2 bands of a 2x2 frame need 8 floats; 16 is a payload/header disagreement.
  TempDir dir;
  write_file(dir / "s.hdr", "ENVI\nsamples = 2\nlines = 2\nbands = 2\ndata type = 4\n");
  write_float_payload(dir / "s.raw", std::vector<float>(16, 1.0f));
  EXPECT_BANDSEL_ERROR(load_image(dir / "s.hdr"), ErrorCode::kSizeMismatch);
}

TEST(LoadImage, EnviShortPayloadIsSizeMismatch) {
  TempDir dir;
  write_file(dir / "s.hdr", "ENVI\nsamples = 2\nlines = 1\nbands = 3\ndata type = 4\n");
  write_float_payload(dir / "s.raw", std::vector<float>(4, 1.0f));
  EXPECT_BANDSEL_ERROR(load_image(dir / "s.hdr"), ErrorCode::kSizeMismatch);
}

TEST(LoadImage, EnviUint16WithOffset) {
  TempDir dir;
  write_file(dir / "s.hdr",
             "ENVI\nsamples = 3\nlines = 1\nbands = 1\ndata type = 12\nheader offset = 2\n");
  std::ofstream out(dir / "s.raw", std::ios::binary);
  detail::store_le<std::uint16_t>(out, 0xFFFF);
  for (std::uint16_t v : {7, 300, 65535}) detail::store_le(out, v);
  out.close();
  const auto img = load_image(dir / "s.hdr");
  EXPECT_DOUBLE_EQ(img.at(0, 1), 300.0);
  EXPECT_DOUBLE_EQ(img.at(0, 2), 65535.0);
}

TEST(LoadImage, EnviRejectsUnsupportedLayouts) {
  TempDir dir;
  write_file(dir / "a.hdr", "ENVI\nsamples = 1\nlines = 1\nbands = 1\ndata type = 5\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "a.hdr"), ErrorCode::kUnsupportedDtype);
  write_file(dir / "b.hdr",
             "ENVI\nsamples = 1\nlines = 1\nbands = 1\ndata type = 4\ninterleave = bil\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "b.hdr"), ErrorCode::kUnsupportedDtype);
  write_file(dir / "c.hdr",
             "ENVI\nsamples = 1\nlines = 1\nbands = 1\ndata type = 4\nbyte order = 1\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "c.hdr"), ErrorCode::kUnsupportedDtype);
}

TEST(LoadImage, EnviHeaderProblemsAreMalformed) {
  TempDir dir;
  write_file(dir / "a.hdr", "samples = 1\nlines = 1\nbands = 1\ndata type = 4\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "a.hdr"), ErrorCode::kMalformedHeader);
  write_file(dir / "b.hdr", "ENVI\nsamples = 1\nbands = 1\ndata type = 4\n");
  EXPECT_BANDSEL_ERROR(load_image(dir / "b.hdr"), ErrorCode::kMalformedHeader);
}

TEST(LoadImage, EnviNonFiniteValue) {
  TempDir dir;
  write_file(dir / "s.hdr", "ENVI\nsamples = 2\nlines = 1\nbands = 1\ndata type = 4\n");
  write_float_payload(dir / "s.raw", {1.0f, std::numeric_limits<float>::infinity()});
  EXPECT_BANDSEL_ERROR(load_image(dir / "s.hdr"), ErrorCode::kNonFiniteValue);
}

TEST(LoadImage, EnviLabelRaster) {
  TempDir dir;
  write_file(dir / "gt.hdr", "ENVI\nsamples = 3\nlines = 1\nbands = 1\ndata type = 12\n");
  {
    std::ofstream out(dir / "gt.raw", std::ios::binary);
    for (std::uint16_t v : {0, 4, 2}) detail::store_le(out, v);
  }
  EXPECT_EQ(load_labels(dir / "gt.hdr"), (std::vector<ClassId>{0, 4, 2}));
}

TEST(RoundTrip, CsvPreservesDoublesExactly) {
  TempDir dir;
  auto img = bandsel::testing::random_image(5, 37, 3);
  img.set_labels(std::vector<ClassId>(37, 2));
  save_csv_image(img, dir / "r.csv");
  const auto back = load_image(dir / "r.csv");
  ASSERT_EQ(back.bands(), img.bands());
  for (std::size_t i = 0; i < img.values().size(); ++i) {
    EXPECT_EQ(back.values()[i], img.values()[i]);
  }
  EXPECT_TRUE(back.has_labels());
}

TEST(RoundTrip, EnviPreservesFloat32Precision) {
  TempDir dir;
  const auto img = bandsel::testing::random_image(3, 10, 4);
  save_envi_image(img, dir / "r");
  const auto back = load_image(dir / "r.hdr");
  ASSERT_EQ(back.pixels(), img.pixels());
  for (std::size_t i = 0; i < img.values().size(); ++i) {
    EXPECT_EQ(back.values()[i], static_cast<double>(static_cast<float>(img.values()[i])));
  }
}

TEST(Image, RejectsInvalidConstruction) {
  EXPECT_BANDSEL_ERROR(HyperspectralImage(0, 3, {}), ErrorCode::kSizeMismatch);
  EXPECT_BANDSEL_ERROR(HyperspectralImage(2, 2, {1, 2, 3}), ErrorCode::kSizeMismatch);
  HyperspectralImage img(1, 2, {1, 2});
  EXPECT_BANDSEL_ERROR(img.set_labels({1, -1}), ErrorCode::kIndexOutOfRange);
}

TEST(RemoveBands, IndianPinesWaterBandsLeave200) {
  std::vector<double> v(220 * 2);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  HyperspectralImage img(220, 2, std::move(v));
  std::vector<BandIndex> drop;
  for (BandIndex b = 103; b <= 107; ++b) drop.push_back(b);
  for (BandIndex b = 149; b <= 162; ++b) drop.push_back(b);
  drop.push_back(219);
  const auto out = remove_bands(img, drop);
  EXPECT_EQ(out.bands(), 200u);
  EXPECT_EQ(out.original_band(102), 102u);
  EXPECT_EQ(out.original_band(103), 108u);
  EXPECT_EQ(out.original_band(199), 218u);
  EXPECT_DOUBLE_EQ(out.at(103, 0), img.at(108, 0));
}

TEST(RemoveBands, EmptyDropIsIdentity) {
  const auto img = bandsel::testing::random_image(4, 6, 1);
  const auto out = remove_bands(img, {});
  EXPECT_EQ(out.bands(), 4u);
  EXPECT_TRUE(std::equal(out.values().begin(), out.values().end(), img.values().begin()));
}

TEST(RemoveBands, DroppingEverythingIsEmptyResult) {
  const auto img = bandsel::testing::random_image(3, 2, 1);
  std::vector<BandIndex> all{0, 1, 2};
  EXPECT_BANDSEL_ERROR(remove_bands(img, all), ErrorCode::kEmptyResult);
  std::vector<BandIndex> bad{3};
  EXPECT_BANDSEL_ERROR(remove_bands(img, bad), ErrorCode::kIndexOutOfRange);
}

TEST(RemoveBands, RemapMatchesNeverRemoving) {
  // Dropping twice keeps numbering relative to the first file.
  const auto img = bandsel::testing::random_image(10, 3, 2);
  std::vector<BandIndex> first{1, 4};
  const auto a = remove_bands(img, first);
  std::vector<BandIndex> second{0, 5};
  const auto b = remove_bands(a, second);
  for (BandIndex k = 0; k < b.bands(); ++k) {
    const BandIndex orig = b.original_band(k);
    EXPECT_TRUE(std::equal(b.band(k).begin(), b.band(k).end(), img.band(orig).begin()));
  }
  EXPECT_EQ(std::vector<BandIndex>(b.band_numbers().begin(), b.band_numbers().end()),
            (std::vector<BandIndex>{2, 3, 5, 6, 8, 9}));
}

TEST(Quantize, ConstantBandIsAllZero) {
  HyperspectralImage img(1, 4, {7, 7, 7, 7});
  for (std::size_t bins : {1u, 2u, 256u}) {
    const auto q = quantize_band(img, 0, bins);
    for (auto c : q.codes) EXPECT_EQ(c, 0u);
  }
}

TEST(Quantize, UniformPartitionOfFourValues) {
  HyperspectralImage img(1, 4, {0, 1, 2, 3});
  EXPECT_EQ(quantize_band(img, 0, 4).codes, (std::vector<std::uint32_t>{0, 1, 2, 3}));
}

TEST(Quantize, MaximumClampsToLastBin) {
  HyperspectralImage img(1, 3, {-2.0, 0.5, 9.0});
  const auto q = quantize_band(img, 0, 256);
  EXPECT_EQ(q.codes[0], 0u);
  EXPECT_EQ(q.codes[2], 255u);
}

TEST(Quantize, OutOfRangeBand) {
  HyperspectralImage img(1, 2, {0, 1});
  EXPECT_BANDSEL_ERROR(quantize_band(img, 1, 4), ErrorCode::kIndexOutOfRange);
  EXPECT_BANDSEL_ERROR(quantize_band(img, 0, 0), ErrorCode::kInvalidConfig);
}

TEST(QuantizeProperty, MonotoneAndCoversRange) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto img = bandsel::testing::random_image(1, 200, rng());
    const std::size_t bins = 1 + rng() % 300;
    const auto q = quantize_band(img, 0, bins);
    auto row = img.band(0);
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return row[a] < row[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      ASSERT_LE(q.codes[order[i - 1]], q.codes[order[i]]);
    }
    EXPECT_EQ(q.codes[order.front()], 0u);
    EXPECT_EQ(q.codes[order.back()], bins - 1);
    for (auto c : q.codes) ASSERT_LT(c, bins);
  }
}

TEST(QuantizeProperty, CodePreimagesAreIntervals) {
  // Sorting by value must never revisit a code once left.
  const auto img = bandsel::testing::random_image(1, 500, 9);
  const auto q = quantize_band(img, 0, 16);
  auto row = img.band(0);
  std::vector<std::pair<double, std::uint32_t>> pairs;
  for (std::size_t p = 0; p < row.size(); ++p) pairs.emplace_back(row[p], q.codes[p]);
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> closed(16, false);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto c = pairs[i].second;
    ASSERT_FALSE(closed[c]);
    if (i + 1 < pairs.size() && pairs[i + 1].second != c) closed[c] = true;
  }
}

TEST(Quantize, GlobalRangeOption) {
  HyperspectralImage img(2, 2, {0, 1, 2, 3});
  const auto q = quantize_band(img, 0, 4, global_range(img));
  EXPECT_EQ(q.codes, (std::vector<std::uint32_t>{0, 1}));
}
