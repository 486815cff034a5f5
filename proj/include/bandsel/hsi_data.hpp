#pragma once

// Hyperspectral raster model plus the two on-disk formats we read: a plain
// CSV layout (one band per row) and a small ENVI subset (BSQ, little-endian
// float32 / uint16, text header).

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bandsel/error.hpp"

namespace bandsel {

using BandIndex = std::size_t;
using ClassId = int;

/// L bands x N pixels of radiance samples, stored band-major (BSQ order), with
/// optional wavelengths and per-pixel class labels (0 = unlabeled).
///
/// `band_numbers()` maps each current band to its index in the file it was
/// loaded from, so selections survive `remove_bands`.
class HyperspectralImage {
 public:
  HyperspectralImage() = default;

  HyperspectralImage(std::size_t bands, std::size_t pixels, std::vector<double> values)
      : bands_(bands), pixels_(pixels), values_(std::move(values)) {
    if (bands_ == 0 || pixels_ == 0) {
      throw Error(ErrorCode::kSizeMismatch, "image needs at least one band and one pixel");
    }
    if (values_.size() != bands_ * pixels_) {
      throw Error(ErrorCode::kSizeMismatch,
                  "value count " + std::to_string(values_.size()) + " != bands*pixels " +
                      std::to_string(bands_ * pixels_));
    }
    for (std::size_t b = 0; b < bands_; ++b) {
      for (std::size_t p = 0; p < pixels_; ++p) {
        if (!std::isfinite(values_[b * pixels_ + p])) {
          throw Error(ErrorCode::kNonFiniteValue,
                      "band " + std::to_string(b) + " pixel " + std::to_string(p));
        }
      }
    }
    band_numbers_.resize(bands_);
    for (std::size_t b = 0; b < bands_; ++b) band_numbers_[b] = b;
  }

  /// Builds an image from per-band rows (each row holds N samples).
  static HyperspectralImage from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error(ErrorCode::kSizeMismatch, "no bands");
    const std::size_t n = rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * n);
    for (std::size_t b = 0; b < rows.size(); ++b) {
      if (rows[b].size() != n) {
        throw Error(ErrorCode::kSizeMismatch, "band " + std::to_string(b) + " has " +
                                                  std::to_string(rows[b].size()) +
                                                  " pixels, expected " + std::to_string(n));
      }
      values.insert(values.end(), rows[b].begin(), rows[b].end());
    }
    return HyperspectralImage(rows.size(), n, std::move(values));
  }

  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return pixels_; }

  std::span<const double> band(BandIndex b) const {
    check_band(b);
    return {values_.data() + b * pixels_, pixels_};
  }
  double at(BandIndex b, std::size_t pixel) const { return values_[b * pixels_ + pixel]; }
  std::span<const double> values() const noexcept { return values_; }

  bool has_labels() const noexcept { return !labels_.empty(); }
  std::span<const ClassId> labels() const noexcept { return labels_; }
  void set_labels(std::vector<ClassId> labels) {
    if (labels.size() != pixels_) {
      throw Error(ErrorCode::kSizeMismatch, "label count " + std::to_string(labels.size()) +
                                                " != pixel count " + std::to_string(pixels_));
    }
    for (std::size_t p = 0; p < labels.size(); ++p) {
      if (labels[p] < 0) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    "negative class id at pixel " + std::to_string(p));
      }
    }
    labels_ = std::move(labels);
  }

  std::span<const double> wavelengths() const noexcept { return wavelengths_; }
  void set_wavelengths(std::vector<double> nm) {
    if (!nm.empty() && nm.size() != bands_) {
      throw Error(ErrorCode::kSizeMismatch, "wavelength count " + std::to_string(nm.size()) +
                                                " != band count " + std::to_string(bands_));
    }
    wavelengths_ = std::move(nm);
  }

  std::span<const BandIndex> band_numbers() const noexcept { return band_numbers_; }
  BandIndex original_band(BandIndex b) const {
    check_band(b);
    return band_numbers_[b];
  }
  void set_band_numbers(std::vector<BandIndex> numbers) {
    if (numbers.size() != bands_) throw Error(ErrorCode::kSizeMismatch, "band number table");
    band_numbers_ = std::move(numbers);
  }

 private:
  void check_band(BandIndex b) const {
    if (b >= bands_) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "band " + std::to_string(b) + " >= " + std::to_string(bands_));
    }
  }

  std::size_t bands_ = 0;
  std::size_t pixels_ = 0;
  std::vector<double> values_;
  std::vector<double> wavelengths_;
  std::vector<ClassId> labels_;
  std::vector<BandIndex> band_numbers_;
};

/// Drops the listed bands. Survivors keep their relative order and their
/// original numbering (see `HyperspectralImage::band_numbers`).
inline HyperspectralImage remove_bands(const HyperspectralImage& image,
                                       std::span<const BandIndex> drop) {
  std::vector<bool> dropped(image.bands(), false);
  for (BandIndex b : drop) {
    if (b >= image.bands()) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "drop index " + std::to_string(b) + " >= " + std::to_string(image.bands()));
    }
    dropped[b] = true;
  }
  std::vector<double> values;
  std::vector<BandIndex> numbers;
  std::vector<double> wavelengths;
  for (BandIndex b = 0; b < image.bands(); ++b) {
    if (dropped[b]) continue;
    auto row = image.band(b);
    values.insert(values.end(), row.begin(), row.end());
    numbers.push_back(image.original_band(b));
    if (!image.wavelengths().empty()) wavelengths.push_back(image.wavelengths()[b]);
  }
  if (numbers.empty()) throw Error(ErrorCode::kEmptyResult, "every band was dropped");
  HyperspectralImage out(numbers.size(), image.pixels(), std::move(values));
  out.set_band_numbers(std::move(numbers));
  out.set_wavelengths(std::move(wavelengths));
  if (image.has_labels()) {
    out.set_labels(std::vector<ClassId>(image.labels().begin(), image.labels().end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quantization

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
};

inline ValueRange band_range(const HyperspectralImage& image, BandIndex b) {
  auto row = image.band(b);
  auto [lo, hi] = std::minmax_element(row.begin(), row.end());
  return {*lo, *hi};
}

inline ValueRange global_range(const HyperspectralImage& image) {
  auto all = image.values();
  auto [lo, hi] = std::minmax_element(all.begin(), all.end());
  return {*lo, *hi};
}

struct QuantizedBand {
  BandIndex band_index = 0;
  std::size_t bin_count = 1;
  std::vector<std::uint32_t> codes;
};

/// code = floor((v - min) / (max - min) * bins), clamped to [0, bins - 1].
/// A degenerate range maps every pixel to code 0.
inline QuantizedBand quantize_band(const HyperspectralImage& image, BandIndex b,
                                   std::size_t bin_count, ValueRange range) {
  if (bin_count == 0) throw Error(ErrorCode::kInvalidConfig, "bin_count must be >= 1");
  auto row = image.band(b);
  QuantizedBand q{b, bin_count, std::vector<std::uint32_t>(row.size(), 0)};
  const double width = range.max - range.min;
  if (!(width > 0.0)) return q;
  const auto bins = static_cast<double>(bin_count);
  const auto top = static_cast<double>(bin_count - 1);
  for (std::size_t p = 0; p < row.size(); ++p) {
    double code = std::floor((row[p] - range.min) / width * bins);
    q.codes[p] = static_cast<std::uint32_t>(std::clamp(code, 0.0, top));
  }
  return q;
}

inline QuantizedBand quantize_band(const HyperspectralImage& image, BandIndex b,
                                   std::size_t bin_count = 256) {
  return quantize_band(image, b, bin_count, band_range(image, b));
}

// ---------------------------------------------------------------------------
// File formats

enum class ImageFormat { kEnviBsq, kCsv };

namespace detail {

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n\v\f";
  auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(ws);
  return std::string(s.substr(first, last - first + 1));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool parse_double(std::string_view token, double& out) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

/// Splits on commas; a line with only whitespace yields no tokens.
inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  if (trim(line).empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto end = nl == std::string::npos ? text.size() : nl;
    ++line_no;
    fn(std::string_view(text).substr(start, end - start), line_no);
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
}

template <typename T>
T load_le(const char* bytes) {
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* p = reinterpret_cast<unsigned char*>(&value);
    std::reverse(p, p + sizeof(T));
  }
  return value;
}

template <typename T>
void store_le(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(bytes, sizeof(T));
}

}  // namespace detail

/// Class ids from a CSV/whitespace separated integer list, or from a
/// single-band ENVI raster when `path` ends in `.hdr`.
inline std::vector<ClassId> load_labels(const std::filesystem::path& path);

inline HyperspectralImage load_csv_image(const std::filesystem::path& path) {
  const std::string text = detail::read_text(path);
  std::vector<std::vector<double>> rows;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') return;
    auto tokens = detail::split_csv(line);
    std::vector<double> row;
    row.reserve(tokens.size());
    for (std::size_t col = 0; col < tokens.size(); ++col) {
      double v = 0.0;
      if (!detail::parse_double(tokens[col], v)) {
        auto lowered = detail::lower(detail::trim(tokens[col]));
        if (lowered.find("nan") != std::string::npos || lowered.find("inf") != std::string::npos) {
          throw Error(ErrorCode::kNonFiniteValue, "band " + std::to_string(rows.size()) +
                                                      " pixel " + std::to_string(col));
        }
        throw Error(ErrorCode::kMalformedHeader, path.string() + ":" + std::to_string(line_no) +
                                                     ": cannot parse '" +
                                                     std::string(tokens[col]) + "'");
      }
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFiniteValue,
                    "band " + std::to_string(rows.size()) + " pixel " + std::to_string(col));
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  });
  if (rows.empty()) throw Error(ErrorCode::kMalformedHeader, path.string() + ": no band rows");
  return HyperspectralImage::from_rows(rows);
}

/// Parsed `key = value` pairs of an ENVI header. Keys are lower-cased, braces
/// may span lines.
struct EnviHeader {
  std::size_t samples = 0;
  std::size_t lines = 0;
  std::size_t bands = 0;
  int data_type = 0;
  std::string interleave = "bsq";
  int byte_order = 0;
  std::size_t header_offset = 0;
  std::vector<double> wavelengths;
  std::map<std::string, std::string> fields;

  std::size_t bytes_per_sample() const {
    switch (data_type) {
      case 4: return 4;
      case 12: return 2;
      default: return 0;
    }
  }
};

inline EnviHeader parse_envi_header(const std::string& text) {
  EnviHeader h;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (first) {
      first = false;
      if (t != "ENVI") throw Error(ErrorCode::kMalformedHeader, "missing ENVI magic line");
      continue;
    }
    if (t.empty() || t.front() == ';') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kMalformedHeader, "bad line: " + t);
    auto key = detail::lower(detail::trim(t.substr(0, eq)));
    auto value = detail::trim(t.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos) {
        std::string more;
        if (!std::getline(in, more)) {
          throw Error(ErrorCode::kMalformedHeader, "unterminated brace in '" + key + "'");
        }
        value += " " + detail::trim(more);
      }
    }
    h.fields[key] = value;
  }
  if (first) throw Error(ErrorCode::kMalformedHeader, "empty header");

  auto required = [&](const std::string& key) -> std::size_t {
    auto it = h.fields.find(key);
    if (it == h.fields.end()) throw Error(ErrorCode::kMalformedHeader, "missing key '" + key + "'");
    double v = 0.0;
    if (!detail::parse_double(it->second, v) || v < 0 || v != std::floor(v)) {
      throw Error(ErrorCode::kMalformedHeader, "bad integer for '" + key + "': " + it->second);
    }
    return static_cast<std::size_t>(v);
  };
  h.samples = required("samples");
  h.lines = required("lines");
  h.bands = required("bands");
  h.data_type = static_cast<int>(required("data type"));
  if (h.fields.count("header offset")) h.header_offset = required("header offset");
  if (h.fields.count("byte order")) h.byte_order = static_cast<int>(required("byte order"));
  if (auto it = h.fields.find("interleave"); it != h.fields.end()) {
    h.interleave = detail::lower(it->second);
  }
  if (auto it = h.fields.find("wavelength"); it != h.fields.end()) {
    auto body = it->second;
    body.erase(std::remove(body.begin(), body.end(), '{'), body.end());
    body.erase(std::remove(body.begin(), body.end(), '}'), body.end());
    for (auto token : detail::split_csv(body)) {
      double v = 0.0;
      if (!detail::parse_double(token, v)) {
        throw Error(ErrorCode::kMalformedHeader, "bad wavelength '" + std::string(token) + "'");
      }
      h.wavelengths.push_back(v);
    }
  }
  if (h.samples == 0 || h.lines == 0 || h.bands == 0) {
    throw Error(ErrorCode::kMalformedHeader, "zero-sized raster");
  }
  if (h.interleave != "bsq") {
    throw Error(ErrorCode::kUnsupportedDtype, "interleave '" + h.interleave + "' (only bsq)");
  }
  if (h.byte_order != 0) {
    throw Error(ErrorCode::kUnsupportedDtype, "big-endian payloads are not supported");
  }
  if (h.bytes_per_sample() == 0) {
    throw Error(ErrorCode::kUnsupportedDtype,
                "data type " + std::to_string(h.data_type) + " (only 4=float32, 12=uint16)");
  }
  return h;
}

namespace detail {

inline std::filesystem::path envi_header_path(const std::filesystem::path& path) {
  if (path.extension() == ".hdr") return path;
  auto hdr = path;
  hdr.replace_extension(".hdr");
  return hdr;
}

inline std::filesystem::path envi_payload_path(const std::filesystem::path& header) {
  for (const char* ext : {".raw", ".img", ".dat", ".bsq", ""}) {
    auto candidate = header;
    candidate.replace_extension(ext);
    if (candidate != header && std::filesystem::exists(candidate)) return candidate;
  }
  auto raw = header;
  raw.replace_extension(".raw");
  throw Error(ErrorCode::kIo, "no payload next to " + header.string() + " (expected " +
                                  raw.string() + ")");
}

/// Raw samples in BSQ order as doubles; validates size and finiteness.
inline std::vector<double> read_envi_payload(const EnviHeader& h,
                                             const std::filesystem::path& payload) {
  const std::string bytes = read_text(payload);
  const std::size_t count = h.samples * h.lines * h.bands;
  const std::size_t expected = h.header_offset + count * h.bytes_per_sample();
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kSizeMismatch, payload.string() + " holds " +
                                              std::to_string(bytes.size()) + " bytes, header implies " +
                                              std::to_string(expected));
  }
  std::vector<double> values(count);
  const char* base = bytes.data() + h.header_offset;
  const std::size_t pixels = h.samples * h.lines;
  for (std::size_t i = 0; i < count; ++i) {
    double v = h.data_type == 4 ? static_cast<double>(load_le<float>(base + 4 * i))
                                : static_cast<double>(load_le<std::uint16_t>(base + 2 * i));
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteValue,
                  "band " + std::to_string(i / pixels) + " pixel " + std::to_string(i % pixels));
    }
    values[i] = v;
  }
  return values;
}

}  // namespace detail

inline HyperspectralImage load_envi_image(const std::filesystem::path& path) {
  const auto header_path = detail::envi_header_path(path);
  const EnviHeader h = parse_envi_header(detail::read_text(header_path));
  auto values = detail::read_envi_payload(h, detail::envi_payload_path(header_path));
  HyperspectralImage image(h.bands, h.samples * h.lines, std::move(values));
  if (!h.wavelengths.empty()) image.set_wavelengths(h.wavelengths);
  return image;
}

inline std::vector<ClassId> load_labels(const std::filesystem::path& path) {
  std::vector<ClassId> labels;
  if (path.extension() == ".hdr") {
    const EnviHeader h = parse_envi_header(detail::read_text(path));
    if (h.bands != 1) throw Error(ErrorCode::kMalformedHeader, "label raster must be single-band");
    for (double v : detail::read_envi_payload(h, detail::envi_payload_path(path))) {
      if (v < 0 || v != std::floor(v)) {
        throw Error(ErrorCode::kMalformedHeader, "label raster holds non-integer class ids");
      }
      labels.push_back(static_cast<ClassId>(v));
    }
    return labels;
  }
  const std::string text = detail::read_text(path);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    ClassId v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || v < 0) {
      throw Error(ErrorCode::kMalformedHeader, path.string() + ": bad class id '" + token + "'");
    }
    labels.push_back(v);
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == '\n' || c == '\r' || c == ' ' || c == '\t') {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return labels;
}

struct LoadOptions {
  /// Explicit label file; when unset `<stem>.labels.csv` is used if present.
  std::optional<std::filesystem::path> labels;
  bool discover_labels = true;
};

inline ImageFormat detect_format(const std::filesystem::path& path) {
  auto ext = detail::lower(path.extension().string());
  if (ext == ".csv") return ImageFormat::kCsv;
  if (ext == ".hdr" || ext == ".raw" || ext == ".img" || ext == ".bsq" || ext == ".dat") {
    return ImageFormat::kEnviBsq;
  }
  throw Error(ErrorCode::kUnsupportedDtype, "cannot infer image format from '" + ext + "'");
}

inline std::filesystem::path companion_labels_path(const std::filesystem::path& path) {
  auto stem = path;
  stem.replace_extension();
  return std::filesystem::path(stem.string() + ".labels.csv");
}

inline HyperspectralImage load_image(const std::filesystem::path& path, ImageFormat format,
                                     const LoadOptions& options = {}) {
  if (format == ImageFormat::kCsv && !std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIo, "no such file " + path.string());
  }
  HyperspectralImage image =
      format == ImageFormat::kCsv ? load_csv_image(path) : load_envi_image(path);
  std::optional<std::filesystem::path> labels = options.labels;
  if (!labels && options.discover_labels) {
    auto companion = companion_labels_path(path);
    if (std::filesystem::exists(companion)) labels = companion;
  }
  if (labels) image.set_labels(load_labels(*labels));
  return image;
}

inline HyperspectralImage load_image(const std::filesystem::path& path,
                                     const LoadOptions& options = {}) {
  return load_image(path, detect_format(path), options);
}

/// Writes one band per row with round-trip precision, plus the companion
/// label file when the image carries labels.
inline void save_csv_image(const HyperspectralImage& image, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (BandIndex b = 0; b < image.bands(); ++b) {
    auto row = image.band(b);
    for (std::size_t p = 0; p < row.size(); ++p) {
      if (p) out << ',';
      out << row[p];
    }
    out << '\n';
  }
  if (image.has_labels()) {
    std::ofstream lab(companion_labels_path(path));
    if (!lab) throw Error(ErrorCode::kIo, "cannot write labels next to " + path.string());
    for (std::size_t p = 0; p < image.pixels(); ++p) {
      if (p) lab << ',';
      lab << image.labels()[p];
    }
    lab << '\n';
  }
}

/// Writes `<stem>.hdr` + `<stem>.raw` as a single-line float32 BSQ raster.
inline void save_envi_image(const HyperspectralImage& image, const std::filesystem::path& stem) {
  auto hdr = stem;
  hdr.replace_extension(".hdr");
  auto raw = stem;
  raw.replace_extension(".raw");
  {
    std::ofstream out(hdr);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + hdr.string());
    out << "ENVI\nsamples = " << image.pixels() << "\nlines = 1\nbands = " << image.bands()
        << "\nheader offset = 0\ndata type = 4\ninterleave = bsq\nbyte order = 0\n";
    if (!image.wavelengths().empty()) {
      out << "wavelength = {";
      for (std::size_t b = 0; b < image.bands(); ++b) {
        out << (b ? ", " : " ") << image.wavelengths()[b];
      }
      out << " }\n";
    }
  }
  std::ofstream out(raw, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + raw.string());
  for (double v : image.values()) detail::store_le(out, static_cast<float>(v));
}

}  // namespace bandsel
