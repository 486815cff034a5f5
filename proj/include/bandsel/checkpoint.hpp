#pragma once

// Policy checkpoints. The binary form ("BSELQNET", version 1) is
//
//   magic[8] | u32 version | u64 meta_len | meta JSON bytes
//   | 6 parameter tensors | u64 step | f64 lr, beta1, beta2, eps
//   | 6 first-moment tensors | 6 second-moment tensors
//   | u8 has_stats [ | u64 bin_count | entropies tensor | correlation tensor ]
//
// with each tensor stored as u64 rows | u64 cols | f64 data, all
// little-endian, so a save/load round trip is bit-exact. The JSON form holds
// the same content in one document.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bandsel/dqn_agent.hpp"
#include "bandsel/error.hpp"
#include "bandsel/hsi_data.hpp"
#include "bandsel/report.hpp"

namespace bandsel {

enum class CheckpointFormat { kBinary, kJson };

inline constexpr char kCheckpointMagic[8] = {'B', 'S', 'E', 'L', 'Q', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline Json policy_metadata(const TrainedPolicy& p) {
  return Json{{"bands", p.bands()},
              {"env", to_json(p.env)},
              {"train_config", to_json(p.config)},
              {"band_numbers", p.band_numbers},
              {"episodes", p.episodes},
              {"epsilon", p.epsilon},
              {"returns", p.returns},
              {"stopped_on_plateau", p.stopped_on_plateau},
              {"wall_seconds", p.wall_seconds}};
}

inline void apply_metadata(const Json& meta, TrainedPolicy& p) {
  p.env = env_from_json(meta.at("env"));
  p.config = train_config_from_json(meta.at("train_config"));
  p.band_numbers = meta.at("band_numbers").get<std::vector<BandIndex>>();
  p.episodes = meta.at("episodes").get<std::size_t>();
  p.epsilon = meta.at("epsilon").get<double>();
  p.returns = meta.at("returns").get<std::vector<double>>();
  p.stopped_on_plateau = meta.at("stopped_on_plateau").get<bool>();
  p.wall_seconds = meta.at("wall_seconds").get<double>();
}

class BinaryReader {
 public:
  explicit BinaryReader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T read() {
    need(sizeof(T));
    T v = load_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return v;
  }
  std::string read_bytes(std::size_t n) {
    need(n);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  Tensor read_tensor() {
    Tensor t;
    t.rows = read<std::uint64_t>();
    t.cols = read<std::uint64_t>();
    if (t.cols != 0 && t.rows > (bytes_.size() - pos_) / 8 / t.cols) {
      throw Error(ErrorCode::kSizeMismatch, "tensor larger than checkpoint");
    }
    t.data.resize(t.rows * t.cols);
    for (double& x : t.data) x = read<double>();
    return t;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kSizeMismatch, "checkpoint is truncated");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

inline void write_tensor(std::ostream& out, const Tensor& t) {
  store_le<std::uint64_t>(out, t.rows);
  store_le<std::uint64_t>(out, t.cols);
  for (double x : t.data) store_le<double>(out, x);
}

inline Json tensor_to_json(const Tensor& t) {
  return Json{{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
}

inline Tensor tensor_from_json(const Json& j) {
  Tensor t;
  t.rows = j.at("rows").get<std::size_t>();
  t.cols = j.at("cols").get<std::size_t>();
  t.data = j.at("data").get<std::vector<double>>();
  if (t.data.size() != t.rows * t.cols) throw Error(ErrorCode::kSizeMismatch, "tensor data length");
  return t;
}

inline void check_restored(const TrainedPolicy& p) {
  const auto expected = QNetworkParams::zeros(p.params.bands);
  if (!expected.same_shape(p.params)) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint tensors do not match L");
  }
  for (std::size_t s = 0; s < kParamSlots; ++s) {
    if (p.optimizer.first_moment[s].size() != p.params.tensors[s].size() ||
        p.optimizer.second_moment[s].size() != p.params.tensors[s].size()) {
      throw Error(ErrorCode::kShapeMismatch, "optimizer moments do not match parameters");
    }
  }
  if (p.band_numbers.size() != p.params.bands) {
    throw Error(ErrorCode::kShapeMismatch, "band number table does not match L");
  }
  if (p.stats && p.stats->bands() != p.params.bands) {
    throw Error(ErrorCode::kShapeMismatch, "stored stats do not match L");
  }
}

}  // namespace detail

inline CheckpointFormat checkpoint_format_for(const std::filesystem::path& path) {
  return path.extension() == ".json" ? CheckpointFormat::kJson : CheckpointFormat::kBinary;
}

inline Json checkpoint_to_json(const TrainedPolicy& p) {
  Json params = Json::object();
  Json m = Json::object();
  Json v = Json::object();
  for (std::size_t s = 0; s < kParamSlots; ++s) {
    params[kParamNames[s]] = detail::tensor_to_json(p.params.tensors[s]);
    m[kParamNames[s]] = detail::tensor_to_json(p.optimizer.first_moment[s]);
    v[kParamNames[s]] = detail::tensor_to_json(p.optimizer.second_moment[s]);
  }
  Json j{{"format", "bandsel-checkpoint"},
         {"version", kCheckpointVersion},
         {"metadata", detail::policy_metadata(p)},
         {"params", params},
         {"optimizer",
          {{"config", to_json(p.optimizer.config)},
           {"step", p.optimizer.step},
           {"first_moment", m},
           {"second_moment", v}}}};
  if (p.stats) {
    j["stats"] = Json{{"bin_count", p.stats->bin_count()},
                      {"entropies", std::vector<double>(p.stats->entropies().begin(),
                                                        p.stats->entropies().end())},
                      {"correlation", std::vector<double>(p.stats->correlation_matrix().begin(),
                                                          p.stats->correlation_matrix().end())}};
  } else {
    j["stats"] = nullptr;
  }
  return j;
}

inline TrainedPolicy checkpoint_from_json(const Json& j) {
  if (j.value("format", "") != "bandsel-checkpoint") {
    throw Error(ErrorCode::kMalformedHeader, "not a bandsel checkpoint");
  }
  if (j.at("version").get<std::uint32_t>() != kCheckpointVersion) {
    throw Error(ErrorCode::kUnsupportedDtype, "unsupported checkpoint version");
  }
  TrainedPolicy p;
  const Json& meta = j.at("metadata");
  p.params.bands = meta.at("bands").get<std::size_t>();
  const Json& opt = j.at("optimizer");
  p.optimizer.config = nadam_from_json(opt.at("config"));
  p.optimizer.step = opt.at("step").get<std::uint64_t>();
  for (std::size_t s = 0; s < kParamSlots; ++s) {
    p.params.tensors[s] = detail::tensor_from_json(j.at("params").at(kParamNames[s]));
    p.optimizer.first_moment[s] = detail::tensor_from_json(opt.at("first_moment").at(kParamNames[s]));
    p.optimizer.second_moment[s] =
        detail::tensor_from_json(opt.at("second_moment").at(kParamNames[s]));
  }
  detail::apply_metadata(meta, p);
  if (!j.at("stats").is_null()) {
    const Json& st = j.at("stats");
    p.stats = BandStats(st.at("entropies").get<std::vector<double>>(),
                        st.at("correlation").get<std::vector<double>>(),
                        st.at("bin_count").get<std::size_t>());
  }
  detail::check_restored(p);
  return p;
}

inline void save_checkpoint(const TrainedPolicy& p, const std::filesystem::path& path,
                            CheckpointFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  if (format == CheckpointFormat::kJson) {
    out << checkpoint_to_json(p).dump(1) << '\n';
    return;
  }
  const std::string meta = detail::policy_metadata(p).dump();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::store_le<std::uint32_t>(out, kCheckpointVersion);
  detail::store_le<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  for (const auto& t : p.params.tensors) detail::write_tensor(out, t);
  detail::store_le<std::uint64_t>(out, p.optimizer.step);
  detail::store_le<double>(out, p.optimizer.config.learning_rate);
  detail::store_le<double>(out, p.optimizer.config.beta1);
  detail::store_le<double>(out, p.optimizer.config.beta2);
  detail::store_le<double>(out, p.optimizer.config.epsilon);
  for (const auto& t : p.optimizer.first_moment) detail::write_tensor(out, t);
  for (const auto& t : p.optimizer.second_moment) detail::write_tensor(out, t);
  detail::store_le<std::uint8_t>(out, p.stats ? 1 : 0);
  if (p.stats) {
    const std::size_t l = p.stats->bands();
    detail::store_le<std::uint64_t>(out, p.stats->bin_count());
    Tensor e(l, 1);
    std::copy(p.stats->entropies().begin(), p.stats->entropies().end(), e.data.begin());
    Tensor c(l, l);
    std::copy(p.stats->correlation_matrix().begin(), p.stats->correlation_matrix().end(),
              c.data.begin());
    detail::write_tensor(out, e);
    detail::write_tensor(out, c);
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

inline void save_checkpoint(const TrainedPolicy& p, const std::filesystem::path& path) {
  save_checkpoint(p, path, checkpoint_format_for(path));
}

inline TrainedPolicy load_checkpoint(const std::filesystem::path& path) {
  std::string bytes = detail::read_text(path);
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      bytes.compare(0, sizeof(kCheckpointMagic), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    Json j;
    try {
      j = Json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedHeader, path.string() + " is not a checkpoint: " + e.what());
    }
    try {
      return checkpoint_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedHeader, path.string() + ": " + e.what());
    }
  }

  detail::BinaryReader in(std::move(bytes));
  in.read_bytes(sizeof(kCheckpointMagic));
  if (in.read<std::uint32_t>() != kCheckpointVersion) {
    throw Error(ErrorCode::kUnsupportedDtype, "unsupported checkpoint version");
  }
  TrainedPolicy p;
  Json meta;
  try {
    meta = Json::parse(in.read_bytes(in.read<std::uint64_t>()));
    p.params.bands = meta.at("bands").get<std::size_t>();
    detail::apply_metadata(meta, p);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("checkpoint metadata: ") + e.what());
  }
  for (auto& t : p.params.tensors) t = in.read_tensor();
  p.optimizer.step = in.read<std::uint64_t>();
  p.optimizer.config.learning_rate = in.read<double>();
  p.optimizer.config.beta1 = in.read<double>();
  p.optimizer.config.beta2 = in.read<double>();
  p.optimizer.config.epsilon = in.read<double>();
  for (auto& t : p.optimizer.first_moment) t = in.read_tensor();
  for (auto& t : p.optimizer.second_moment) t = in.read_tensor();
  if (in.read<std::uint8_t>() != 0) {
    const auto bin_count = in.read<std::uint64_t>();
    Tensor e = in.read_tensor();
    Tensor c = in.read_tensor();
    p.stats = BandStats(std::move(e.data), std::move(c.data), bin_count);
  }
  if (!in.at_end()) throw Error(ErrorCode::kSizeMismatch, "trailing bytes after checkpoint");
  detail::check_restored(p);
  return p;
}

}  // namespace bandsel
