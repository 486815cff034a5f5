#pragma once

// JSON shapes shared by the CLI and checkpoints: stats dumps, training log
// lines, selection reports, evaluation reports, and config snapshots.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bandsel/baselines.hpp"
#include "bandsel/band_stats.hpp"
#include "bandsel/dqn_agent.hpp"
#include "bandsel/eval.hpp"
#include "json.hpp"

namespace bandsel {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

inline Json stats_to_json(const BandStats& stats) {
  const auto summary = summarize_correlation(stats);
  return Json{{"entropies", std::vector<double>(stats.entropies().begin(), stats.entropies().end())},
              {"bin_count", stats.bin_count()},
              {"correlation_summary",
               {{"min", summary.min}, {"max", summary.max}, {"mean_offdiag", summary.mean_offdiag}}}};
}

inline RewardScheme reward_from_string(const std::string& name) {
  if (name == "entropy") return RewardScheme::kEntropy;
  if (name == "corr" || name == "correlation") return RewardScheme::kCorrelation;
  throw Error(ErrorCode::kInvalidConfig, "unknown reward scheme '" + name + "' (entropy|corr)");
}

inline Json to_json(const EnvConfig& env) {
  return Json{{"k", env.k}, {"reward", to_string(env.reward)}};
}

inline EnvConfig env_from_json(const Json& j) {
  return EnvConfig{j.at("k").get<std::size_t>(), reward_from_string(j.at("reward").get<std::string>())};
}

inline Json to_json(const NadamConfig& c) {
  return Json{{"learning_rate", c.learning_rate},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon}};
}

inline NadamConfig nadam_from_json(const Json& j) {
  return NadamConfig{j.at("learning_rate").get<double>(), j.at("beta1").get<double>(),
                     j.at("beta2").get<double>(), j.at("epsilon").get<double>()};
}

inline Json to_json(const TrainConfig& c) {
  return Json{{"gamma", c.gamma},
              {"batch_size", c.batch_size},
              {"replay_capacity", c.replay_capacity},
              {"epsilon_start", c.epsilon_start},
              {"epsilon_end", c.epsilon_end},
              {"epsilon_decay", c.epsilon_decay},
              {"max_episodes", c.max_episodes},
              {"plateau_window", c.plateau_window},
              {"plateau_tolerance", c.plateau_tolerance},
              {"updates_per_episode", c.updates_per_episode},
              {"optimizer", to_json(c.optimizer)},
              {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  c.gamma = j.at("gamma").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.replay_capacity = j.at("replay_capacity").get<std::size_t>();
  c.epsilon_start = j.at("epsilon_start").get<double>();
  c.epsilon_end = j.at("epsilon_end").get<double>();
  c.epsilon_decay = j.at("epsilon_decay").get<double>();
  c.max_episodes = j.at("max_episodes").get<std::size_t>();
  c.plateau_window = j.at("plateau_window").get<std::size_t>();
  c.plateau_tolerance = j.at("plateau_tolerance").get<double>();
  c.updates_per_episode = j.at("updates_per_episode").get<std::size_t>();
  c.optimizer = nadam_from_json(j.at("optimizer"));
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// One training-log line.
inline Json to_json(const EpisodeRecord& r) {
  return Json{{"episode", r.episode},
              {"epsilon", r.epsilon},
              {"return", r.episode_return},
              {"loss", r.loss ? Json(*r.loss) : Json(nullptr)},
              {"selected_bands", r.selected}};
}

/// Provenance attached to every artifact the CLI writes.
struct RunManifest {
  Json config = Json::object();
  std::vector<std::pair<std::string, std::string>> input_digests;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  std::string timestamp;
};

inline Json to_json(const RunManifest& m) {
  Json digests = Json::object();
  for (const auto& [path, digest] : m.input_digests) digests[path] = digest;
  return Json{{"config", m.config},
              {"input_digests", digests},
              {"tool_version", m.tool_version},
              {"seed", m.seed},
              {"timestamp", m.timestamp}};
}

struct SelectionReport {
  std::string selector;
  std::size_t k = 0;
  /// In pick order for sequential selectors, ascending otherwise.
  std::vector<BandIndex> bands;
  std::vector<BandIndex> bands_original;
  double mie = 0.0;
  double mean_corr = 0.0;
  std::optional<double> objective_score;
};

/// Scores a subset against `stats` and maps it to original numbering.
inline SelectionReport make_selection_report(std::string selector, const BandStats& stats,
                                             std::vector<BandIndex> bands,
                                             std::span<const BandIndex> band_numbers) {
  SelectionReport r;
  r.selector = std::move(selector);
  r.k = bands.size();
  for (auto b : bands) r.bands_original.push_back(band_numbers.empty() ? b : band_numbers[b]);
  if (!bands.empty()) {
    r.mie = mean_information_entropy(stats, bands);
    r.mean_corr = mean_correlation(stats, bands);
  }
  r.bands = std::move(bands);
  return r;
}

inline Json to_json(const SelectionReport& r, const RunManifest& manifest) {
  Json j{{"selector", r.selector},
         {"k", r.k},
         {"bands_original_numbering", r.bands_original},
         {"mie", r.mie},
         {"mean_corr", r.mean_corr}};
  if (r.objective_score) j["objective_score"] = *r.objective_score;
  j["manifest"] = to_json(manifest);
  return j;
}

inline Json to_json(const ConfusionMatrix& m) {
  Json rows = Json::array();
  for (std::size_t t = 0; t < m.size(); ++t) {
    Json row = Json::array();
    for (std::size_t p = 0; p < m.size(); ++p) row.push_back(m.at(t, p));
    rows.push_back(row);
  }
  return Json{{"classes", m.classes}, {"counts", rows}};
}

inline Json to_json(const EvalReport& r) {
  Json runs = Json::array();
  for (const auto& run : r.per_run) {
    runs.push_back(Json{{"seed", run.seed},
                        {"oa", run.metrics.overall_accuracy},
                        {"aa", run.metrics.average_accuracy},
                        {"kappa", run.metrics.kappa},
                        {"train_size", run.train_size},
                        {"test_size", run.test_size},
                        {"confusion", to_json(run.confusion)}});
  }
  return Json{{"runs", r.runs},
              {"oa_mean", r.oa_mean},
              {"oa_std", r.oa_std},
              {"aa_mean", r.aa_mean},
              {"aa_std", r.aa_std},
              {"kappa_mean", r.kappa_mean},
              {"kappa_std", r.kappa_std},
              {"aa_note", "classes absent from a run's test split are left out of AA"},
              {"per_run", runs}};
}

}  // namespace bandsel
