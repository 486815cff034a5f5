// bandsel: command-line front end for deep-Q band selection.
//
// Exit codes: 0 success, 2 configuration/validation error, 3 data error,
// 4 training divergence.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bandsel/baselines.hpp"
#include "bandsel/checkpoint.hpp"
#include "bandsel/dqn_agent.hpp"
#include "bandsel/eval.hpp"
#include "bandsel/hsi_data.hpp"
#include "bandsel/report.hpp"
#include "bandsel/synthetic.hpp"

namespace fs = std::filesystem;
using namespace bandsel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kBudgetExceeded:
    case ErrorCode::kIllegalAction:
    case ErrorCode::kEpisodeFinished:
    case ErrorCode::kNoLegalAction:
    case ErrorCode::kNotSuccessor:
    case ErrorCode::kEmptySubset:
      return kExitConfig;
    case ErrorCode::kDivergedLoss:
    case ErrorCode::kNonFiniteGradient:
      return kExitDiverged;
    default:
      return kExitData;
  }
}

std::string sha256_file(const fs::path& path) {
  const std::string bytes = detail::read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

/// ISO-8601 UTC; honours SOURCE_DATE_EPOCH for reproducible artifacts.
std::string timestamp_now() {
  std::time_t t = std::time(nullptr);
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) t = std::strtoll(sde, nullptr, 10);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// "103-107,149-162,219" -> {103, ..., 107, 149, ..., 162, 219}.
std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  auto number = [&](const std::string& s) {
    double v = 0.0;
    if (!detail::parse_double(detail::trim(s), v) || v < 0 || v != std::floor(v)) {
      throw Error(ErrorCode::kInvalidConfig, "bad index '" + s + "' in '" + text + "'");
    }
    return static_cast<std::size_t>(v);
  };
  while (std::getline(ss, item, ',')) {
    if (detail::trim(item).empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(item));
      continue;
    }
    const auto lo = number(item.substr(0, dash));
    const auto hi = number(item.substr(dash + 1));
    if (hi < lo) throw Error(ErrorCode::kInvalidConfig, "empty range '" + item + "'");
    for (auto i = lo; i <= hi; ++i) out.push_back(i);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void emit_json(const Json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(out, j.dump(2) + "\n");
  }
}

struct ImageArgs {
  std::string path;
  std::string labels;
  std::string drop;
};

struct StatsArgs {
  std::size_t bins = 256;
  std::string entropy_mode = "distinct";
  std::string range = "per_band";
  bool absolute = false;
};

struct TrainArgs {
  std::string reward = "entropy";
  TrainConfig cfg;
};

void add_image_options(CLI::App* cmd, ImageArgs& a) {
  cmd->add_option("image", a.path, "Image file (.csv or ENVI .hdr)")->required();
  cmd->add_option("--labels", a.labels, "Label file (defaults to <stem>.labels.csv if present)");
  cmd->add_option("--drop", a.drop, "Bands to remove before anything else, e.g. 103-107,219");
}

void add_stats_options(CLI::App* cmd, StatsArgs& a) {
  cmd->add_option("--bins", a.bins, "Histogram bins for entropy")->check(CLI::PositiveNumber);
  cmd->add_option("--entropy-mode", a.entropy_mode, "distinct | per_pixel")
      ->check(CLI::IsMember({"distinct", "per_pixel"}));
  cmd->add_option("--range", a.range, "Quantization range: per_band | global")
      ->check(CLI::IsMember({"per_band", "global"}));
  cmd->add_flag("--abs-corr", a.absolute, "Use |Pearson| in the correlation matrix");
}

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  auto& c = a.cfg;
  cmd->add_option("--reward", a.reward, "entropy | corr")
      ->check(CLI::IsMember({"entropy", "corr", "correlation"}));
  cmd->add_option("--gamma", c.gamma, "Discount factor in (0, 1)");
  cmd->add_option("--episodes", c.max_episodes, "Maximum training episodes");
  cmd->add_option("--batch", c.batch_size, "Minibatch size");
  cmd->add_option("--replay", c.replay_capacity, "Replay memory capacity");
  cmd->add_option("--eps-start", c.epsilon_start, "Initial exploration rate");
  cmd->add_option("--eps-end", c.epsilon_end, "Exploration floor");
  cmd->add_option("--eps-decay", c.epsilon_decay, "Per-episode exploration decay factor");
  cmd->add_option("--updates", c.updates_per_episode, "Minibatch updates per episode");
  cmd->add_option("--plateau-window", c.plateau_window, "Early-stop window (0 disables)");
  cmd->add_option("--plateau-tol", c.plateau_tolerance, "Early-stop tolerance");
  cmd->add_option("--lr", c.optimizer.learning_rate, "Nadam learning rate");
  cmd->add_option("--beta1", c.optimizer.beta1, "Nadam beta1");
  cmd->add_option("--beta2", c.optimizer.beta2, "Nadam beta2");
}

struct LoadedImage {
  HyperspectralImage image;
  std::vector<std::pair<std::string, std::string>> digests;
};

LoadedImage load_input(const ImageArgs& a) {
  LoadedImage out;
  LoadOptions opts;
  if (!a.labels.empty()) opts.labels = a.labels;
  const fs::path path(a.path);
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "no such file " + a.path);
  out.image = load_image(path, opts);
  out.digests.emplace_back(path.string(), sha256_file(path));
  fs::path labels = !a.labels.empty() ? fs::path(a.labels) : companion_labels_path(path);
  if (out.image.has_labels() && fs::exists(labels)) {
    out.digests.emplace_back(labels.string(), sha256_file(labels));
  }
  if (!a.drop.empty()) {
    out.image = remove_bands(out.image, parse_index_list(a.drop));
  }
  return out;
}

StatsOptions stats_options(const StatsArgs& a, unsigned threads) {
  StatsOptions o;
  o.bin_count = a.bins;
  o.entropy_mode = a.entropy_mode == "per_pixel" ? EntropyMode::kPerPixel : EntropyMode::kDistinctValues;
  o.range = a.range == "global" ? QuantizationRange::kGlobal : QuantizationRange::kPerBand;
  o.absolute_correlation = a.absolute;
  o.threads = threads;
  return o;
}

Json stats_config_json(const StatsArgs& a, const std::string& drop) {
  return Json{{"bins", a.bins},
              {"entropy_mode", a.entropy_mode},
              {"range", a.range},
              {"abs_corr", a.absolute},
              {"drop", drop}};
}

Json split_json(const EvalOptions& e) {
  return Json{{"per_class_ratio", e.split.per_class_ratio},
              {"min_per_class", e.split.min_per_class},
              {"seed", e.split.seed},
              {"neighbors", e.neighbors},
              {"runs", e.runs},
              {"zscore", e.zscore}};
}

std::vector<BandIndex> to_current_indices(const HyperspectralImage& image,
                                          const std::vector<std::size_t>& original) {
  std::map<BandIndex, BandIndex> lookup;
  for (BandIndex b = 0; b < image.bands(); ++b) lookup[image.original_band(b)] = b;
  std::vector<BandIndex> out;
  for (auto o : original) {
    auto it = lookup.find(o);
    if (it == lookup.end()) {
      throw Error(ErrorCode::kIndexOutOfRange, "band " + std::to_string(o) + " is not in the image");
    }
    out.push_back(it->second);
  }
  return out;
}

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

// ---- info -----------------------------------------------------------------

int cmd_info(const ImageArgs& args, const StatsArgs& sargs) {
  const auto in = load_input(args);
  const auto& image = in.image;
  std::cout << "bands=" << image.bands() << " pixels=" << image.pixels() << '\n';
  const auto stats = BandStats::compute(image, stats_options(sargs, 1));
  auto [lo, hi] = std::minmax_element(stats.entropies().begin(), stats.entropies().end());
  std::cout << "entropy_min=" << *lo << " entropy_max=" << *hi << '\n';
  if (image.has_labels()) {
    std::map<ClassId, std::size_t> counts;
    for (auto c : image.labels()) ++counts[c];
    std::cout << "classes=" << (counts.size() - counts.count(0)) << '\n';
    for (const auto& [c, n] : counts) std::cout << "class " << c << ": " << n << '\n';
  } else {
    std::cout << "labels=none\n";
  }
  return kExitOk;
}

// ---- stats ----------------------------------------------------------------

int cmd_stats(const ImageArgs& args, const StatsArgs& sargs, unsigned threads,
              const std::string& out, bool full) {
  const auto in = load_input(args);
  const auto stats = BandStats::compute(in.image, stats_options(sargs, threads));
  Json j = stats_to_json(stats);
  j["band_numbers"] = std::vector<BandIndex>(in.image.band_numbers().begin(),
                                             in.image.band_numbers().end());
  if (full) {
    j["correlation"] = std::vector<double>(stats.correlation_matrix().begin(),
                                           stats.correlation_matrix().end());
  }
  emit_json(j, out);
  return kExitOk;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::string kind = "ladder";
  std::size_t bands = 16;
  std::size_t pixels = 2048;
  std::size_t classes = 4;
  std::size_t sources = 3;
  double noise = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  HyperspectralImage image;
  if (a.kind == "ladder") {
    image = entropy_ladder_scene(a.bands, a.pixels, a.seed);
  } else if (a.kind == "mixed") {
    image = mixed_source_scene(a.bands, a.pixels, a.sources, a.noise, a.seed);
  } else {
    image = labeled_scene(a.bands, a.pixels, a.classes, a.noise, a.seed);
  }
  const fs::path out(a.out);
  if (out.extension() == ".hdr") {
    save_envi_image(image, out);
  } else {
    save_csv_image(image, out);
  }
  std::cout << "wrote " << a.out << " bands=" << image.bands() << " pixels=" << image.pixels()
            << '\n';
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

TrainedPolicy run_training(const HyperspectralImage& image, const BandStats& stats,
                           std::size_t k, const TrainArgs& targs, std::ostream* log) {
  EpisodeObserver observer;
  if (log) observer = [log](const EpisodeRecord& r) { *log << to_json(r).dump() << '\n'; };
  auto policy = train(stats, EnvConfig{k, reward_from_string(targs.reward)}, targs.cfg, observer);
  policy.band_numbers.assign(image.band_numbers().begin(), image.band_numbers().end());
  policy.stats = stats;
  return policy;
}

int cmd_train(const ImageArgs& args, const StatsArgs& sargs, TrainArgs targs,
              std::optional<std::size_t> k, std::uint64_t seed, unsigned threads,
              const std::string& out, std::string log_path) {
  targs.cfg.seed = seed;
  targs.cfg.validate();
  reward_from_string(targs.reward);
  const auto in = load_input(args);
  const auto stats = BandStats::compute(in.image, stats_options(sargs, threads));
  const std::size_t kk = k.value_or(std::min<std::size_t>(30, in.image.bands()));
  if (log_path.empty()) log_path = out + ".log.jsonl";
  std::ofstream log(log_path);
  if (!log) throw Error(ErrorCode::kIo, "cannot write " + log_path);
  const auto policy = run_training(in.image, stats, kk, targs, &log);
  save_checkpoint(policy, out);
  const auto sel = select_bands(policy, kk);
  std::cout << "episodes=" << policy.episodes << " k=" << kk
            << " final_return=" << (policy.returns.empty() ? 0.0 : policy.returns.back())
            << " seconds=" << policy.wall_seconds << '\n';
  std::cout << "selected=" << Json(sel.original).dump() << '\n';
  return kExitOk;
}

// ---- select ---------------------------------------------------------------

int cmd_select(const std::string& checkpoint, std::optional<std::size_t> k,
               const std::string& out) {
  const auto policy = load_checkpoint(checkpoint);
  const std::size_t kk = k.value_or(policy.env.k);
  const auto sel = select_bands(policy, kk);
  if (!policy.stats) throw Error(ErrorCode::kMalformedHeader, "checkpoint carries no band statistics");
  auto report = make_selection_report("drl", *policy.stats, sel.bands, policy.band_numbers);
  RunManifest manifest;
  manifest.config = Json{{"k", kk}, {"env", to_json(policy.env)}, {"train", to_json(policy.config)}};
  manifest.input_digests.emplace_back(checkpoint, sha256_file(checkpoint));
  manifest.seed = policy.config.seed;
  manifest.timestamp = timestamp_now();
  emit_json(to_json(report, manifest), out);
  return kExitOk;
}

// ---- compare --------------------------------------------------------------

const std::vector<std::string> kSelectors = {"drl", "entropy_rank", "greedy", "random", "exhaustive"};

int cmd_compare(const ImageArgs& args, const StatsArgs& sargs, TrainArgs targs,
                const std::string& k_list, const std::string& selectors_arg,
                const std::string& objective_name, EvalOptions eopts, std::uint64_t seed,
                std::uint64_t budget, unsigned threads, const std::string& out_json,
                const std::string& out_csv) {
  std::vector<std::string> selectors;
  {
    std::stringstream ss(selectors_arg);
    std::string s;
    while (std::getline(ss, s, ',')) {
      s = detail::trim(s);
      if (s.empty()) continue;
      if (std::find(kSelectors.begin(), kSelectors.end(), s) == kSelectors.end()) {
        std::string valid;
        for (const auto& v : kSelectors) valid += (valid.empty() ? "" : ", ") + v;
        throw Error(ErrorCode::kInvalidConfig, "unknown selector '" + s + "'; valid: " + valid);
      }
      selectors.push_back(s);
    }
  }
  if (selectors.empty()) throw Error(ErrorCode::kInvalidConfig, "no selectors given");
  const auto ks = parse_index_list(k_list);
  if (ks.empty()) throw Error(ErrorCode::kInvalidConfig, "no K values given");
  const ObjectiveKind kind = objective_name == "min_corr" ? ObjectiveKind::kMinCorr
                                                          : ObjectiveKind::kMaxMie;
  targs.cfg.seed = seed;
  targs.reward = to_string(kind == ObjectiveKind::kMaxMie ? RewardScheme::kEntropy
                                                          : RewardScheme::kCorrelation);
  targs.cfg.validate();
  eopts.split.seed = seed;
  eopts.threads = threads;

  const auto in = load_input(args);
  const auto& image = in.image;
  const auto stats = BandStats::compute(image, stats_options(sargs, threads));
  const Objective objective(kind, stats);
  for (auto k : ks) {
    if (k == 0 || k > image.bands()) {
      throw Error(ErrorCode::kInvalidConfig, "K=" + std::to_string(k) + " must lie in [1, " +
                                                 std::to_string(image.bands()) + "]");
    }
  }

  Json rows = Json::array();
  std::ostringstream csv;
  csv << "selector,k,mie,mean_corr,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std\n";
  for (auto k : ks) {
    for (const auto& name : selectors) {
      std::vector<BandIndex> bands;
      if (name == "drl") {
        bands = select_bands(run_training(image, stats, k, targs, nullptr), k).bands;
      } else if (name == "entropy_rank") {
        bands = rank_by_entropy(stats, k);
      } else if (name == "greedy") {
        bands = greedy_select(objective, k);
      } else if (name == "random") {
        auto rng = detail::make_rng(seed, 2 + k);
        bands = random_subset(image.bands(), k, rng);
      } else {
        bands = exhaustive_best(objective, k, ExhaustiveOptions{budget, threads}).subset;
      }
      auto report = make_selection_report(name, stats, bands, image.band_numbers());
      report.objective_score = objective.score(report.bands);
      Json row{{"selector", name},
               {"k", k},
               {"bands_original_numbering", report.bands_original},
               {"mie", report.mie},
               {"mean_corr", report.mean_corr},
               {"objective_score", *report.objective_score}};
      csv << name << ',' << k << ',' << csv_number(report.mie) << ','
          << csv_number(report.mean_corr);
      if (image.has_labels()) {
        const auto ev = repeated_eval(image, report.bands, eopts);
        row["eval"] = Json{{"oa_mean", ev.oa_mean}, {"oa_std", ev.oa_std},
                           {"aa_mean", ev.aa_mean}, {"aa_std", ev.aa_std},
                           {"kappa_mean", ev.kappa_mean}, {"kappa_std", ev.kappa_std}};
        for (double v : {ev.oa_mean, ev.oa_std, ev.aa_mean, ev.aa_std, ev.kappa_mean, ev.kappa_std}) {
          csv << ',' << csv_number(v);
        }
      } else {
        row["eval"] = nullptr;
        csv << ",,,,,,";
      }
      csv << '\n';
      rows.push_back(std::move(row));
    }
  }

  RunManifest manifest;
  manifest.config = Json{{"k", ks},
                         {"selectors", selectors},
                         {"objective", to_string(kind)},
                         {"budget", budget},
                         {"stats", stats_config_json(sargs, args.drop)},
                         {"env_reward", targs.reward},
                         {"train", to_json(targs.cfg)},
                         {"eval", split_json(eopts)}};
  manifest.input_digests = in.digests;
  manifest.seed = seed;
  manifest.timestamp = timestamp_now();
  Json doc{{"objective", to_string(kind)}, {"rows", rows}, {"manifest", to_json(manifest)}};
  if (!out_csv.empty()) write_text(out_csv, csv.str());
  if (out_json.empty() && out_csv.empty()) {
    std::cout << csv.str();
  } else if (!out_json.empty()) {
    write_text(out_json, doc.dump(2) + "\n");
  }
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const ImageArgs& args, const std::string& bands_arg, const std::string& report_path,
             EvalOptions eopts, std::uint64_t seed, unsigned threads, const std::string& out,
             const std::string& out_csv) {
  std::vector<std::size_t> original;
  if (!report_path.empty()) {
    Json report;
    try {
      report = Json::parse(detail::read_text(report_path));
      original = report.at("bands_original_numbering").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedHeader, report_path + ": " + e.what());
    }
  } else {
    original = parse_index_list(bands_arg);
  }
  if (original.empty()) throw Error(ErrorCode::kEmptySubset, "no bands given (--bands or --report)");
  eopts.split.seed = seed;
  eopts.threads = threads;

  const auto in = load_input(args);
  const auto bands = to_current_indices(in.image, original);
  const auto ev = repeated_eval(in.image, bands, eopts);
  Json j = to_json(ev);
  RunManifest manifest;
  manifest.config = Json{{"bands_original_numbering", original}, {"eval", split_json(eopts)},
                         {"drop", args.drop}};
  manifest.input_digests = in.digests;
  manifest.seed = seed;
  manifest.timestamp = timestamp_now();
  j["manifest"] = to_json(manifest);
  emit_json(j, out);
  if (!out_csv.empty()) {
    std::ostringstream csv;
    csv << "run,seed,oa,aa,kappa\n";
    for (std::size_t r = 0; r < ev.per_run.size(); ++r) {
      const auto& m = ev.per_run[r].metrics;
      csv << r << ',' << ev.per_run[r].seed << ',' << csv_number(m.overall_accuracy) << ','
          << csv_number(m.average_accuracy) << ',' << csv_number(m.kappa) << '\n';
    }
    write_text(out_csv, csv.str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-learning hyperspectral band selection"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  unsigned threads = 1;
  std::uint64_t seed = 0;

  ImageArgs info_img;
  StatsArgs info_stats;
  auto* info = app.add_subcommand("info", "Print image dimensions, entropy range, and class counts");
  add_image_options(info, info_img);
  add_stats_options(info, info_stats);

  ImageArgs stats_img;
  StatsArgs stats_args;
  std::string stats_out;
  bool stats_full = false;
  auto* stats = app.add_subcommand("stats", "Dump per-band entropies and correlation summary as JSON");
  add_image_options(stats, stats_img);
  add_stats_options(stats, stats_args);
  stats->add_option("--out", stats_out, "Output JSON (stdout if omitted)");
  stats->add_flag("--full", stats_full, "Include the full correlation matrix");
  stats->add_option("--threads", threads, "Worker threads");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic scene");
  synth->add_option("--kind", synth_args.kind, "ladder | mixed | labeled")
      ->check(CLI::IsMember({"ladder", "mixed", "labeled"}));
  synth->add_option("--bands", synth_args.bands)->check(CLI::PositiveNumber);
  synth->add_option("--pixels", synth_args.pixels)->check(CLI::PositiveNumber);
  synth->add_option("--classes", synth_args.classes, "Classes (labeled)")->check(CLI::PositiveNumber);
  synth->add_option("--sources", synth_args.sources, "Latent sources (mixed)")->check(CLI::PositiveNumber);
  synth->add_option("--noise", synth_args.noise, "Noise level (mixed, labeled)");
  synth->add_option("--seed", synth_args.seed);
  synth->add_option("--out", synth_args.out, "Output .csv or .hdr")->required();

  ImageArgs train_img;
  StatsArgs train_stats;
  TrainArgs train_args;
  std::optional<std::size_t> train_k;
  std::string train_out, train_log;
  auto* train_cmd = app.add_subcommand("train", "Train a Q-network policy and write a checkpoint");
  add_image_options(train_cmd, train_img);
  add_stats_options(train_cmd, train_stats);
  add_train_options(train_cmd, train_args);
  train_cmd->add_option("--k", train_k, "Bands to select (default min(30, L))");
  train_cmd->add_option("--seed", seed);
  train_cmd->add_option("--threads", threads, "Worker threads for statistics");
  train_cmd->add_option("--out", train_out, "Checkpoint path (.json for JSON)")->required();
  train_cmd->add_option("--log", train_log, "JSON-lines training log (default <out>.log.jsonl)");

  std::string sel_ckpt, sel_out;
  std::optional<std::size_t> sel_k;
  auto* select = app.add_subcommand("select", "Greedy band selection from a trained checkpoint");
  select->add_option("--checkpoint", sel_ckpt)->required();
  select->add_option("--k", sel_k, "Bands to select (default: the training K)");
  select->add_option("--out", sel_out, "Selection report JSON (stdout if omitted)");

  ImageArgs cmp_img;
  StatsArgs cmp_stats;
  TrainArgs cmp_train;
  EvalOptions cmp_eval;
  std::string cmp_k = "4", cmp_selectors = "drl,entropy_rank,greedy,random,exhaustive";
  std::string cmp_objective = "max_mie", cmp_json, cmp_csv;
  std::uint64_t budget = 10'000'000;
  auto* compare = app.add_subcommand("compare", "Run several selectors and tabulate scores");
  add_image_options(compare, cmp_img);
  add_stats_options(compare, cmp_stats);
  add_train_options(compare, cmp_train);
  compare->add_option("--k", cmp_k, "K values, e.g. 5,10,20-25");
  compare->add_option("--selectors", cmp_selectors, "Comma list of drl,entropy_rank,greedy,random,exhaustive");
  compare->add_option("--objective", cmp_objective, "max_mie | min_corr")
      ->check(CLI::IsMember({"max_mie", "min_corr"}));
  compare->add_option("--runs", cmp_eval.runs, "Evaluation runs per row")->check(CLI::PositiveNumber);
  compare->add_option("--ratio", cmp_eval.split.per_class_ratio, "Training fraction per class");
  compare->add_option("--neighbors", cmp_eval.neighbors, "k for k-NN");
  compare->add_option("--budget", budget, "Exhaustive search budget");
  compare->add_option("--seed", seed);
  compare->add_option("--threads", threads);
  compare->add_option("--out-json", cmp_json);
  compare->add_option("--out-csv", cmp_csv);

  ImageArgs eval_img;
  EvalOptions eval_opts;
  std::string eval_bands, eval_report, eval_out, eval_csv;
  auto* eval = app.add_subcommand("eval", "k-NN evaluation of a band subset");
  add_image_options(eval, eval_img);
  eval->add_option("--bands", eval_bands, "Bands in original numbering, e.g. 3,17,40-42");
  eval->add_option("--report", eval_report, "Take bands from a selection report");
  eval->add_option("--runs", eval_opts.runs)->check(CLI::PositiveNumber);
  eval->add_option("--ratio", eval_opts.split.per_class_ratio, "Training fraction per class");
  eval->add_option("--min-per-class", eval_opts.split.min_per_class)->check(CLI::PositiveNumber);
  eval->add_option("--neighbors", eval_opts.neighbors);
  eval->add_flag("--zscore", eval_opts.zscore, "Standardize each band on the training split");
  eval->add_option("--seed", seed);
  eval->add_option("--threads", threads);
  eval->add_option("--out", eval_out, "Report JSON (stdout if omitted)");
  eval->add_option("--out-csv", eval_csv, "Per-run OA/AA/Kappa CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*info) return cmd_info(info_img, info_stats);
    if (*stats) return cmd_stats(stats_img, stats_args, threads, stats_out, stats_full);
    if (*synth) return cmd_synth(synth_args);
    if (*train_cmd) {
      return cmd_train(train_img, train_stats, train_args, train_k, seed, threads, train_out,
                       train_log);
    }
    if (*select) return cmd_select(sel_ckpt, sel_k, sel_out);
    if (*compare) {
      return cmd_compare(cmp_img, cmp_stats, cmp_train, cmp_k, cmp_selectors, cmp_objective,
                         cmp_eval, seed, budget, threads, cmp_json, cmp_csv);
    }
    if (*eval) {
      return cmd_eval(eval_img, eval_bands, eval_report, eval_opts, seed, threads, eval_out,
                      eval_csv);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
