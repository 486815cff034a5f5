#include <sys/wait.h>

#include <cstdio>
#include <set>
#include <sstream>

#include "bandsel/checkpoint.hpp"
#include "bandsel/hsi_data.hpp"
#include "bandsel/report.hpp"
#include "support.hpp"

#ifndef BANDSEL_CLI
#error "BANDSEL_CLI must name the bandsel executable"
#endif

using namespace bandsel;
using bandsel::testing::TempDir;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = "SOURCE_DATE_EPOCH=86400 " + std::string(BANDSEL_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

}  // namespace

TEST(CliInfo, SmallCsv) {
  TempDir dir;
  bandsel::testing::write_file(dir / "a.csv", "1,2,3,4\n5,6,7,9\n0,0,1,1\n");
  const auto r = run("info " + q(dir / "a.csv"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("bands=3 pixels=4"), std::string::npos) << r.out;
}

TEST(CliInfo, ClassHistogram) {
  TempDir dir;
  bandsel::testing::write_file(dir / "a.csv", "1,2,3,4,5\n");
  bandsel::testing::write_file(dir / "a.labels.csv", "1,2,2,0,2\n");
  const auto r = run("info " + q(dir / "a.csv"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("class 1: 1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("class 2: 3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("class 0: 1"), std::string::npos) << r.out;
}

TEST(CliInfo, MissingFileIsDataError) {
  TempDir dir;
  const auto r = run("info " + q(dir / "missing.csv"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("IoError"), std::string::npos) << r.out;
}

TEST(CliInfo, MalformedHeaderIsDataError) {
  TempDir dir;
  bandsel::testing::write_file(dir / "x.hdr", "not envi\n");
  const auto r = run("info " + q(dir / "x.hdr"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("MalformedHeader"), std::string::npos) << r.out;
}

TEST(CliTrain, DefaultsWriteCheckpointAndOneLogLinePerEpisode) {
  TempDir dir;
  ASSERT_EQ(run("synth --kind ladder --bands 16 --pixels 256 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("train " + q(dir / "s.csv") + " --k 4 --episodes 40 --out " + q(dir / "p.bin") +
                     " --log " + q(dir / "log.jsonl"));
  ASSERT_EQ(r.code, 0) << r.out;
  ASSERT_TRUE(std::filesystem::exists(dir / "p.bin"));
  const auto log = lines(detail::read_text(dir / "log.jsonl"));
  ASSERT_EQ(log.size(), 40u);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto j = Json::parse(log[i]);
    EXPECT_EQ(j.at("episode"), i);
    for (const char* key : {"epsilon", "return", "loss", "selected_bands"}) EXPECT_TRUE(j.contains(key));
    EXPECT_EQ(j.at("selected_bands").size(), 4u);
  }
  const auto policy = load_checkpoint(dir / "p.bin");
  EXPECT_EQ(policy.episodes, 40u);
  EXPECT_EQ(policy.config.replay_capacity, 50000u);
}

TEST(CliTrain, NoArgumentDefaultsRun) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 16 --pixels 128 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("train " + q(dir / "s.csv") + " --out " + q(dir / "p.bin"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(lines(detail::read_text(dir / "p.bin.log.jsonl")).size(), 2000u);
}

TEST(CliTrain, SameSeedSameLog) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 10 --pixels 128 --out " + q(dir / "s.csv")).code, 0);
  const std::string base = "train " + q(dir / "s.csv") + " --k 3 --episodes 60 --seed 5 --reward corr ";
  ASSERT_EQ(run(base + "--out " + q(dir / "a.bin")).code, 0);
  ASSERT_EQ(run(base + "--out " + q(dir / "b.bin")).code, 0);
  EXPECT_EQ(detail::read_text(dir / "a.bin.log.jsonl"), detail::read_text(dir / "b.bin.log.jsonl"));
  const auto a = load_checkpoint(dir / "a.bin");
  const auto b = load_checkpoint(dir / "b.bin");
  for (std::size_t s = 0; s < kParamSlots; ++s) {
    EXPECT_EQ(a.params.tensors[s].data, b.params.tensors[s].data);
  }
  EXPECT_EQ(a.optimizer, b.optimizer);
  EXPECT_EQ(a.returns, b.returns);
}

TEST(CliTrain, GammaOutOfRangeIsConfigError) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 4 --pixels 16 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("train " + q(dir / "s.csv") + " --gamma 1.5 --out " + q(dir / "p.bin"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("gamma"), std::string::npos) << r.out;
}

TEST(CliTrain, DivergenceExitCode) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 6 --pixels 64 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("train " + q(dir / "s.csv") + " --k 3 --episodes 200 --batch 4 --lr 1e300 --out " +
                     q(dir / "p.bin"));
  EXPECT_EQ(r.code, 4) << r.out;
  EXPECT_NE(r.out.find("DivergedLoss"), std::string::npos) << r.out;
}

TEST(CliSelect, ThirtyOfTwoHundredWithOriginalNumbering) {
  TempDir dir;
  ASSERT_EQ(run("synth --kind mixed --bands 220 --pixels 64 --out " + q(dir / "s.csv")).code, 0);
  ASSERT_EQ(run("train " + q(dir / "s.csv") + " --drop 103-107,149-162,219 --k 30 --episodes 3 --out " +
                q(dir / "p.bin"))
                .code,
            0);
  const auto r = run("select --checkpoint " + q(dir / "p.bin") + " --out " + q(dir / "sel.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = Json::parse(detail::read_text(dir / "sel.json"));
  const auto bands = j.at("bands_original_numbering").get<std::vector<std::size_t>>();
  ASSERT_EQ(bands.size(), 30u);
  EXPECT_EQ(std::set<std::size_t>(bands.begin(), bands.end()).size(), 30u);
  const std::set<std::size_t> dropped{103, 104, 105, 106, 107, 149, 150, 151, 152, 153, 154,
                                      155, 156, 157, 158, 159, 160, 161, 162, 219};
  for (auto b : bands) {
    EXPECT_LT(b, 220u);
    EXPECT_FALSE(dropped.count(b)) << b;
  }
  EXPECT_TRUE(j.contains("mie"));
  EXPECT_TRUE(j.contains("mean_corr"));
  EXPECT_EQ(j.at("selector"), "drl");
  EXPECT_EQ(j.at("manifest").at("timestamp"), "1970-01-02T00:00:00Z");
}

TEST(CliSelect, KAboveLIsConfigError) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 5 --pixels 32 --out " + q(dir / "s.csv")).code, 0);
  ASSERT_EQ(run("train " + q(dir / "s.csv") + " --k 2 --episodes 2 --out " + q(dir / "p.bin")).code, 0);
  EXPECT_EQ(run("select --checkpoint " + q(dir / "p.bin") + " --k 6").code, 2);
}

TEST(CliSelect, EqualManifestsGiveIdenticalReports) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 8 --pixels 64 --out " + q(dir / "s.csv")).code, 0);
  ASSERT_EQ(run("train " + q(dir / "s.csv") + " --k 3 --episodes 20 --out " + q(dir / "p.json")).code, 0);
  const auto a = run("select --checkpoint " + q(dir / "p.json"));
  const auto b = run("select --checkpoint " + q(dir / "p.json"));
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(Json::parse(a.out).at("k"), 3);
}

TEST(CliCompare, RankingMatchesExhaustiveForMaxMie) {
  TempDir dir;
  ASSERT_EQ(run("synth --kind labeled --bands 10 --pixels 300 --classes 3 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("compare " + q(dir / "s.csv") +
                     " --k 2,4 --selectors entropy_rank,exhaustive,greedy,random --runs 2 --out-json " +
                     q(dir / "c.json") + " --out-csv " + q(dir / "c.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = Json::parse(detail::read_text(dir / "c.json"));
  const auto& rows = j.at("rows");
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& rank = rows[4 * k];
    const auto& exh = rows[4 * k + 1];
    EXPECT_EQ(rank.at("selector"), "entropy_rank");
    EXPECT_EQ(exh.at("selector"), "exhaustive");
    EXPECT_EQ(rank.at("mie"), exh.at("mie"));
    auto a = rank.at("bands_original_numbering").get<std::vector<int>>();
    auto b = exh.at("bands_original_numbering").get<std::vector<int>>();
    std::sort(a.begin(), a.end());
    EXPECT_EQ(a, b);
  }
  const auto csv = lines(detail::read_text(dir / "c.csv"));
  ASSERT_EQ(csv.size(), 9u);
  EXPECT_EQ(csv[0], "selector,k,mie,mean_corr,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std");
  for (std::size_t i = 1; i < csv.size(); ++i) {
    EXPECT_EQ(std::count(csv[i].begin(), csv[i].end(), ','), 9) << csv[i];
  }
}

TEST(CliCompare, DrlAndMinCorr) {
  TempDir dir;
  ASSERT_EQ(run("synth --kind mixed --bands 8 --pixels 200 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("compare " + q(dir / "s.csv") +
                     " --k 3 --objective min_corr --selectors drl,exhaustive --episodes 50 --out-json " +
                     q(dir / "c.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = Json::parse(detail::read_text(dir / "c.json")).at("rows");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GE(rows[0].at("objective_score").get<double>(), rows[1].at("objective_score").get<double>());
  EXPECT_TRUE(rows[0].at("eval").is_null());
}

TEST(CliCompare, UnknownSelectorListsValidNames) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 4 --pixels 16 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("compare " + q(dir / "s.csv") + " --selectors greedy,magic");
  EXPECT_EQ(r.code, 2);
  for (const char* name : {"magic", "drl", "entropy_rank", "greedy", "random", "exhaustive"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name << "\n" << r.out;
  }
}

TEST(CliEval, ReportAndPerRunCsv) {
  TempDir dir;
  ASSERT_EQ(run("synth --kind labeled --bands 6 --pixels 240 --classes 4 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("eval " + q(dir / "s.csv") + " --bands 0,2-3 --runs 3 --out " + q(dir / "e.json") +
                     " --out-csv " + q(dir / "e.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = Json::parse(detail::read_text(dir / "e.json"));
  EXPECT_EQ(j.at("runs"), 3);
  EXPECT_EQ(j.at("per_run").size(), 3u);
  const double oa = j.at("oa_mean").get<double>();
  EXPECT_GE(oa, 0.0);
  EXPECT_LE(oa, 1.0);
  EXPECT_EQ(j.at("manifest").at("config").at("bands_original_numbering"), Json::parse("[0,2,3]"));
  const auto csv = lines(detail::read_text(dir / "e.csv"));
  ASSERT_EQ(csv.size(), 4u);
  EXPECT_EQ(csv[0], "run,seed,oa,aa,kappa");
}

TEST(CliEval, BandsFromSelectionReport) {
  TempDir dir;
  ASSERT_EQ(run("synth --kind labeled --bands 6 --pixels 120 --classes 2 --out " + q(dir / "s.csv")).code, 0);
  ASSERT_EQ(run("train " + q(dir / "s.csv") + " --k 2 --episodes 5 --out " + q(dir / "p.bin")).code, 0);
  ASSERT_EQ(run("select --checkpoint " + q(dir / "p.bin") + " --out " + q(dir / "sel.json")).code, 0);
  const auto r = run("eval " + q(dir / "s.csv") + " --report " + q(dir / "sel.json") + " --runs 2");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(Json::parse(r.out).at("runs"), 2);
}

TEST(CliStats, DumpShape) {
  TempDir dir;
  ASSERT_EQ(run("synth --kind mixed --bands 5 --pixels 50 --out " + q(dir / "s.csv")).code, 0);
  const auto r = run("stats " + q(dir / "s.csv") + " --bins 64");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j.at("bin_count"), 64);
  EXPECT_EQ(j.at("entropies").size(), 5u);
  EXPECT_TRUE(j.at("correlation_summary").contains("mean_offdiag"));
}

TEST(CliSynth, EnviOutputLoads) {
  TempDir dir;
  ASSERT_EQ(run("synth --bands 3 --pixels 10 --out " + q(dir / "s.hdr")).code, 0);
  const auto img = load_image(dir / "s.hdr");
  EXPECT_EQ(img.bands(), 3u);
  EXPECT_EQ(img.pixels(), 10u);
}

TEST(CliParse, UnknownOptionIsConfigError) {
  EXPECT_EQ(run("info --bogus").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}
