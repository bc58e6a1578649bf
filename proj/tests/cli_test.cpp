#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CASLU_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("caslu_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    ASSERT_EQ(run("synth --grammar " + std::string(CASLU_DATA_DIR) + "/homophone_grammar.json --n 400 --seed 3 --out " +
                  path("clean.tsv"))
                  .code,
              0);
    ASSERT_EQ(run("gen-data --corpus " + path("clean.tsv") + " --seed 4 --split 150,50,100 --out " +
                  path("noisy.jsonl"))
                  .code,
              0);
    std::ofstream(path("small.cfg")) << "hidden = 8\ntext_dim = 8\nphoneme_dim = 8\nepochs = 2\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, VersionAndUsageErrors) {
  EXPECT_EQ(run("--version").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("train --train " + path("missing.jsonl") + " --dev " + path("missing.jsonl") + " --out " +
                path("x"))
                .code,
            2);
}

TEST_F(Cli, GenDataIsByteIdenticalAndReportsRates) {
  auto r = run("gen-data --corpus " + path("clean.tsv") + " --seed 4 --split 150,50,100 --out " + path("again.jsonl"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(slurp(path("again.jsonl")), slurp(path("noisy.jsonl")));
  EXPECT_EQ(slurp(path("again.train.jsonl")), slurp(path("noisy.train.jsonl")));
  double wer = 0, per = 0;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    std::sscanf(line.c_str(), "mean WER %lf", &wer);
    std::sscanf(line.c_str(), "mean PER %lf", &per);
  }
  EXPECT_GT(wer, 0.0);
  EXPECT_LE(per, wer);
  auto manifest = nlohmann::json::parse(slurp(path("noisy.jsonl.manifest.json")));
  EXPECT_EQ(manifest["command"], "gen-data");
  EXPECT_EQ(manifest["inputs"].size(), 3u);
}

TEST_F(Cli, ZeroNoiseConfusionGivesEmptyCorpus) {
  auto cm = nlohmann::json::parse(slurp(std::string(CASLU_DATA_DIR) + "/confusion.json"));
  const std::size_t n = cm["phonemes"].size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cm["sub"][i][j] = i == j ? 1.0 : 0.0;
  cm["p_ins"] = 0.0;
  cm["p_del"] = 0.0;
  std::ofstream(path("zero.json")) << cm.dump();
  auto r = run("gen-data --corpus " + path("clean.tsv") + " --confusion " + path("zero.json") + " --out " +
               path("empty.jsonl"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(fs::file_size(path("empty.jsonl")), 0u);
}

TEST_F(Cli, ParseErrorsExitTwo) {
  std::ofstream(path("bad.tsv")) << "label without tab\n";
  EXPECT_EQ(run("gen-data --corpus " + path("bad.tsv") + " --out " + path("bad.jsonl")).code, 2);
  std::ofstream(path("bad.cfg")) << "epochs = many\n";
  EXPECT_EQ(run("train --config " + path("bad.cfg") + " --train " + path("noisy.train.jsonl") + " --dev " +
                path("noisy.dev.jsonl") + " --out " + path("bad_run"))
                .code,
            2);
}

TEST_F(Cli, TrainEvalTraceAndSignTest) {
  const std::string common = " --config " + path("small.cfg") + " --train " + path("noisy.train.jsonl") + " --dev " +
                             path("noisy.dev.jsonl");
  ASSERT_EQ(run("train" + common + " --variant caslu --seeds 1,2 --out " + path("caslu")).code, 0);
  ASSERT_EQ(run("train" + common + " --variant text_only --seeds 1 --out " + path("b2")).code, 0);
  for (const char* f : {"seed-1.ckpt", "seed-2.ckpt", "seed-1.metrics.jsonl", "report.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(path("caslu") + "/" + f)) << f;
  auto manifest = nlohmann::json::parse(slurp(path("caslu") + "/manifest.json"));
  EXPECT_EQ(manifest["config"]["batch_size"], 64);
  EXPECT_EQ(manifest["config"]["hidden"], 8);
  EXPECT_EQ(manifest["seeds"], nlohmann::json::array({1, 2}));
  std::ifstream metrics(path("caslu") + "/seed-1.metrics.jsonl");
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(metrics, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("train_loss") && j.contains("dev_accuracy"));
    ++epochs;
  }
  EXPECT_EQ(epochs, 2u);

  const std::string test = " --test " + path("noisy.test.jsonl");
  auto both = run("eval --ckpt " + path("caslu/seed-1.ckpt") + " --ckpt " + path("caslu/seed-2.ckpt") + test +
                  " --stratify 0.3,0.6 --out " + path("report.json"));
  ASSERT_EQ(both.code, 0);
  EXPECT_NE(both.out.find("CASLU"), std::string::npos);
  auto report = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_TRUE(report["accuracy_trans"].is_number());
  EXPECT_TRUE(report["accuracy_asr"].is_number());
  EXPECT_EQ(report["asr"]["per_seed"].size(), 2u);
  std::size_t total = 0;
  for (const auto& b : report["asr"]["buckets"]) total += b["count"].get<std::size_t>();
  EXPECT_EQ(report["asr"]["buckets"].size(), 3u);
  EXPECT_EQ(total, 2 * 100u);

  std::string first_id;
  {
    std::ifstream in(path("noisy.test.jsonl"));
    std::getline(in, line);
    first_id = nlohmann::json::parse(line)["id"];
  }
  ASSERT_EQ(run("eval --ckpt " + path("caslu/seed-1.ckpt") + test + " --field asr --out " + path("a.json") +
                " --preds " + path("a.tsv") + " --trace " + first_id + " --trace-out " + path("trace.json"))
                .code,
            0);
  auto trace = nlohmann::json::parse(slurp(path("trace.json")));
  EXPECT_EQ(trace["trace"]["alpha"].size(), trace["trace"]["words"].size());
  EXPECT_EQ(trace["trace"]["beta"].size(), trace["trace"]["phonemes"].size());

  ASSERT_EQ(run("eval --ckpt " + path("b2/seed-1.ckpt") + test + " --field asr --out " + path("b.json") + " --preds " +
                path("b.tsv"))
                .code,
            0);
  EXPECT_EQ(run("eval --ckpt " + path("b2/seed-1.ckpt") + test + " --trace " + first_id).code, 2);

  auto same = run("signtest --preds-a " + path("a.tsv") + " --preds-b " + path("a.tsv") + " --labels " +
                  path("noisy.test.jsonl"));
  EXPECT_EQ(same.code, 0);
  EXPECT_NE(same.out.find("p-value 1\n"), std::string::npos);
  EXPECT_EQ(run("signtest --preds-a " + path("a.tsv") + " --preds-b " + path("b.tsv") + " --labels " +
                path("noisy.test.jsonl"))
                .code,
            0);
}

TEST_F(Cli, RetrainingIsByteIdentical) {
  const std::string common = " --config " + path("small.cfg") + " --train " + path("noisy.train.jsonl") + " --dev " +
                             path("noisy.dev.jsonl") + " --variant b3 --seeds 5";
  ASSERT_EQ(run("train" + common + " --out " + path("r1")).code, 0);
  ASSERT_EQ(run("train" + common + " --out " + path("r2")).code, 0);
  EXPECT_EQ(slurp(path("r1/seed-5.ckpt")), slurp(path("r2/seed-5.ckpt")));
  EXPECT_EQ(slurp(path("r1/seed-5.metrics.jsonl")), slurp(path("r2/seed-5.metrics.jsonl")));
}

TEST_F(Cli, DivergenceExitsThree) {
  EXPECT_EQ(run("train --config " + path("small.cfg") + " --set lr=1e38 --variant b2 --seeds 1 --train " +
                path("noisy.train.jsonl") + " --dev " + path("noisy.dev.jsonl") + " --out " + path("div"))
                .code,
            3);
}

TEST_F(Cli, GradcheckExitCodes) {
  auto ok = run("gradcheck --variant caslu");
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("attention.k_text"), std::string::npos);
  EXPECT_EQ(run("gradcheck --variant caslu --planted-bug").code, 1);
}

TEST_F(Cli, G2pReadsArguments) {
  auto r = run("g2p had");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "hh ae d\n");
}

}  // namespace
