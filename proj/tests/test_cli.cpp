// SPDX-License-Identifier: Apache-2.0
// Drives the asd binary as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "asd/asd.hpp"

namespace fs = std::filesystem;
using namespace asd;

namespace {

struct Result {
  int status = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("asd_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }
  std::string p(const std::string& name) const { return path(name).string(); }

  Result run(const std::string& args) const {
    const auto out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd = std::string("cd '") + dir_.string() + "' && '" + ASD_CLI_PATH + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int raw = std::system(cmd.c_str());
    Result r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  Result ok(const std::string& args) const {
    auto r = run(args);
    EXPECT_EQ(r.status, 0) << args << "\n" << r.err;
    return r;
  }

  void write_perfect_scores(const std::string& name) const {
    ScoreTable t;
    for (int i = 0; i < 6; ++i) {
      t.clip_ids.push_back("c" + std::to_string(i));
      t.labels.push_back(i < 3 ? Label::normal : Label::anomalous);
      t.scores.push_back(i < 3 ? 0.1 * i : 5.0 + i);
    }
    write_file(path(name), encode_scores(t));
  }

  void make_dataset(std::size_t normal, std::size_t anomalous, double duration = 10.0) const {
    SyntheticParams prm;
    prm.duration_s = duration;
    write_synthetic_dataset(path("data"), normal, anomalous, 3, prm);
  }

  fs::path dir_;
};

TEST_F(Cli, EvalAucOnPerfectSeparationPrintsOne) {
  write_perfect_scores("scores.csv");
  const auto r = ok("eval-auc --scores scores.csv --roc roc.csv --svg roc.svg --store st");
  EXPECT_EQ(r.out, "auc=1.0000\n");
  EXPECT_TRUE(fs::exists(path("roc.csv")));
  EXPECT_NE(slurp(path("roc.svg")).find("<svg"), std::string::npos);
}

TEST_F(Cli, PreprocessRecordsAeDimensionsInMetadata) {
  make_dataset(2, 1);
  const auto r = ok("preprocess --manifest data/manifest.csv --profile ae --out index.csv --store st --jobs 2");
  EXPECT_NE(r.out.find("dims=64x313"), std::string::npos) << r.out;
  const auto index = decode_index(read_file(path("index.csv")));
  ASSERT_EQ(index.entries.size(), 3u);
  const ArtifactStore store(path("st"));
  for (const auto& e : index.entries) {
    const auto art = store.get_artifact(ArtifactId::parse(e.artifact));
    EXPECT_EQ(art.metadata.get_int("rows"), 64);
    EXPECT_EQ(art.metadata.get_int("cols"), 313);
    EXPECT_EQ(art.metadata.get("clip_id"), e.clip_id);
  }
}

TEST_F(Cli, SyntheticAutoencoderPathSeparatesClasses) {
  make_dataset(30, 10);
  ok("preprocess --manifest data/manifest.csv --out index.csv --store st");
  ok("split --manifest data/manifest.csv --out split.csv --store st --seed 1");
  ok("train-ae --spectrograms index.csv --split split.csv --out ae.model --epochs 5 --store st");
  ok("score-ae --model ae.model --spectrograms index.csv --split split.csv --out scores.csv --store st");
  const auto r = ok("eval-auc --scores scores.csv --store st");
  std::smatch m;
  ASSERT_TRUE(std::regex_match(r.out, m, std::regex(R"(auc=(\d\.\d{4})\n)"))) << r.out;
  EXPECT_GE(std::stod(m[1]), 0.90);
}

TEST_F(Cli, EmbeddingPathsRunAndEmitVotes) {
  make_dataset(20, 8, 2.0);
  ok("preprocess --manifest data/manifest.csv --out index.csv --store st");
  ok("split --manifest data/manifest.csv --out split.csv --store st --mode supervised");
  ok("embed --spectrograms index.csv --out emb.csv --store st");
  ok("lof-fit --embeddings emb.csv --split split.csv --out lof.model --k 4 --store st");
  ok("lof-score --model lof.model --embeddings emb.csv --split split.csv --out lof.csv --store st "
     "--contamination 0.1,0.2 --tie normal");
  const auto lof = decode_scores(read_file(path("lof.csv")));
  ASSERT_TRUE(lof.votes.has_value());
  EXPECT_EQ(lof.votes->size(), lof.size());
  ok("train-head --embeddings emb.csv --split split.csv --out head.model --store st --epochs 3");
  ok("score-head --model head.model --embeddings emb.csv --split split.csv --out head.csv --store st");
  EXPECT_EQ(decode_scores(read_file(path("head.csv"))).size(), lof.size());
  const auto t = ok("tsne --embeddings emb.csv --out coords.csv --svg tsne.svg --manifest data/manifest.csv "
                    "--color-by machine_type --perplexity 5 --iterations 250 --store st");
  EXPECT_NE(t.out.find("points=28"), std::string::npos) << t.out;
  const auto coords = parse_csv(read_file(path("coords.csv")));
  EXPECT_EQ(coords.rows.size(), 28u);
}

TEST_F(Cli, AttentionDistanceCsv) {
  AttentionFile f;
  AttentionTensor t;
  t.grid_rows = 2;
  t.grid_cols = 2;
  t.pitch_vertical = t.pitch_horizontal = 16.0;
  t.n_special = 0;
  t.heads = {MatrixXd::Identity(4, 4), MatrixXd::Constant(4, 4, 0.25)};
  f.layers = {t};
  write_attention(path("attn.bin"), f);
  ok("attn-distance --attention attn.bin --out dist.csv --svg dist.svg --store st");
  const auto csv = parse_csv(read_file(path("dist.csv")));
  ASSERT_EQ(csv.rows.size(), 2u);
  EXPECT_EQ(csv.header, (std::vector<std::string>{"layer", "head", "mean_distance_px"}));
  EXPECT_DOUBLE_EQ(std::stod(csv.rows[0][2]), 0.0);
  // Every patch sees itself at 0, two neighbours at 16 and the diagonal at 16*sqrt(2).
  EXPECT_NEAR(std::stod(csv.rows[1][2]), (32.0 + 16.0 * std::sqrt(2.0)) / 4.0, 1e-9);
}

TEST_F(Cli, RunsListShowsEachInvocation) {
  write_perfect_scores("scores.csv");
  for (int i = 0; i < 3; ++i) ok("eval-auc --scores scores.csv --store st");
  const auto r = ok("runs list --store st");
  int lines = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    ++lines;
    EXPECT_NE(line.find("eval-auc"), std::string::npos);
  }
  EXPECT_EQ(lines, 3);
  EXPECT_EQ(ArtifactStore(path("st")).list_runs().front().inputs.front().digest,
            sha256_hex(read_file(path("scores.csv"))));
}

TEST_F(Cli, IdenticalInputsGiveIdenticalDigests) {
  make_dataset(6, 2, 2.0);
  ok("preprocess --manifest data/manifest.csv --out a.csv --store s1 --jobs 3");
  ok("preprocess --manifest data/manifest.csv --out b.csv --store s2");
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  ok("train-ae --spectrograms a.csv --out m1.model --epochs 2 --seed 9 --store s1");
  ok("train-ae --spectrograms a.csv --out m2.model --epochs 2 --seed 9 --store s1");
  EXPECT_EQ(sha256_hex(slurp(path("m1.model"))), sha256_hex(slurp(path("m2.model"))));
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
  write_file(path("cfg.yaml"), "store: from_config\nlof: {k: 2}\n");
  write_perfect_scores("scores.csv");
  ok("eval-auc --scores scores.csv --config cfg.yaml");
  EXPECT_TRUE(fs::exists(path("from_config/ledger.csv")));
  ok("eval-auc --scores scores.csv --config cfg.yaml --store from_flag --strict-paper");
  const auto runs = ArtifactStore(path("from_flag")).list_runs();
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs.front().config.get("lof.k"), "2");
  EXPECT_EQ(runs.front().config.get("strict_paper"), "true");
  EXPECT_EQ(runs.front().config.get("autoencoder.standardize"), "false");
  EXPECT_EQ(runs.front().config.get("split.stratify"), "false");
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
  write_perfect_scores("scores.csv");
  const auto r = run("eval-auc --scores scores.csv --no-such-flag");
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(r.err.starts_with("error: code=")) << r.err;
  EXPECT_EQ(run("eval-auc").status, 1);  // missing required option
  write_file(path("bad.yaml"), "colour: blue\n");
  const auto c = run("eval-auc --scores scores.csv --config bad.yaml");
  EXPECT_EQ(c.status, 1);
  EXPECT_NE(c.err.find("code=config"), std::string::npos) << c.err;
}

TEST_F(Cli, InputErrorsExitTwo) {
  const auto missing = run("eval-auc --scores nothing.csv --store st");
  EXPECT_EQ(missing.status, 2);
  EXPECT_NE(missing.err.find("code=io"), std::string::npos) << missing.err;
  write_file(path("garbage.csv"), "a,b\n1,2\n");
  EXPECT_EQ(run("eval-auc --scores garbage.csv --store st").status, 2);
  write_file(path("fake.wav"), "RIFF....WAVEjunk");
  EXPECT_EQ(run("preprocess --input fake.wav --out i.csv --store st").status, 2);
}

TEST_F(Cli, NumericFailuresExitThree) {
  ScoreTable t;
  t.clip_ids = {"a", "b"};
  t.labels = {Label::normal, Label::normal};
  t.scores = {0.1, 0.2};
  write_file(path("one_class.csv"), encode_scores(t));
  const auto r = run("eval-auc --scores one_class.csv --store st");
  EXPECT_EQ(r.status, 3);
  EXPECT_TRUE(std::regex_search(r.err, std::regex(R"(^error: code=\w+ message=".*"\n$)"))) << r.err;
}

TEST_F(Cli, HelpListsFlagsForEverySubcommand) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
      {"make-synthetic", {"--out", "--normal", "--anomalous", "--seed"}},
      {"preprocess", {"--manifest", "--input", "--profile", "--out", "--jobs"}},
      {"split", {"--manifest", "--out", "--seed", "--mode", "--no-stratify"}},
      {"train-ae", {"--spectrograms", "--split", "--subset", "--epochs", "--lr", "--batch-size", "--no-standardize"}},
      {"score-ae", {"--model", "--spectrograms", "--out"}},
      {"embed", {"--spectrograms", "--out"}},
      {"train-head", {"--embeddings", "--epochs", "--lr", "--dropout"}},
      {"score-head", {"--model", "--embeddings", "--out"}},
      {"lof-fit", {"--embeddings", "--k", "--p"}},
      {"lof-score", {"--model", "--contamination", "--tie"}},
      {"eval-auc", {"--scores", "--roc", "--svg"}},
      {"tsne", {"--embeddings", "--perplexity", "--iterations", "--learning-rate", "--seed"}},
      {"attn-distance", {"--attention", "--out", "--svg"}},
      {"runs list", {"--store"}},
  };
  for (const auto& [cmd, flags] : expected) {
    const auto r = run(cmd + " --help");
    EXPECT_EQ(r.status, 0) << cmd;
    for (const auto& flag : std::vector<std::string>{"--config", "--store", "--strict-paper"})
      EXPECT_NE(r.out.find(flag), std::string::npos) << cmd << " " << flag;
    for (const auto& flag : flags) EXPECT_NE(r.out.find(flag), std::string::npos) << cmd << " " << flag;
  }
}

}  // namespace
