// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "asd/asd.hpp"
#include "support/fixtures.hpp"

using namespace asd;
namespace fs = std::filesystem;

namespace {

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("asd_store_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

}  // namespace

TEST(Digest, KnownSha256Vectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(StoreTest, PutThenGetIsBitIdentical) {
  ArtifactStore store(root_);
  std::string payload = "binary\0payload\xff", meta_text;
  payload.push_back('\0');
  Metadata meta;
  meta.set("rows", 3);
  const auto id = store.put_artifact("scores", payload, meta);
  EXPECT_EQ(id.digest, sha256_hex(payload));
  EXPECT_TRUE(fs::exists(root_ / "scores" / id.digest.substr(0, 2) / id.digest));
  EXPECT_TRUE(fs::exists(root_ / "scores" / id.digest.substr(0, 2) / (id.digest + ".meta")));
  const auto back = store.get_artifact(ArtifactId::parse(id.str()));
  EXPECT_EQ(back.payload, payload);
  EXPECT_EQ(back.metadata, meta);
}

TEST_F(StoreTest, EveryArtifactKindRoundTrips) {
  ArtifactStore store(root_);
  Rng rng(1);
  VectorXd tone(20000);
  for (Eigen::Index i = 0; i < tone.size(); ++i) tone(i) = std::sin(0.05 * static_cast<double>(i));
  const auto spec = compute_log_mel(tone, profile_defaults(Profile::ae));
  const auto set = fixture::two_gaussians(30, 4, 3.0, 2);
  const auto head = train_head(set, {.epochs = 1});
  const auto roc = roc_auc(std::vector<double>{0.1, 0.7, 0.3}, {false, true, true});

  const std::vector<std::pair<std::string, std::string>> payloads = {
      {"spectrogram", encode_spectrogram(spec)},
      {"model", encode_model(to_model_file(head))},
      {"embeddings", encode_embeddings(set)},
      {"scores", "clip_id,score\na,0.5\n"},
      {"roc", encode_roc(roc)},
  };
  for (const auto& [kind, bytes] : payloads) {
    const auto id = store.put_artifact(kind, bytes);
    EXPECT_EQ(store.get_artifact(id).payload, bytes) << kind;
  }
  const auto back = decode_spectrogram(store.get_artifact({"spectrogram", sha256_hex(encode_spectrogram(spec))}).payload, {});
  EXPECT_EQ(back.data, spec.data);
  const auto emb = decode_embeddings(encode_embeddings(set));
  EXPECT_EQ(emb.vectors, set.vectors);
  EXPECT_EQ(emb.labels, set.labels);
  EXPECT_EQ(emb.clip_ids, set.clip_ids);
}

TEST_F(StoreTest, TamperedPayloadIsCorruption) {
  ArtifactStore store(root_);
  const auto id = store.put_artifact("model", "weights");
  {
    std::ofstream out(store.payload_path(id), std::ios::binary | std::ios::trunc);
    out << "weightz";
  }
  try {
    store.get_artifact(id);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::corruption);
  }
}

TEST_F(StoreTest, UnknownKindRejected) {
  ArtifactStore store(root_);
  try {
    store.put_artifact("pickle", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_kind);
  }
  EXPECT_THROW(ArtifactId::parse("pickle:" + std::string(64, 'a')), Error);
}

TEST_F(StoreTest, LedgerListsRunsInInsertionOrderAndIsAppendOnly) {
  ArtifactStore store(root_);
  std::vector<std::string> ids;
  for (const char* stage : {"preprocess", "train-ae", "score-ae"}) {
    RunRecord r;
    r.stage = stage;
    r.seed = 7;
    r.config.set("profile", "ae");
    r.config.set("lr", 0.001);
    r.outputs.push_back({"out/" + std::string(stage), sha256_hex(stage)});
    const auto before = fs::exists(store.ledger_path()) ? read_file(store.ledger_path()) : std::string{};
    ids.push_back(store.record_run(r));
    const auto after = read_file(store.ledger_path());
    EXPECT_EQ(after.substr(0, before.size()), before);
  }
  const auto runs = store.list_runs();
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0].stage, "preprocess");
  EXPECT_EQ(runs[1].stage, "train-ae");
  EXPECT_EQ(runs[2].stage, "score-ae");
  EXPECT_EQ(runs[2].run_id, ids[2]);
  EXPECT_EQ(runs[1].config.get_double("lr"), 0.001);
  EXPECT_EQ(runs[0].outputs[0].digest, sha256_hex("preprocess"));
  EXPECT_EQ(runs[0].seed, 7u);
}

TEST_F(StoreTest, DeterministicStageGivesIdenticalDigest) {
  ArtifactStore store(root_);
  const auto set = fixture::two_gaussians(100, 3, 2.0, 3);
  const auto a = store.put_artifact("model", encode_model(to_model_file(train_head(set, {.epochs = 2, .seed = 1}))));
  const auto b = store.put_artifact("model", encode_model(to_model_file(train_head(set, {.epochs = 2, .seed = 1}))));
  EXPECT_EQ(a, b);
}
