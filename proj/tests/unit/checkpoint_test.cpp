#include <fstream>

#include <gtest/gtest.h>

#include "cmls/checkpoint.hpp"
#include "cmls/errors.hpp"
#include "cmls/evaluator.hpp"
#include "cmls/synthetic.hpp"
#include "cmls/trainer.hpp"
#include "test_support.hpp"

namespace cmls {
namespace {

struct TrainedCheckpoint : ::testing::Test {
  static void SetUpTestSuite() {
    dir = new testing::TempDir;
    SyntheticSpec spec;
    spec.per_intent = 12;
    spec.seed = 9;
    data = new SyntheticDataset(make_synthetic_dataset(spec, dir->path() / "data"));
    RunConfig c = profile_defaults("synthetic");
    c.acoustic.hidden_units = 8;
    c.loss.coupling = Coupling::adversarial;
    c.training.max_epochs = 1;
    c.training.output_dir = dir->path() / "run";
    const LabeledFeatures tr = load_split(data->train_manifest, data->vocab, c.features);
    const LabeledFeatures va = load_split(data->valid_manifest, data->vocab, c.features);
    path = new std::filesystem::path(train(c, data->vocab, tr, va).checkpoint_path);
  }
  static void TearDownTestSuite() {
    delete path;
    delete data;
    delete dir;
  }

  static std::filesystem::path copy_to(const std::string& name, const std::string& bytes) {
    const auto p = dir->path() / name;
    testing::write_file(p, bytes);
    return p;
  }

  static testing::TempDir* dir;
  static SyntheticDataset* data;
  static std::filesystem::path* path;
};
testing::TempDir* TrainedCheckpoint::dir = nullptr;
SyntheticDataset* TrainedCheckpoint::data = nullptr;
std::filesystem::path* TrainedCheckpoint::path = nullptr;

TEST_F(TrainedCheckpoint, RoundTripPreservesEverything) {
  const Checkpoint a = load_checkpoint(*path);
  const auto again = dir->path() / "again.ckpt";
  save_checkpoint(again, a);
  const Checkpoint b = load_checkpoint(again);
  EXPECT_EQ(testing::read_file(*path), testing::read_file(again));
  EXPECT_EQ(b.config.to_yaml(), a.config.to_yaml());
  EXPECT_EQ(b.epoch, a.epoch);
  EXPECT_EQ(b.best_valid_loss, a.best_valid_loss);
  EXPECT_EQ(b.model.vocab.labels(), a.model.vocab.labels());
  EXPECT_EQ(fingerprint(b.model.parameters()), fingerprint(a.model.parameters()));
  ASSERT_TRUE(a.discriminator && b.discriminator);
  EXPECT_EQ(fingerprint(b.discriminator->parameters()), fingerprint(a.discriminator->parameters()));
}

TEST_F(TrainedCheckpoint, ReloadedModelEvaluatesIdentically) {
  const Checkpoint a = load_checkpoint(*path);
  const auto again = dir->path() / "eval.ckpt";
  save_checkpoint(again, a);
  const Checkpoint b = load_checkpoint(again);
  const EvaluationReport ra = evaluate(a, data->test_manifest), rb = evaluate(b, data->test_manifest);
  EXPECT_EQ(ra.to_json(), rb.to_json());
  EXPECT_EQ(export_embeddings(a, data->test_manifest).vectors, export_embeddings(b, data->test_manifest).vectors);
}

TEST_F(TrainedCheckpoint, NoTemporaryLeftBehind) {
  for (const auto& e : std::filesystem::directory_iterator(path->parent_path()))
    EXPECT_EQ(e.path().string().find(".tmp"), std::string::npos) << e.path();
}

TEST_F(TrainedCheckpoint, BadMagicIsParseError) {
  std::string bytes = testing::read_file(*path);
  bytes[0] = 'X';
  EXPECT_THROW(load_checkpoint(copy_to("magic.ckpt", bytes)), ParseError);
  EXPECT_THROW(load_checkpoint(copy_to("empty.ckpt", "")), ParseError);
}

TEST_F(TrainedCheckpoint, TruncationIsParseError) {
  const std::string bytes = testing::read_file(*path);
  for (const std::size_t keep : {std::size_t{10}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(load_checkpoint(copy_to("trunc.ckpt", bytes.substr(0, keep))), ParseError) << keep;
}

TEST_F(TrainedCheckpoint, HashMismatchIsValidationError) {
  std::string bytes = testing::read_file(*path);
  bytes[12] = static_cast<char>(bytes[12] ^ 0x5a);
  EXPECT_THROW(load_checkpoint(copy_to("hash.ckpt", bytes)), ValidationError);
}

TEST_F(TrainedCheckpoint, MissingFileIsValidationError) {
  EXPECT_THROW(load_checkpoint(dir->path() / "absent.ckpt"), ValidationError);
}

}  // namespace
}  // namespace cmls
