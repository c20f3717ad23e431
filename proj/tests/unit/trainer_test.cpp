#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cmls/errors.hpp"
#include "cmls/synthetic.hpp"
#include "cmls/trainer.hpp"
#include "test_support.hpp"

namespace cmls {
namespace {

struct SyntheticSplits : ::testing::Test {
  static void SetUpTestSuite() {
    dir = new testing::TempDir;
    SyntheticSpec spec;
    spec.num_intents = 2;
    spec.per_intent = 20;
    spec.seed = 5;
    data = new SyntheticDataset(make_synthetic_dataset(spec, dir->path() / "data"));
    const FeatureConfig fc;
    train_split = new LabeledFeatures(load_split(data->train_manifest, data->vocab, fc));
    valid_split = new LabeledFeatures(load_split(data->valid_manifest, data->vocab, fc));
  }
  static void TearDownTestSuite() {
    delete train_split;
    delete valid_split;
    delete data;
    delete dir;
  }

  static RunConfig config(const std::string& coupling, int epochs = 3) {
    RunConfig c = profile_defaults("synthetic");
    c.acoustic.hidden_units = 16;
    c.loss.coupling = parse_coupling(coupling);
    c.training.max_epochs = epochs;
    c.training.output_dir = dir->path() / ("run_" + coupling);
    return c;
  }

  static TrainOptions quiet() {
    TrainOptions o;
    o.write_outputs = false;
    return o;
  }

  static testing::TempDir* dir;
  static SyntheticDataset* data;
  static LabeledFeatures* train_split;
  static LabeledFeatures* valid_split;
};
testing::TempDir* SyntheticSplits::dir = nullptr;
SyntheticDataset* SyntheticSplits::data = nullptr;
LabeledFeatures* SyntheticSplits::train_split = nullptr;
LabeledFeatures* SyntheticSplits::valid_split = nullptr;

// Lexical encoding shifted by a learnable bias, so fine-tuning has something to move.
class BiasedTextEncoder final : public TextEncoder {
 public:
  BiasedTextEncoder() : bias_("text.bias", Matrix::Zero(1, kEmbeddingDim)) {}
  const std::string& model_id() const override { return id_; }
  int dim() const override { return kEmbeddingDim; }
  ParameterRefs parameters() override { return {&bias_}; }
  ConstParameterRefs parameters() const override { return {&bias_}; }

 protected:
  Vector encode_one(const std::string& text) const override {
    return base_.encode(std::vector<std::string>{text}).row(0).transpose() + bias_.value.row(0).transpose();
  }
  ag::Var forward_on_tape(ag::Tape& tape, const std::string& text) const override {
    const Matrix lex = base_.encode(std::vector<std::string>{text});
    return ag::add(tape.constant(lex), tape.param(bias_));
  }

 private:
  std::string id_ = "test:biased";
  LexicalTextEncoder base_;
  Parameter bias_;
};

TEST_F(SyntheticSplits, IdenticalSeedsGiveIdenticalHistories) {
  const RunConfig c = config("triplet");
  const TrainResult a = train(c, data->vocab, *train_split, *valid_split, quiet());
  const TrainResult b = train(c, data->vocab, *train_split, *valid_split, quiet());
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].to_json(), b.history[i].to_json());
  EXPECT_EQ(fingerprint(a.best.model.parameters()), fingerprint(b.best.model.parameters()));
}

TEST_F(SyntheticSplits, DifferentSeedsDiffer) {
  RunConfig c = config("none", 1);
  const TrainResult a = train(c, data->vocab, *train_split, *valid_split, quiet());
  c.seed = 99;
  const TrainResult b = train(c, data->vocab, *train_split, *valid_split, quiet());
  EXPECT_NE(fingerprint(a.best.model.parameters()), fingerprint(b.best.model.parameters()));
}

TEST_F(SyntheticSplits, EmptyOrDegenerateInputsRejected) {
  const RunConfig c = config("triplet");
  const LabeledFeatures empty;
  EXPECT_THROW(train(c, data->vocab, empty, *valid_split, quiet()), ValidationError);
  EXPECT_THROW(train(c, data->vocab, *train_split, empty, quiet()), ValidationError);
  const IntentVocab one(std::vector<std::string>{"only"});
  EXPECT_THROW(train(c, one, *train_split, *valid_split, quiet()), ValidationError);
}

TEST_F(SyntheticSplits, WritesConfigMetricsAndCheckpoint) {
  const RunConfig c = config("l2", 3);
  int calls = 0;
  TrainOptions o;
  o.on_epoch = [&](const EpochMetrics&) { ++calls; };
  const TrainResult r = train(c, data->vocab, *train_split, *valid_split, o);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(r.checkpoint_path, c.training.output_dir / "best.ckpt");
  EXPECT_TRUE(std::filesystem::exists(r.checkpoint_path));
  EXPECT_EQ(parse_run_config(testing::read_file(c.training.output_dir / "config.yaml")).hash(), c.hash());

  std::ifstream metrics(c.training.output_dir / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"].get<int>(), ++lines);
    for (const char* key : {"ce_acoustic", "ce_text", "coupling", "train_loss", "valid_loss", "valid_accuracy"})
      EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_FALSE(j.contains("seconds"));
  }
  EXPECT_EQ(lines, 3);
}

TEST_F(SyntheticSplits, TrainingLossDecreases) {
  const TrainResult r = train(config("triplet", 6), data->vocab, *train_split, *valid_split, quiet());
  ASSERT_EQ(r.history.size(), 6u);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_LT(r.history.back().ce_acoustic, r.history.front().ce_acoustic);
}

TEST_F(SyntheticSplits, BestCheckpointHasLowestValidationLoss) {
  const TrainResult r = train(config("ranking", 4), data->vocab, *train_split, *valid_split, quiet());
  double lowest = 1e300;
  for (const EpochMetrics& m : r.history) lowest = std::min(lowest, m.valid_loss);
  EXPECT_EQ(r.best.best_valid_loss, lowest);
  EXPECT_EQ(r.history[static_cast<std::size_t>(r.best.epoch - 1)].valid_loss, lowest);
}

TEST_F(SyntheticSplits, BaselineNeverConstructsTextEncoder) {
  RunConfig c = config("none", 2);
  c.loss.lambda1 = 0.0;
  c.text.model = "no-such-org/unavailable-model";
  text_encoder_stats().reset();
  const TrainResult r = train(c, data->vocab, *train_split, *valid_split, quiet());
  EXPECT_EQ(text_encoder_stats().constructed.load(), 0);
  EXPECT_EQ(text_encoder_stats().forward_calls.load(), 0);
  for (const EpochMetrics& m : r.history) {
    EXPECT_EQ(m.ce_text, 0.0);
    EXPECT_EQ(m.coupling, 0.0);
  }
}

TEST_F(SyntheticSplits, CoupledRunResolvesMissingModelAsError) {
  RunConfig c = config("triplet", 1);
  c.text.model = "no-such-org/unavailable-model";
  EXPECT_THROW(train(c, data->vocab, *train_split, *valid_split, quiet()), ResolutionError);
}

TEST_F(SyntheticSplits, FrozenTextEncoderIsUntouched) {
  BiasedTextEncoder te;
  const auto before = fingerprint(te.parameters());
  TrainOptions o = quiet();
  o.text_encoder = &te;
  RunConfig c = config("triplet", 2);
  c.text.fine_tune = false;
  train(c, data->vocab, *train_split, *valid_split, o);
  EXPECT_EQ(fingerprint(te.parameters()), before);
  EXPECT_FALSE(te.parameters()[0]->trainable);
}

TEST_F(SyntheticSplits, FineTuningMovesTextEncoder) {
  BiasedTextEncoder te;
  const auto before = fingerprint(te.parameters());
  TrainOptions o = quiet();
  o.text_encoder = &te;
  RunConfig c = config("triplet", 1);
  c.text.fine_tune = true;
  c.optimizer.lr_text = 1e-2;
  train(c, data->vocab, *train_split, *valid_split, o);
  EXPECT_NE(fingerprint(te.parameters()), before);
}

TEST_F(SyntheticSplits, CouplingTermDoesNotReachTextEncoder) {
  BiasedTextEncoder te;
  const auto before = fingerprint(te.parameters());
  TrainOptions o = quiet();
  o.text_encoder = &te;
  RunConfig c = config("triplet", 1);
  c.text.fine_tune = true;
  c.loss.lambda1 = 0.0;
  c.optimizer.lr_text = 1e-2;
  train(c, data->vocab, *train_split, *valid_split, o);
  EXPECT_EQ(fingerprint(te.parameters()), before);
}

TEST_F(SyntheticSplits, AdversarialRunTracksDiscriminator) {
  const TrainResult r = train(config("adversarial", 2), data->vocab, *train_split, *valid_split, quiet());
  ASSERT_TRUE(r.best.discriminator.has_value());
  for (const EpochMetrics& m : r.history) {
    EXPECT_TRUE(std::isfinite(m.discriminator_loss));
    EXPECT_GE(m.discriminator_accuracy, 0.0);
    EXPECT_LE(m.discriminator_accuracy, 1.0);
  }
  const TrainResult t = train(config("triplet", 1), data->vocab, *train_split, *valid_split, quiet());
  EXPECT_FALSE(t.best.discriminator.has_value());
  EXPECT_TRUE(std::isnan(t.history[0].discriminator_loss));
}

TEST_F(SyntheticSplits, NonFiniteFeaturesAbortWithDivergence) {
  LabeledFeatures poisoned = *train_split;
  poisoned.features[0].frames(0, 0) = std::nan("");
  EXPECT_THROW(train(config("triplet", 1), data->vocab, poisoned, *valid_split, quiet()), DivergenceError);
}

TEST_F(SyntheticSplits, DivergenceKeepsLastGoodCheckpoint) {
  LabeledFeatures mutable_train = *train_split;
  RunConfig c = config("triplet", 4);
  c.training.output_dir = dir->path() / "diverge";
  TrainOptions o;
  std::uint64_t saved = 0;
  o.on_epoch = [&](const EpochMetrics& m) {
    if (m.epoch == 2) {
      saved = fingerprint(load_checkpoint(c.training.output_dir / "best.ckpt").model.parameters());
      for (FeatureSequence& f : mutable_train.features) f.frames(0, 0) = std::nan("");
    }
  };
  try {
    train(c, data->vocab, mutable_train, *valid_split, o);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("best.ckpt"), std::string::npos) << e.what();
  }
  ASSERT_NE(saved, 0u);
  EXPECT_EQ(fingerprint(load_checkpoint(c.training.output_dir / "best.ckpt").model.parameters()), saved);
}

TEST(EpochMetrics, JsonOmitsTimingAndWritesNullForNaN) {
  EpochMetrics m;
  m.epoch = 4;
  m.discriminator_loss = std::nan("");
  m.seconds = 12.5;
  const auto j = nlohmann::json::parse(m.to_json());
  EXPECT_EQ(j["epoch"], 4);
  EXPECT_FALSE(j.contains("seconds"));
  EXPECT_TRUE(j["discriminator_loss"].is_null());
}

}  // namespace
}  // namespace cmls
