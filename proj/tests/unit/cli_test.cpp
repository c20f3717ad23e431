#include <sys/wait.h>

#include <array>
#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cmls/audio.hpp"
#include "cmls/evaluator.hpp"
#include "cmls/synthetic.hpp"
#include "test_support.hpp"

namespace cmls {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CMLS_CLI_PATH) + " --log-level warn " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void write_tone(const fs::path& path, int intent, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.min_seconds = 0.1;
  spec.max_seconds = 0.15;
  Rng rng(seed);
  fs::create_directories(path.parent_path());
  write_wav_pcm16(path, synthesize_utterance(intent % 2, spec, rng));
}

struct CliRun : ::testing::Test {
  static void SetUpTestSuite() {
    if (std::string(CMLS_CLI_PATH).empty()) return;
    dir = new TempDir;
    prepared = run("prepare --kind synthetic --num-intents 2 --per-intent 50 --out " + q(data()), log("prepare"));
    if (prepared == 0)
      trained = run("train --config " + q(data() / "config.yaml") + " --set loss.coupling=triplet --set training.output_dir=" +
                        q(dir->path() / "run"),
                    log("train"));
  }
  static void TearDownTestSuite() { delete dir; }
  void SetUp() override {
    if (std::string(CMLS_CLI_PATH).empty()) GTEST_SKIP() << "cmls tool not built";
  }

  static fs::path data() { return dir->path() / "data"; }
  static fs::path ckpt() { return dir->path() / "run" / "best.ckpt"; }
  static fs::path log(const std::string& name) { return dir->path() / (name + ".log"); }

  static TempDir* dir;
  static int prepared, trained;
};
TempDir* CliRun::dir = nullptr;
int CliRun::prepared = -1;
int CliRun::trained = -1;

TEST_F(CliRun, UsageErrors) {
  EXPECT_EQ(run("", log("none")), 1);
  EXPECT_EQ(run("frobnicate", log("unknown")), 1);
  EXPECT_EQ(run("train --config /nonexistent.yaml", log("nofile")), 1);
}

TEST_F(CliRun, PrepareWritesSplitsConfigAndFeatures) {
  ASSERT_EQ(prepared, 0) << testing::read_file(log("prepare"));
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "vocab.txt", "config.yaml"})
    EXPECT_TRUE(fs::exists(data() / f)) << f;
  EXPECT_TRUE(fs::is_directory(data() / "features"));
  EXPECT_FALSE(fs::is_empty(data() / "features"));
}

TEST_F(CliRun, TrainedTripletModelClassifiesHeldOutSet) {
  ASSERT_EQ(trained, 0) << testing::read_file(log("train"));
  EXPECT_TRUE(fs::exists(dir->path() / "run" / "metrics.jsonl"));
  const fs::path out = dir->path() / "eval";
  ASSERT_EQ(run("eval --checkpoint " + q(ckpt()) + " --manifest " + q(data() / "test.jsonl") + " --out-dir " + q(out) +
                    " --fpr " + synthetic_intent_names(2)[0] + ":" + synthetic_intent_names(2)[1],
                log("eval")),
            0)
      << testing::read_file(log("eval"));
  const auto metrics = nlohmann::json::parse(testing::read_file(out / "metrics.json"));
  EXPECT_GE(metrics["accuracy"].get<double>(), 0.95);
  EXPECT_TRUE(fs::exists(out / "confusion.csv"));
  EXPECT_TRUE(fs::exists(out / "predictions.tsv"));
  EXPECT_NE(testing::read_file(log("eval")).find("false positive rate"), std::string::npos);
}

TEST_F(CliRun, ExportAndProject) {
  ASSERT_EQ(trained, 0);
  const fs::path tsv = dir->path() / "emb" / "test.tsv", pcs = dir->path() / "emb" / "pca.tsv";
  ASSERT_EQ(run("export --checkpoint " + q(ckpt()) + " --manifest " + q(data() / "test.jsonl") + " --out " + q(tsv),
                log("export")),
            0)
      << testing::read_file(log("export"));
  const EmbeddingTable t = read_embeddings_tsv(tsv);
  EXPECT_EQ(t.vectors.rows(), 10);
  EXPECT_EQ(t.vectors.cols(), kEmbeddingDim);
  ASSERT_EQ(run("project --embeddings " + q(tsv) + " --out " + q(pcs), log("project")), 0);
  std::ifstream in(pcs);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "utterance_id\tintent\tpc0\tpc1");
}

TEST_F(CliRun, EvalOnForeignVocabularyFails) {
  ASSERT_EQ(trained, 0);
  const fs::path other = dir->path() / "six";
  SyntheticSpec spec;
  spec.num_intents = 6;
  spec.per_intent = 10;
  make_synthetic_dataset(spec, other);
  EXPECT_EQ(run("eval --checkpoint " + q(ckpt()) + " --manifest " + q(other / "test.jsonl"), log("foreign")), 2)
      << testing::read_file(log("foreign"));
}

TEST_F(CliRun, BadConfigIsValidationExit) {
  testing::write_file(dir->path() / "bad.yaml", "profile: synthetic\nloss:\n  coupling: cosine\n");
  EXPECT_EQ(run("train --config " + q(dir->path() / "bad.yaml"), log("bad")), 2);
  testing::write_file(dir->path() / "typo.yaml", "profile: synthetic\ntraning:\n  batch_size: 4\n");
  EXPECT_EQ(run("train --config " + q(dir->path() / "typo.yaml"), log("typo")), 2);
  EXPECT_NE(testing::read_file(log("typo")).find("traning"), std::string::npos);
}

TEST_F(CliRun, VerifySelectedSuites) {
  EXPECT_EQ(run("verify --suite identities --suite sampler --suite pooling", log("verify")), 0)
      << testing::read_file(log("verify"));
  EXPECT_EQ(run("verify --suite nonsense", log("verify_bad")), 2);
}

TEST_F(CliRun, FscLayoutYieldsThirtyOneIntents) {
  const fs::path root = dir->path() / "fsc";
  const std::vector<std::string> actions = {"activate", "deactivate", "increase", "decrease", "bring", "change language"};
  std::vector<std::array<std::string, 3>> intents;
  for (int i = 0; i < 31; ++i)
    intents.push_back({actions[static_cast<std::size_t>(i % 6)], "obj" + std::to_string(i / 6),
                       i % 2 ? "none" : "kitchen"});
  std::uint64_t seed = 1;
  for (const char* split : {"train", "valid", "test"}) {
    fs::create_directories(root / "data");
    std::ofstream csv(root / "data" / (std::string(split) + "_data.csv"));
    csv << ",path,speakerId,transcription,action,object,location\n";
    for (std::size_t i = 0; i < intents.size(); ++i) {
      const std::string rel = "wavs/speakers/s1/" + std::string(split) + std::to_string(i) + ".wav";
      write_tone(root / rel, static_cast<int>(i), seed++);
      csv << i << "," << rel << ",s1,\"do " << intents[i][0] << ", please\"," << intents[i][0] << "," << intents[i][1]
          << "," << intents[i][2] << "\n";
    }
  }
  const fs::path out = dir->path() / "fsc_prepared";
  ASSERT_EQ(run("prepare --kind fsc --no-features --dataset-dir " + q(root) + " --out " + q(out), log("fsc")), 0)
      << testing::read_file(log("fsc"));
  const IntentVocab vocab = IntentVocab::load(out / "vocab.txt");
  EXPECT_EQ(vocab.size(), 31u);
  EXPECT_TRUE(vocab.contains("change language_obj0_none"));
  EXPECT_EQ(load_manifest(out / "train.jsonl").records.size(), 31u);
  EXPECT_EQ(load_manifest(out / "test.jsonl").records[0].transcript, "do activate, please");
}

TEST_F(CliRun, SnipsPreparationIsSeeded) {
  const fs::path root = dir->path() / "snips";
  nlohmann::json meta = nlohmann::json::object();
  for (int i = 0; i < 40; ++i) {
    const std::string id = "utt" + std::to_string(100 + i);
    write_tone(root / "audio" / (id + ".wav"), i, 500 + static_cast<std::uint64_t>(i));
    meta[id] = {{"filename", id + ".wav"},
                {"text", i % 2 ? "turn the lights off" : "turn the lights on"},
                {"intent", i % 2 ? "SwitchLightOff" : "SwitchLightOn"}};
  }
  testing::write_file(root / "metadata.json", meta.dump(2));
  const fs::path a = dir->path() / "snips_a", b = dir->path() / "snips_b", c = dir->path() / "snips_c";
  ASSERT_EQ(run("prepare --kind snips --no-features --seed 4 --dataset-dir " + q(root) + " --out " + q(a), log("sa")), 0)
      << testing::read_file(log("sa"));
  ASSERT_EQ(run("prepare --kind snips --no-features --seed 4 --dataset-dir " + q(root) + " --out " + q(b), log("sb")), 0);
  ASSERT_EQ(run("prepare --kind snips --no-features --seed 5 --dataset-dir " + q(root) + " --out " + q(c), log("sc")), 0);
  EXPECT_EQ(testing::read_file(a / "train.jsonl"), testing::read_file(b / "train.jsonl"));
  EXPECT_EQ(testing::read_file(a / "test.jsonl"), testing::read_file(b / "test.jsonl"));
  EXPECT_NE(testing::read_file(a / "train.jsonl"), testing::read_file(c / "train.jsonl"));
  EXPECT_EQ(load_manifest(a / "train.jsonl").records.size(), 32u);
  EXPECT_EQ(IntentVocab::load(a / "vocab.txt").size(), 2u);
}

TEST_F(CliRun, MissingDatasetLayoutIsReported) {
  const fs::path empty = dir->path() / "nothing";
  fs::create_directories(empty);
  EXPECT_EQ(run("prepare --kind snips --no-features --dataset-dir " + q(empty) + " --out " + q(dir->path() / "x"),
                log("nolayout")),
            2);
  EXPECT_NE(testing::read_file(log("nolayout")).find("metadata.json"), std::string::npos);
}

}  // namespace
}  // namespace cmls
