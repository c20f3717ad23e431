#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmls/audio.hpp"
#include "cmls/manifest.hpp"

namespace cmls {

/// Desk-scale stand-in for a spoken-command corpus. Intents come in pairs
/// (2k, 2k+1) that share a fundamental and differ only in which overtone
/// accompanies it, while their transcripts have opposite meanings.
struct SyntheticSpec {
  int num_intents = 2;
  int per_intent = 50;
  std::uint64_t seed = 1;
  int sample_rate_hz = 16000;
  double min_seconds = 0.5;
  double max_seconds = 0.9;
  double noise = 0.05;
  SplitFractions split;

  void validate() const;
};

struct SyntheticDataset {
  std::filesystem::path dir;
  std::filesystem::path all_manifest, train_manifest, valid_manifest, test_manifest, vocab_file;
  std::size_t num_train = 0, num_valid = 0, num_test = 0;
  IntentVocab vocab;
};

std::vector<std::string> synthetic_intent_names(int num_intents);
/// Transcript templates for one intent.
std::vector<std::string> synthetic_transcripts(int intent);

Audio synthesize_utterance(int intent, const SyntheticSpec& spec, Rng& rng);

/// Writes audio/<id>.wav, all/train/valid/test .jsonl manifests and vocab.txt under out_dir.
SyntheticDataset make_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace cmls
