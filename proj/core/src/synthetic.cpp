#include "cmls/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <spdlog/spdlog.h>

#include "cmls/errors.hpp"

namespace cmls {
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kNamed = {"increase_brightness", "decrease_brightness", "switch_light_on",
                                         "switch_light_off",    "set_warm_light",      "set_cold_light"};

const std::vector<std::vector<std::string>> kTemplates = {
    {"increase the brightness", "turn the brightness up", "make the lights brighter"},
    {"decrease the brightness", "turn the brightness down", "make the lights dimmer"},
    {"switch the lights on", "turn on the light", "lights on please"},
    {"switch the lights off", "turn off the light", "lights off please"},
    {"make the light warmer", "set a warm light", "warm white light please"},
    {"make the light colder", "set a cold light", "cold white light please"},
};

const std::vector<std::string> kWords = {"alpha", "bravo",  "charlie", "delta",  "echo",    "foxtrot", "golf",
                                         "hotel", "india",  "juliett", "kilo",   "lima",    "mike",    "november",
                                         "oscar", "papa",   "quebec",  "romeo",  "sierra",  "tango",   "uniform",
                                         "victor", "whiskey", "xray",  "yankee", "zulu"};

}  // namespace

void SyntheticSpec::validate() const {
  if (num_intents < 2) throw ValidationError("synthetic: num_intents must be >= 2");
  if (per_intent < 1) throw ValidationError("synthetic: per_intent must be >= 1");
  if (sample_rate_hz < 8000) throw ValidationError("synthetic: sample rate must be >= 8000 Hz");
  if (!(min_seconds > 0.05) || !(max_seconds >= min_seconds)) throw ValidationError("synthetic: bad duration range");
  if (!(noise >= 0.0)) throw ValidationError("synthetic: noise must be >= 0");
}

std::vector<std::string> synthetic_intent_names(int n) {
  std::vector<std::string> out;
  for (int k = 0; k < n; ++k)
    out.push_back(k < static_cast<int>(kNamed.size()) ? kNamed[static_cast<std::size_t>(k)]
                                                       : "command_" + std::to_string(k));
  return out;
}

std::vector<std::string> synthetic_transcripts(int intent) {
  if (intent < 0) throw ValidationError("synthetic: negative intent");
  if (intent < static_cast<int>(kTemplates.size())) return kTemplates[static_cast<std::size_t>(intent)];
  const std::size_t k = static_cast<std::size_t>(intent);
  const std::string word = kWords[k % kWords.size()] + (k >= kWords.size() ? " " + kWords[k / kWords.size()] : "");
  return {"run command " + word, "please do " + word, word + " now"};
}

Audio synthesize_utterance(int intent, const SyntheticSpec& spec, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int pair = intent / 2;
  const bool odd = intent % 2 == 1;
  const double seconds = spec.min_seconds + (spec.max_seconds - spec.min_seconds) * u01(rng);
  const double f0 = (200.0 + 150.0 * pair) * (1.0 + 0.06 * (u01(rng) - 0.5));
  const double overtone = (odd ? 3.0 : 2.0) * f0;
  const double am_rate = 3.0 + 3.0 * u01(rng);
  const double gain = 0.3 + 0.4 * u01(rng);
  const double phase0 = 2.0 * std::numbers::pi * u01(rng);
  const double phase1 = 2.0 * std::numbers::pi * u01(rng);
  const double sr = spec.sample_rate_hz;

  Audio a;
  a.sample_rate = spec.sample_rate_hz;
  const auto n = static_cast<std::size_t>(seconds * sr);
  a.samples.resize(n);
  const double ramp = 0.02 * sr;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double env = std::min({1.0, static_cast<double>(i) / ramp, static_cast<double>(n - 1 - i) / ramp});
    const double am = 0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * am_rate * t);
    const double tone = std::sin(2.0 * std::numbers::pi * f0 * t + phase0) +
                        0.6 * std::sin(2.0 * std::numbers::pi * overtone * t + phase1);
    a.samples[i] = gain * env * am * tone / 1.6 + spec.noise * gauss(rng);
  }
  return a;
}

SyntheticDataset make_synthetic_dataset(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  const fs::path audio_dir = out_dir / "audio";
  fs::create_directories(audio_dir);
  const auto names = synthetic_intent_names(spec.num_intents);
  Rng rng(derive_seed(spec.seed, 0x5717));
  std::vector<UtteranceRecord> records;
  for (int k = 0; k < spec.num_intents; ++k) {
    const auto texts = synthetic_transcripts(k);
    for (int j = 0; j < spec.per_intent; ++j) {
      char id[64];
      std::snprintf(id, sizeof(id), "syn-%02d-%04d", k, j);
      UtteranceRecord r;
      r.id = id;
      r.intent = names[static_cast<std::size_t>(k)];
      r.transcript = texts[static_cast<std::size_t>(j) % texts.size()];
      r.audio_path = audio_dir / (r.id + ".wav");
      write_wav_pcm16(r.audio_path, synthesize_utterance(k, spec, rng));
      records.push_back(std::move(r));
    }
  }
  DatasetSplit split = make_split(records, spec.split, spec.seed);
  SyntheticDataset ds;
  ds.dir = out_dir;
  ds.all_manifest = out_dir / "all.jsonl";
  ds.train_manifest = out_dir / "train.jsonl";
  ds.valid_manifest = out_dir / "valid.jsonl";
  ds.test_manifest = out_dir / "test.jsonl";
  ds.vocab_file = out_dir / "vocab.txt";
  ds.vocab = IntentVocab(names);
  write_manifest(ds.all_manifest, records);
  write_manifest(ds.train_manifest, split.train);
  write_manifest(ds.valid_manifest, split.valid);
  write_manifest(ds.test_manifest, split.test);
  ds.vocab.save(ds.vocab_file);
  ds.num_train = split.train.size();
  ds.num_valid = split.valid.size();
  ds.num_test = split.test.size();
  spdlog::info("synthetic dataset: {} intents, {} train / {} valid / {} test", spec.num_intents, ds.num_train,
               ds.num_valid, ds.num_test);
  return ds;
}

}  // namespace cmls
