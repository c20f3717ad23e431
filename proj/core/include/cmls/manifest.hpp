#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cmls {

/// One manifest row.
struct UtteranceRecord {
  std::string id;
  std::filesystem::path audio_path;  // absolute, or relative to the process cwd
  std::string transcript;
  std::string intent;
};

/// Ordered set of intent labels; the position of a label is its class index.
class IntentVocab {
 public:
  IntentVocab() = default;
  explicit IntentVocab(std::vector<std::string> labels);

  /// Sorted, de-duplicated vocabulary of the given records.
  static IntentVocab infer(const std::vector<UtteranceRecord>& records);
  static IntentVocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  bool contains(const std::string& label) const { return index_.contains(label); }
  /// Throws ValidationError for labels outside the vocabulary.
  int index_of(const std::string& label) const;
  const std::string& label(int index) const { return labels_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const IntentVocab& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct Manifest {
  std::vector<UtteranceRecord> records;
  IntentVocab vocab;
};

struct ManifestOptions {
  /// When set, every intent must belong to it; otherwise the vocabulary is inferred.
  std::optional<IntentVocab> vocab;
  /// Require every audio path to name a readable file.
  bool check_audio = true;
};

/// Reads a JSONL manifest with fields id, audio, text, intent. Audio paths are
/// resolved against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});

/// Writes records as JSONL; audio paths are written relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> valid;
  std::vector<UtteranceRecord> test;
  std::vector<std::string> warnings;
};

/// Seeded split, stratified by intent. Intents with fewer records than there
/// are non-empty splits go entirely to train, with a warning.
DatasetSplit make_split(const std::vector<UtteranceRecord>& records, SplitFractions fractions, std::uint64_t seed);

}  // namespace cmls
