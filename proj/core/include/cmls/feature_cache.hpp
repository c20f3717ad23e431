#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "cmls/manifest.hpp"
#include "cmls/mfcc.hpp"

namespace cmls {

/// On-disk memo of FeatureSequences keyed by (utterance id, FeatureConfig hash).
///
/// Record layout (little-endian): magic "CMLSFEAT", u32 version, u64 config
/// hash, u32 id length, id bytes, u32 rows, u32 cols, rows*cols f64 values in
/// column-major order. Writes go to a temporary file that is renamed into place.
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path dir);

  std::filesystem::path path_for(const std::string& utterance_id, std::uint64_t config_hash) const;
  std::optional<FeatureSequence> load(const std::string& utterance_id, std::uint64_t config_hash) const;
  void store(const FeatureSequence& seq, std::uint64_t config_hash) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

void write_feature_record(const std::filesystem::path& path, const FeatureSequence& seq, std::uint64_t config_hash);
/// Returns nullopt when the file is absent or belongs to another (id, hash).
std::optional<FeatureSequence> read_feature_record(const std::filesystem::path& path, const std::string& expected_id,
                                                   std::uint64_t expected_hash);

/// Extracts (or loads from cache) features for every record, in record order.
/// num_workers > 1 spreads utterances over threads.
std::vector<FeatureSequence> extract_features(const std::vector<UtteranceRecord>& records, const FeatureConfig& cfg,
                                              const FeatureCache* cache = nullptr, int num_workers = 1);

}  // namespace cmls
