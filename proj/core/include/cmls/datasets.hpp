#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmls/manifest.hpp"

namespace cmls {

struct PreparedDataset {
  DatasetSplit split;
  IntentVocab vocab;
};

/// Fluent Speech Commands: data/{train,valid,test}_data.csv with columns
/// path, transcription, action, object, location; audio paths relative to the
/// dataset root. The intent is "action_object_location". Published splits are kept.
PreparedDataset prepare_fsc(const std::filesystem::path& dataset_dir);

/// Snips SmartLights: metadata.json (at the root or under speech_corpus/)
/// mapping ids to entries with "filename", "text" and "intent"; audio is looked
/// up next to metadata.json, then under audio/. Entries without an intent are
/// labeled through dataset.json (Snips NLU format) by exact transcript match.
/// Split 80/10/10, stratified and seeded.
PreparedDataset prepare_snips(const std::filesystem::path& dataset_dir, std::uint64_t seed);

/// Minimal RFC 4180 row splitter (quoted fields, doubled quotes).
std::vector<std::string> split_csv_row(const std::string& line);

/// Writes train/valid/test .jsonl and vocab.txt into out_dir.
void write_prepared(const PreparedDataset& ds, const std::filesystem::path& out_dir);

}  // namespace cmls
