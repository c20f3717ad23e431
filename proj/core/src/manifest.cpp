#include "cmls/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cmls/errors.hpp"
#include "cmls/tensor.hpp"

namespace cmls {

namespace fs = std::filesystem;
using nlohmann::json;

IntentVocab::IntentVocab(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], static_cast<int>(i)).second)
      throw ValidationError("duplicate intent label '" + labels_[i] + "'");
  }
}

IntentVocab IntentVocab::infer(const std::vector<UtteranceRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records) seen.insert(r.intent);
  return IntentVocab(std::vector<std::string>(seen.begin(), seen.end()));
}

IntentVocab IntentVocab::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ResolutionError("cannot open vocabulary file " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) labels.push_back(line);
  }
  return IntentVocab(std::move(labels));
}

void IntentVocab::save(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary file " + path.string());
  for (const auto& l : labels_) out << l << '\n';
}

int IntentVocab::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw ValidationError("intent '" + label + "' is not in the vocabulary");
  return it->second;
}

Manifest load_manifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ResolutionError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": invalid JSON: " + e.what(), lineno);
    }
    if (!row.is_object()) throw ParseError(path.string() + ": expected a JSON object", lineno);
    UtteranceRecord rec;
    for (const char* field : {"id", "audio", "text", "intent"}) {
      if (!row.contains(field) || !row[field].is_string())
        throw ParseError(path.string() + ": missing or non-string field \"" + field + "\"", lineno);
    }
    rec.id = row["id"].get<std::string>();
    rec.transcript = row["text"].get<std::string>();
    rec.intent = row["intent"].get<std::string>();
    fs::path audio = row["audio"].get<std::string>();
    rec.audio_path = audio.is_absolute() ? audio : base / audio;

    if (rec.transcript.empty()) throw ValidationError(path.string() + ": empty transcript (line " + std::to_string(lineno) + ")");
    if (options.vocab && !options.vocab->contains(rec.intent))
      throw ValidationError(path.string() + ": unknown intent '" + rec.intent + "' (line " + std::to_string(lineno) + ")");
    if (options.check_audio) {
      std::ifstream probe(rec.audio_path, std::ios::binary);
      if (!probe) throw ValidationError(path.string() + ": unreadable audio " + rec.audio_path.string() + " (line " + std::to_string(lineno) + ")");
    }
    m.records.push_back(std::move(rec));
  }
  m.vocab = options.vocab ? *options.vocab : IntentVocab::infer(m.records);
  return m;
}

void write_manifest(const fs::path& path, const std::vector<UtteranceRecord>& records) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest " + path.string());
  for (const auto& r : records) {
    std::error_code ec;
    fs::path rel = fs::relative(fs::absolute(r.audio_path), base, ec);
    std::string audio = (ec || rel.empty()) ? r.audio_path.string() : rel.generic_string();
    json row = {{"id", r.id}, {"audio", audio}, {"text", r.transcript}, {"intent", r.intent}};
    out << row.dump() << '\n';
  }
}

DatasetSplit make_split(const std::vector<UtteranceRecord>& records, SplitFractions f, std::uint64_t seed) {
  if (records.empty()) throw ValidationError("make_split: no records");
  if (f.train < 0 || f.valid < 0 || f.test < 0 || std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
    throw ValidationError("make_split: fractions must be non-negative and sum to 1");
  const int num_splits = (f.train > 0) + (f.valid > 0) + (f.test > 0);

  std::map<std::string, std::vector<std::size_t>> by_intent;
  for (std::size_t i = 0; i < records.size(); ++i) by_intent[records[i].intent].push_back(i);

  DatasetSplit out;
  std::vector<int> assignment(records.size(), 0);
  Rng rng(seed);
  for (auto& [intent, idx] : by_intent) {
    const auto n = static_cast<long>(idx.size());
    if (n < num_splits) {
      std::string msg = "intent '" + intent + "' has " + std::to_string(n) + " record(s), fewer than " +
                        std::to_string(num_splits) + " splits; assigning all to train";
      spdlog::warn("{}", msg);
      out.warnings.push_back(std::move(msg));
      continue;
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    long n_valid = f.valid > 0 ? std::max(1L, std::lround(static_cast<double>(n) * f.valid)) : 0;
    long n_test = f.test > 0 ? std::max(1L, std::lround(static_cast<double>(n) * f.test)) : 0;
    while (n - n_valid - n_test < 1 && (n_valid > 1 || n_test > 1)) {
      if (n_valid >= n_test) --n_valid; else --n_test;
    }
    for (long k = 0; k < n; ++k) {
      assignment[idx[static_cast<std::size_t>(k)]] = k < n_valid ? 1 : (k < n_valid + n_test ? 2 : 0);
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    switch (assignment[i]) {
      case 1: out.valid.push_back(records[i]); break;
      case 2: out.test.push_back(records[i]); break;
      default: out.train.push_back(records[i]); break;
    }
  }
  return out;
}

}  // namespace cmls
