#include "cmls/datasets.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "cmls/errors.hpp"

namespace cmls {
namespace fs = std::filesystem;

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

namespace {

std::vector<UtteranceRecord> read_fsc_csv(const fs::path& csv, const fs::path& root) {
  std::ifstream in(csv);
  if (!in) throw ResolutionError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(csv.string() + ": empty file");
  const auto header = split_csv_row(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(csv.string() + ": missing column '" + name + "'", 1);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_path = col("path"), c_text = col("transcription"), c_action = col("action"),
                    c_object = col("object"), c_location = col("location");
  const std::size_t needed = std::max({c_path, c_text, c_action, c_object, c_location});
  std::vector<UtteranceRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_row(line);
    if (cells.size() <= needed) throw ParseError(csv.string() + ": too few columns", lineno);
    UtteranceRecord r;
    r.audio_path = root / cells[c_path];
    r.id = fs::path(cells[c_path]).stem().string();
    r.transcript = cells[c_text];
    r.intent = cells[c_action] + "_" + cells[c_object] + "_" + cells[c_location];
    out.push_back(std::move(r));
  }
  return out;
}

std::string normalize_text(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::map<std::string, std::string> snips_nlu_labels(const fs::path& dataset_json) {
  std::map<std::string, std::string> out;
  std::ifstream in(dataset_json);
  if (!in) return out;
  const nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("intents")) throw ParseError(dataset_json.string() + ": not a Snips NLU dataset");
  for (const auto& [intent, body] : j["intents"].items()) {
    for (const auto& utt : body.value("utterances", nlohmann::json::array())) {
      std::string text;
      for (const auto& chunk : utt.value("data", nlohmann::json::array())) text += chunk.value("text", "");
      out[normalize_text(text)] = intent;
    }
  }
  return out;
}

}  // namespace

PreparedDataset prepare_fsc(const fs::path& dir) {
  const fs::path data = dir / "data";
  const std::vector<std::string> files = {"train_data.csv", "valid_data.csv", "test_data.csv"};
  for (const auto& f : files)
    if (!fs::is_regular_file(data / f))
      throw ResolutionError("unrecognized FSC layout under " + dir.string() +
                            ": expected data/train_data.csv, data/valid_data.csv, data/test_data.csv and the wavs/ tree");
  PreparedDataset ds;
  ds.split.train = read_fsc_csv(data / files[0], dir);
  ds.split.valid = read_fsc_csv(data / files[1], dir);
  ds.split.test = read_fsc_csv(data / files[2], dir);
  std::vector<UtteranceRecord> all = ds.split.train;
  all.insert(all.end(), ds.split.valid.begin(), ds.split.valid.end());
  all.insert(all.end(), ds.split.test.begin(), ds.split.test.end());
  ds.vocab = IntentVocab::infer(all);
  if (ds.vocab.size() != 31) {
    const std::string w = "FSC vocabulary has " + std::to_string(ds.vocab.size()) + " intents, expected 31";
    spdlog::warn("{}", w);
    ds.split.warnings.push_back(w);
  }
  return ds;
}

PreparedDataset prepare_snips(const fs::path& dir, std::uint64_t seed) {
  fs::path meta_dir;
  for (const fs::path& cand : {dir, dir / "speech_corpus"})
    if (fs::is_regular_file(cand / "metadata.json")) {
      meta_dir = cand;
      break;
    }
  if (meta_dir.empty())
    throw ResolutionError("unrecognized Snips layout under " + dir.string() +
                          ": expected metadata.json (or speech_corpus/metadata.json) with filename/text/intent "
                          "entries, audio files beside it or under audio/, and optionally dataset.json");
  std::ifstream in(meta_dir / "metadata.json");
  const nlohmann::json meta = nlohmann::json::parse(in, nullptr, false);
  if (meta.is_discarded() || !(meta.is_object() || meta.is_array()))
    throw ParseError((meta_dir / "metadata.json").string() + ": malformed JSON");

  std::map<std::string, std::string> nlu;
  for (const fs::path& cand : {meta_dir / "dataset.json", dir / "dataset.json"})
    if (nlu.empty()) nlu = snips_nlu_labels(cand);

  std::vector<UtteranceRecord> records;
  auto add = [&](const std::string& key, const nlohmann::json& e) {
    if (!e.is_object() || !e.contains("filename") || !e.contains("text"))
      throw ParseError("metadata.json entry '" + key + "' lacks filename or text");
    UtteranceRecord r;
    const std::string file = e["filename"].get<std::string>();
    if (e.contains("id"))
      r.id = e["id"].is_string() ? e["id"].get<std::string>() : e["id"].dump();
    else
      r.id = key;
    r.transcript = e["text"].get<std::string>();
    r.audio_path = fs::is_regular_file(meta_dir / file) ? meta_dir / file : meta_dir / "audio" / file;
    if (e.contains("intent")) {
      r.intent = e["intent"].get<std::string>();
    } else if (auto it = nlu.find(normalize_text(r.transcript)); it != nlu.end()) {
      r.intent = it->second;
    } else {
      throw ValidationError("no intent for metadata.json entry '" + key + "' (\"" + r.transcript +
                            "\"): add an intent field or a dataset.json containing the transcript");
    }
    records.push_back(std::move(r));
  };
  if (meta.is_object()) {
    for (const auto& [key, e] : meta.items()) add(key, e);
  } else {
    for (std::size_t i = 0; i < meta.size(); ++i) add(std::to_string(i), meta[i]);
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  PreparedDataset ds;
  ds.vocab = IntentVocab::infer(records);
  ds.split = make_split(records, SplitFractions{}, seed);
  return ds;
}

void write_prepared(const PreparedDataset& ds, const fs::path& out) {
  fs::create_directories(out);
  write_manifest(out / "train.jsonl", ds.split.train);
  write_manifest(out / "valid.jsonl", ds.split.valid);
  write_manifest(out / "test.jsonl", ds.split.test);
  ds.vocab.save(out / "vocab.txt");
}

}  // namespace cmls
