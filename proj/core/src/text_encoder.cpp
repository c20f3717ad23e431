#include "cmls/text_encoder.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <unordered_set>

#include "cmls/bert.hpp"
#include "cmls/errors.hpp"

namespace cmls {

namespace fs = std::filesystem;

TextEncoderStats& text_encoder_stats() {
  static TextEncoderStats stats;
  return stats;
}

TextEncoder::TextEncoder() { ++text_encoder_stats().constructed; }

Matrix TextEncoder::encode(std::span<const std::string> texts) const {
  Matrix out(static_cast<Eigen::Index>(texts.size()), dim());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw ValidationError("text encoder: empty transcript");
    ++text_encoder_stats().forward_calls;
    out.row(static_cast<Eigen::Index>(i)) = encode_one(texts[i]).transpose();
  }
  return out;
}

ag::Var TextEncoder::encode_on_tape(ag::Tape& tape, const std::string& text) const {
  if (text.empty()) throw ValidationError("text encoder: empty transcript");
  ++text_encoder_stats().forward_calls;
  return forward_on_tape(tape, text);
}

ag::Var TextEncoder::forward_on_tape(ag::Tape& tape, const std::string& text) const {
  return tape.constant(encode_one(text).transpose());
}

LexicalTextEncoder::LexicalTextEncoder(int dim) : dim_(dim) {
  if (dim < 1) throw ValidationError("lexical encoder: dimension must be positive");
}

std::vector<std::string> LexicalTextEncoder::words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (c != '\'') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vector LexicalTextEncoder::direction(const std::string& key) const {
  Rng rng(fnv1a(key));
  std::normal_distribution<Real> g(0.0, 1.0);
  Vector v(dim_);
  for (int i = 0; i < dim_; ++i) v(i) = g(rng);
  return v / std::sqrt(static_cast<Real>(dim_));
}

Vector LexicalTextEncoder::encode_one(const std::string& text) const {
  static const std::unordered_set<std::string> kFunctionWords = {
      "a", "an", "the", "to", "in", "on", "of", "for", "please", "could", "can", "you", "would", "me", "my", "it", "is", "and", "i"};
  const auto ws = words(text);
  Vector v = Vector::Zero(dim_);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const Real w = kFunctionWords.contains(ws[i]) ? 0.25 : 1.0;
    v += w * direction("w:" + ws[i]);
    if (i + 1 < ws.size()) v += 0.5 * direction("b:" + ws[i] + " " + ws[i + 1]);
  }
  const Real n = v.norm();
  if (n == 0.0) return direction("empty");
  return v / n;
}

fs::path locate_model_dir(const std::string& model_id) {
  auto is_model_dir = [](const fs::path& p) {
    return fs::is_directory(p) && fs::exists(p / "config.json") && fs::exists(p / "vocab.txt") &&
           fs::exists(p / "model.safetensors");
  };
  if (is_model_dir(model_id)) return model_id;
  if (const char* root = std::getenv("CMLS_MODEL_DIR")) {
    if (is_model_dir(fs::path(root) / model_id)) return fs::path(root) / model_id;
  }
  std::vector<fs::path> hubs;
  if (const char* hf = std::getenv("HF_HOME")) hubs.push_back(fs::path(hf) / "hub");
  if (const char* home = std::getenv("HOME")) hubs.push_back(fs::path(home) / ".cache" / "huggingface" / "hub");
  for (const auto& hub : hubs) {
    std::string name = "models--";
    for (char c : model_id) name += (c == '/') ? std::string("--") : std::string(1, c);
    const fs::path snaps = hub / name / "snapshots";
    std::error_code ec;
    if (!fs::is_directory(snaps, ec)) continue;
    for (const auto& entry : fs::directory_iterator(snaps, ec))
      if (is_model_dir(entry.path())) return entry.path();
  }
  throw ResolutionError(
      "text encoder '" + model_id + "' not found. Expected a directory with config.json, vocab.txt and "
      "model.safetensors. Fetch it with `huggingface-cli download " + model_id +
      " config.json vocab.txt model.safetensors --local-dir $CMLS_MODEL_DIR/" + model_id +
      "` and set CMLS_MODEL_DIR, pass the directory path as the model id, or use '" +
      LexicalTextEncoder::kModelId + "' for offline runs");
}

std::unique_ptr<TextEncoder> resolve_text_encoder(const std::string& model_id) {
  if (model_id == LexicalTextEncoder::kModelId) return std::make_unique<LexicalTextEncoder>();
  if (model_id.starts_with("builtin:")) throw ResolutionError("unknown built-in text encoder '" + model_id + "'");
  return std::make_unique<BertTextEncoder>(model_id, locate_model_dir(model_id));
}

}  // namespace cmls
