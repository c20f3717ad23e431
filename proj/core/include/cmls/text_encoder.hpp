#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cmls/autograd.hpp"

namespace cmls {

/// Process-wide counters over all text encoders.
struct TextEncoderStats {
  std::atomic<long> constructed{0};
  std::atomic<long> forward_calls{0};  // one per transcript encoded
  void reset() {
    constructed = 0;
    forward_calls = 0;
  }
};
TextEncoderStats& text_encoder_stats();

/// Maps transcripts to fixed-dimension text embeddings.
class TextEncoder {
 public:
  TextEncoder();
  virtual ~TextEncoder() = default;
  TextEncoder(const TextEncoder&) = delete;
  TextEncoder& operator=(const TextEncoder&) = delete;

  virtual const std::string& model_id() const = 0;
  virtual int dim() const = 0;

  /// One row per transcript, evaluation mode. Throws on an empty transcript.
  Matrix encode(std::span<const std::string> texts) const;
  /// Differentiable embedding (1 x dim) for fine-tuning; encoders without
  /// parameters return a constant.
  ag::Var encode_on_tape(ag::Tape& tape, const std::string& text) const;

  virtual ParameterRefs parameters() { return {}; }
  virtual ConstParameterRefs parameters() const { return {}; }

 protected:
  virtual Vector encode_one(const std::string& text) const = 0;
  virtual ag::Var forward_on_tape(ag::Tape& tape, const std::string& text) const;
};

/// Deterministic hashed bag-of-words encoder needing no downloads: each word
/// and word bigram maps to a seeded Gaussian direction; the weighted sum is
/// L2-normalized. A handful of function words get a reduced weight.
class LexicalTextEncoder final : public TextEncoder {
 public:
  static constexpr const char* kModelId = "builtin:lexical";
  explicit LexicalTextEncoder(int dim = kEmbeddingDim);

  const std::string& model_id() const override { return id_; }
  int dim() const override { return dim_; }

  static std::vector<std::string> words(const std::string& text);

 protected:
  Vector encode_one(const std::string& text) const override;

 private:
  Vector direction(const std::string& key) const;
  std::string id_ = kModelId;
  int dim_;
};

/// Resolves a model id to an encoder:
///   "builtin:lexical"          built-in lexical encoder
///   an existing directory      HuggingFace BERT layout (config.json, vocab.txt, model.safetensors)
///   a hub id such as "bert-base-cased"  looked up under $CMLS_MODEL_DIR/<id>, then the
///                              HuggingFace cache ($HF_HOME or ~/.cache/huggingface)
/// Throws ResolutionError with download instructions when nothing matches.
std::unique_ptr<TextEncoder> resolve_text_encoder(const std::string& model_id);
std::filesystem::path locate_model_dir(const std::string& model_id);

}  // namespace cmls
