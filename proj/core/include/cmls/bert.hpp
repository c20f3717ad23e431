#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmls/layers.hpp"
#include "cmls/text_encoder.hpp"
#include "cmls/wordpiece.hpp"

namespace cmls {

struct BertConfig {
  int vocab_size = 28996;
  int hidden_size = 768;
  int num_layers = 12;
  int num_heads = 12;
  int intermediate_size = 3072;
  int max_positions = 512;
  int type_vocab_size = 2;
  double layer_norm_eps = 1e-12;

  static BertConfig from_json_file(const std::filesystem::path& path);
  void validate() const;
};

/// BERT encoder stack (no pooler). Linear weights are held as (in x out).
class BertModel {
 public:
  BertModel(BertConfig cfg, const std::map<std::string, Matrix>& tensors);
  static BertModel from_directory(const std::filesystem::path& dir);

  const BertConfig& config() const { return cfg_; }
  /// Last-layer hidden states, one row per token.
  ag::Var hidden_states(ag::Tape& tape, const std::vector<int>& token_ids) const;
  /// Last-layer representation of the first ([CLS]) token, 1 x hidden.
  ag::Var cls(ag::Tape& tape, const std::vector<int>& token_ids) const;

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;

 private:
  struct Layer {
    Linear query, key, value, attn_out;
    Parameter ln1_gamma, ln1_beta;
    Linear ffn_in, ffn_out;
    Parameter ln2_gamma, ln2_beta;
  };
  BertConfig cfg_;
  Parameter word_emb_, pos_emb_, type_emb_, emb_ln_gamma_, emb_ln_beta_;
  std::vector<Layer> layers_;
};

class BertTextEncoder final : public TextEncoder {
 public:
  BertTextEncoder(std::string model_id, const std::filesystem::path& dir);

  const std::string& model_id() const override { return id_; }
  int dim() const override { return model_.config().hidden_size; }
  const WordPieceTokenizer& tokenizer() const { return tokenizer_; }

  ParameterRefs parameters() override { return model_.parameters(); }
  ConstParameterRefs parameters() const override { return model_.parameters(); }

 protected:
  Vector encode_one(const std::string& text) const override;
  ag::Var forward_on_tape(ag::Tape& tape, const std::string& text) const override;

 private:
  std::string id_;
  BertModel model_;
  WordPieceTokenizer tokenizer_;
};

}  // namespace cmls
