#include "cmls/bert.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cmls/errors.hpp"
#include "cmls/safetensors.hpp"

namespace cmls {

namespace fs = std::filesystem;

BertConfig BertConfig::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ResolutionError("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + ": invalid JSON");
  BertConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.num_layers = j.value("num_hidden_layers", c.num_layers);
  c.num_heads = j.value("num_attention_heads", c.num_heads);
  c.intermediate_size = j.value("intermediate_size", c.intermediate_size);
  c.max_positions = j.value("max_position_embeddings", c.max_positions);
  c.type_vocab_size = j.value("type_vocab_size", c.type_vocab_size);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  const std::string act = j.value("hidden_act", std::string("gelu"));
  if (act != "gelu") throw ValidationError(path.string() + ": unsupported hidden_act '" + act + "'");
  c.validate();
  return c;
}

void BertConfig::validate() const {
  if (hidden_size < 1 || num_layers < 1 || num_heads < 1 || hidden_size % num_heads != 0)
    throw ValidationError("bert config: hidden_size must be a positive multiple of num_attention_heads");
  if (vocab_size < 1 || max_positions < 1 || type_vocab_size < 1 || intermediate_size < 1)
    throw ValidationError("bert config: sizes must be positive");
}

namespace {

const Matrix& take(const std::map<std::string, Matrix>& t, const std::string& name, long rows, long cols) {
  auto it = t.find(name);
  if (it == t.end()) throw ValidationError("bert weights: missing tensor " + name);
  if (it->second.rows() != rows || it->second.cols() != cols)
    throw ValidationError("bert weights: tensor " + name + " has shape " + std::to_string(it->second.rows()) + "x" +
                          std::to_string(it->second.cols()) + ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  return it->second;
}

Parameter frozen(std::string name, Matrix value) {
  Parameter p(std::move(name), std::move(value));
  p.trainable = false;
  return p;
}

// HF stores nn.Linear weights as (out x in); we keep (in x out).
Linear linear(const std::map<std::string, Matrix>& t, const std::string& name, int in, int out) {
  Linear l;
  l.weight = frozen(name + ".weight", take(t, name + ".weight", out, in).transpose());
  l.bias = frozen(name + ".bias", take(t, name + ".bias", 1, out));
  return l;
}

// Older checkpoints name LayerNorm parameters gamma/beta.
Parameter layer_norm_param(const std::map<std::string, Matrix>& t, const std::string& prefix, bool weight, int dim) {
  const std::string modern = prefix + (weight ? ".weight" : ".bias");
  const std::string legacy = prefix + (weight ? ".gamma" : ".beta");
  return frozen(modern, take(t, t.contains(modern) ? modern : legacy, 1, dim));
}

}  // namespace

BertModel::BertModel(BertConfig cfg, const std::map<std::string, Matrix>& t) : cfg_(cfg) {
  cfg_.validate();
  const int H = cfg_.hidden_size, I = cfg_.intermediate_size;
  word_emb_ = frozen("embeddings.word_embeddings.weight", take(t, "embeddings.word_embeddings.weight", cfg_.vocab_size, H));
  pos_emb_ = frozen("embeddings.position_embeddings.weight",
                    take(t, "embeddings.position_embeddings.weight", cfg_.max_positions, H));
  type_emb_ = frozen("embeddings.token_type_embeddings.weight",
                     take(t, "embeddings.token_type_embeddings.weight", cfg_.type_vocab_size, H));
  emb_ln_gamma_ = layer_norm_param(t, "embeddings.LayerNorm", true, H);
  emb_ln_beta_ = layer_norm_param(t, "embeddings.LayerNorm", false, H);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string p = "encoder.layer." + std::to_string(l);
    Layer layer;
    layer.query = linear(t, p + ".attention.self.query", H, H);
    layer.key = linear(t, p + ".attention.self.key", H, H);
    layer.value = linear(t, p + ".attention.self.value", H, H);
    layer.attn_out = linear(t, p + ".attention.output.dense", H, H);
    layer.ln1_gamma = layer_norm_param(t, p + ".attention.output.LayerNorm", true, H);
    layer.ln1_beta = layer_norm_param(t, p + ".attention.output.LayerNorm", false, H);
    layer.ffn_in = linear(t, p + ".intermediate.dense", H, I);
    layer.ffn_out = linear(t, p + ".output.dense", I, H);
    layer.ln2_gamma = layer_norm_param(t, p + ".output.LayerNorm", true, H);
    layer.ln2_beta = layer_norm_param(t, p + ".output.LayerNorm", false, H);
    layers_.push_back(std::move(layer));
  }
}

BertModel BertModel::from_directory(const fs::path& dir) {
  BertConfig cfg = BertConfig::from_json_file(dir / "config.json");
  auto raw = read_safetensors(dir / "model.safetensors");
  std::map<std::string, Matrix> tensors;
  for (auto& [name, tensor] : raw) {
    std::string key = name;
    if (key.starts_with("bert.")) key = key.substr(5);
    tensors.emplace(std::move(key), std::move(tensor.data));
  }
  return BertModel(cfg, tensors);
}

ag::Var BertModel::hidden_states(ag::Tape& tape, const std::vector<int>& ids) const {
  if (ids.empty()) throw ValidationError("bert: empty token sequence");
  if (static_cast<int>(ids.size()) > cfg_.max_positions) throw ValidationError("bert: sequence longer than max positions");
  for (int id : ids)
    if (id < 0 || id >= cfg_.vocab_size) throw ValidationError("bert: token id out of range");
  const int n = static_cast<int>(ids.size());
  const int H = cfg_.hidden_size, heads = cfg_.num_heads, d = H / heads;
  std::vector<int> positions(static_cast<std::size_t>(n));
  std::iota(positions.begin(), positions.end(), 0);
  const std::vector<int> types(static_cast<std::size_t>(n), 0);

  ag::Var x = ag::add(ag::add(ag::gather_rows(tape.param(word_emb_), ids), ag::gather_rows(tape.param(pos_emb_), positions)),
                      ag::gather_rows(tape.param(type_emb_), types));
  x = ag::layer_norm_rows(x, tape.param(emb_ln_gamma_), tape.param(emb_ln_beta_), cfg_.layer_norm_eps);

  const Real inv_sqrt_d = 1.0 / std::sqrt(static_cast<Real>(d));
  for (const Layer& L : layers_) {
    ag::Var q = L.query.forward(tape, x);
    ag::Var k = L.key.forward(tape, x);
    ag::Var v = L.value.forward(tape, x);
    std::vector<ag::Var> ctx;
    for (int h = 0; h < heads; ++h) {
      ag::Var qh = ag::col_slice(q, h * d, d), kh = ag::col_slice(k, h * d, d), vh = ag::col_slice(v, h * d, d);
      ag::Var probs = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), inv_sqrt_d));
      ctx.push_back(ag::matmul(probs, vh));
    }
    ag::Var attn = L.attn_out.forward(tape, heads == 1 ? ctx[0] : ag::hconcat(ctx));
    x = ag::layer_norm_rows(ag::add(x, attn), tape.param(L.ln1_gamma), tape.param(L.ln1_beta), cfg_.layer_norm_eps);
    ag::Var ffn = L.ffn_out.forward(tape, ag::gelu(L.ffn_in.forward(tape, x)));
    x = ag::layer_norm_rows(ag::add(x, ffn), tape.param(L.ln2_gamma), tape.param(L.ln2_beta), cfg_.layer_norm_eps);
  }
  return x;
}

ag::Var BertModel::cls(ag::Tape& tape, const std::vector<int>& ids) const {
  return ag::row_slice(hidden_states(tape, ids), 0, 1);
}

ParameterRefs BertModel::parameters() {
  ParameterRefs out{&word_emb_, &pos_emb_, &type_emb_, &emb_ln_gamma_, &emb_ln_beta_};
  for (Layer& L : layers_) {
    for (Linear* lin : {&L.query, &L.key, &L.value, &L.attn_out}) lin->collect(out);
    out.insert(out.end(), {&L.ln1_gamma, &L.ln1_beta});
    L.ffn_in.collect(out);
    L.ffn_out.collect(out);
    out.insert(out.end(), {&L.ln2_gamma, &L.ln2_beta});
  }
  return out;
}

ConstParameterRefs BertModel::parameters() const {
  auto refs = const_cast<BertModel*>(this)->parameters();
  return {refs.begin(), refs.end()};
}

namespace {

bool read_lower_case(const fs::path& dir) {
  std::ifstream in(dir / "tokenizer_config.json");
  if (!in) return false;
  const auto j = nlohmann::json::parse(in, nullptr, false);
  return !j.is_discarded() && j.value("do_lower_case", false);
}

}  // namespace

BertTextEncoder::BertTextEncoder(std::string model_id, const fs::path& dir)
    : id_(std::move(model_id)),
      model_(BertModel::from_directory(dir)),
      tokenizer_(WordPieceTokenizer::from_file(dir / "vocab.txt", read_lower_case(dir))) {
  if (tokenizer_.vocab_size() > static_cast<std::size_t>(model_.config().vocab_size))
    throw ValidationError("bert: vocab.txt is larger than the embedding table");
}

Vector BertTextEncoder::encode_one(const std::string& text) const {
  ag::Tape tape(false);
  return model_.cls(tape, tokenizer_.encode(text, static_cast<std::size_t>(model_.config().max_positions)))
      .value()
      .row(0)
      .transpose();
}

ag::Var BertTextEncoder::forward_on_tape(ag::Tape& tape, const std::string& text) const {
  return model_.cls(tape, tokenizer_.encode(text, static_cast<std::size_t>(model_.config().max_positions)));
}

}  // namespace cmls
