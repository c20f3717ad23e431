#include "cmls/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "cmls/errors.hpp"
#include "cmls/text_encoder.hpp"

namespace cmls {
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

YAML::Node to_node(const RunConfig& c) {
  YAML::Node n;
  n["profile"] = c.profile;
  n["seed"] = c.seed;

  YAML::Node d;
  d["train_manifest"] = c.data.train_manifest.generic_string();
  d["valid_manifest"] = c.data.valid_manifest.generic_string();
  d["test_manifest"] = c.data.test_manifest.generic_string();
  d["vocab"] = c.data.vocab.generic_string();
  d["feature_cache"] = c.data.feature_cache.generic_string();
  d["num_workers"] = c.data.num_workers;
  n["data"] = d;

  const FeatureConfig& f = c.features;
  YAML::Node fe;
  fe["window_ms"] = num(f.window_ms);
  fe["hop_ms"] = num(f.hop_ms);
  fe["num_mfcc"] = f.num_mfcc;
  fe["num_mel_bins"] = f.num_mel_bins;
  fe["sample_rate_hz"] = f.sample_rate_hz;
  fe["n_fft"] = f.n_fft;
  fe["f_min_hz"] = num(f.f_min_hz);
  fe["f_max_hz"] = num(f.f_max_hz);
  fe["preemphasis"] = num(f.preemphasis);
  fe["lifter"] = num(f.lifter);
  fe["log_floor"] = num(f.log_floor);
  fe["top_db"] = num(f.top_db);
  fe["periodic_window"] = f.periodic_window;
  n["features"] = fe;

  YAML::Node a;
  a["num_layers"] = c.acoustic.num_layers;
  a["hidden_units"] = c.acoustic.hidden_units;
  a["bidirectional"] = c.acoustic.bidirectional;
  n["acoustic"] = a;

  YAML::Node t;
  t["model"] = c.text.model;
  t["fine_tune"] = c.text.fine_tune;
  n["text"] = t;

  YAML::Node l;
  l["coupling"] = to_string(c.loss.coupling);
  l["margin"] = num(c.loss.margin);
  l["lambda1"] = num(c.loss.lambda1);
  l["lambda2"] = num(c.loss.lambda2);
  l["mining"] = to_string(c.mining);
  n["loss"] = l;

  YAML::Node di;
  di["num_units"] = c.discriminator.num_units;
  di["num_layers"] = c.discriminator.num_layers;
  di["adv_weight"] = num(c.discriminator.adv_weight);
  di["zero_init_output"] = c.discriminator.zero_init_output;
  n["discriminator"] = di;

  const OptimizerConfig& o = c.optimizer;
  YAML::Node op;
  op["beta1"] = num(o.adam.beta1);
  op["beta2"] = num(o.adam.beta2);
  op["epsilon"] = num(o.adam.epsilon);
  op["lr_acoustic"] = num(o.lr_acoustic);
  op["lr_text"] = num(o.lr_text);
  op["lr_discriminator"] = num(o.lr_discriminator);
  YAML::Node s;
  s["kind"] = to_string(o.schedule.kind);
  s["plateau_factor"] = num(o.schedule.plateau_factor);
  s["plateau_patience"] = o.schedule.plateau_patience;
  s["plateau_min_delta"] = num(o.schedule.plateau_min_delta);
  s["max_lr"] = num(o.schedule.max_lr);
  s["div_factor"] = num(o.schedule.div_factor);
  s["final_div_factor"] = num(o.schedule.final_div_factor);
  op["schedule"] = s;
  n["optimizer"] = op;

  const TrainingConfig& tr = c.training;
  YAML::Node tn;
  tn["batch_size"] = tr.batch_size;
  tn["max_epochs"] = tr.max_epochs;
  tn["patience"] = tr.patience;
  tn["min_delta"] = num(tr.min_delta);
  tn["max_grad_norm"] = num(tr.max_grad_norm);
  tn["output_dir"] = tr.output_dir.generic_string();
  n["training"] = tn;
  return n;
}

class Reader {
 public:
  Reader(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ValidationError("config: '" + path_ + "' must be a mapping");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!node_ || !node_.IsMap()) return;
    const YAML::Node v = node_[key];
    if (!v || v.IsNull()) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ValidationError("config: bad value for '" + full(key) + "'");
    }
  }

  void get_path(const std::string& key, fs::path& out) {
    std::string s = out.generic_string();
    get(key, s);
    out = s;
  }

  template <class E, class Parse>
  void get_enum(const std::string& key, E& out, Parse parse) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = parse(s);
  }

  Reader child(const std::string& key) {
    used_.insert(key);
    YAML::Node v = node_ && node_.IsMap() ? node_[key] : YAML::Node();
    return Reader(v, full(key));
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.contains(key)) throw ValidationError("config: unknown key '" + full(key) + "'");
    }
  }

 private:
  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

RunConfig from_node(const YAML::Node& root) {
  RunConfig c;
  Reader r(root, "");
  r.get("profile", c.profile);
  r.get("seed", c.seed);
  {
    Reader d = r.child("data");
    d.get_path("train_manifest", c.data.train_manifest);
    d.get_path("valid_manifest", c.data.valid_manifest);
    d.get_path("test_manifest", c.data.test_manifest);
    d.get_path("vocab", c.data.vocab);
    d.get_path("feature_cache", c.data.feature_cache);
    d.get("num_workers", c.data.num_workers);
    d.finish();
  }
  {
    Reader f = r.child("features");
    FeatureConfig& fc = c.features;
    f.get("window_ms", fc.window_ms);
    f.get("hop_ms", fc.hop_ms);
    f.get("num_mfcc", fc.num_mfcc);
    f.get("num_mel_bins", fc.num_mel_bins);
    f.get("sample_rate_hz", fc.sample_rate_hz);
    f.get("n_fft", fc.n_fft);
    f.get("f_min_hz", fc.f_min_hz);
    f.get("f_max_hz", fc.f_max_hz);
    f.get("preemphasis", fc.preemphasis);
    f.get("lifter", fc.lifter);
    f.get("log_floor", fc.log_floor);
    f.get("top_db", fc.top_db);
    f.get("periodic_window", fc.periodic_window);
    f.finish();
  }
  {
    Reader a = r.child("acoustic");
    a.get("num_layers", c.acoustic.num_layers);
    a.get("hidden_units", c.acoustic.hidden_units);
    a.get("bidirectional", c.acoustic.bidirectional);
    a.finish();
  }
  {
    Reader t = r.child("text");
    t.get("model", c.text.model);
    t.get("fine_tune", c.text.fine_tune);
    t.finish();
  }
  {
    Reader l = r.child("loss");
    l.get_enum("coupling", c.loss.coupling, parse_coupling);
    l.get("margin", c.loss.margin);
    l.get("lambda1", c.loss.lambda1);
    l.get("lambda2", c.loss.lambda2);
    l.get_enum("mining", c.mining, parse_mining_strategy);
    l.finish();
  }
  {
    Reader d = r.child("discriminator");
    d.get("num_units", c.discriminator.num_units);
    d.get("num_layers", c.discriminator.num_layers);
    d.get("adv_weight", c.discriminator.adv_weight);
    d.get("zero_init_output", c.discriminator.zero_init_output);
    d.finish();
  }
  {
    Reader o = r.child("optimizer");
    OptimizerConfig& oc = c.optimizer;
    o.get("beta1", oc.adam.beta1);
    o.get("beta2", oc.adam.beta2);
    o.get("epsilon", oc.adam.epsilon);
    o.get("lr_acoustic", oc.lr_acoustic);
    o.get("lr_text", oc.lr_text);
    o.get("lr_discriminator", oc.lr_discriminator);
    Reader s = o.child("schedule");
    s.get_enum("kind", oc.schedule.kind, parse_schedule);
    s.get("plateau_factor", oc.schedule.plateau_factor);
    s.get("plateau_patience", oc.schedule.plateau_patience);
    s.get("plateau_min_delta", oc.schedule.plateau_min_delta);
    s.get("max_lr", oc.schedule.max_lr);
    s.get("div_factor", oc.schedule.div_factor);
    s.get("final_div_factor", oc.schedule.final_div_factor);
    s.finish();
    o.finish();
  }
  {
    Reader t = r.child("training");
    TrainingConfig& tc = c.training;
    t.get("batch_size", tc.batch_size);
    t.get("max_epochs", tc.max_epochs);
    t.get("patience", tc.patience);
    t.get("min_delta", tc.min_delta);
    t.get("max_grad_norm", tc.max_grad_norm);
    t.get_path("output_dir", tc.output_dir);
    t.finish();
  }
  r.finish();
  c.acoustic.input_dim = c.features.num_mfcc;
  return c;
}

void merge(YAML::Node base, const YAML::Node& overlay) {
  for (const auto& kv : overlay) {
    const auto key = kv.first.as<std::string>();
    if (kv.second.IsMap() && base[key] && base[key].IsMap())
      merge(base[key], kv.second);
    else
      base[key] = YAML::Clone(kv.second);
  }
}

const std::vector<std::pair<std::string, std::string>> kPathKeys = {
    {"data", "train_manifest"}, {"data", "valid_manifest"}, {"data", "test_manifest"},
    {"data", "vocab"},          {"data", "feature_cache"},  {"training", "output_dir"}};

void resolve_paths(YAML::Node root, const fs::path& base) {
  if (base.empty() || !root.IsMap()) return;
  for (const auto& [section, key] : kPathKeys) {
    if (!root[section] || !root[section].IsMap()) continue;
    YAML::Node v = root[section][key];
    if (!v || !v.IsScalar()) continue;
    const fs::path p = v.as<std::string>();
    if (!p.empty() && p.is_relative()) root[section][key] = (base / p).lexically_normal().generic_string();
  }
}

void set_dotted(YAML::Node node, std::span<const std::string> parts, const YAML::Node& value) {
  if (parts.size() == 1) {
    node[parts[0]] = value;
    return;
  }
  if (!node[parts[0]] || !node[parts[0]].IsMap()) node[parts[0]] = YAML::Node(YAML::NodeType::Map);
  set_dotted(node[parts[0]], parts.subspan(1), value);
}

YAML::Node overrides_node(std::span<const std::string> overrides) {
  YAML::Node out(YAML::NodeType::Map);
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + o + "' is not of the form key=value");
    std::vector<std::string> parts;
    std::stringstream ss(o.substr(0, eq));
    for (std::string p; std::getline(ss, p, '.');) {
      if (p.empty()) throw ValidationError("override '" + o + "' has an empty key segment");
      parts.push_back(p);
    }
    YAML::Node value;
    try {
      value = YAML::Load(o.substr(eq + 1));
    } catch (const YAML::Exception& e) {
      throw ValidationError("override '" + o + "': " + e.what());
    }
    set_dotted(out, parts, value);
  }
  return out;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(lr_acoustic > 0.0) || !(lr_text > 0.0) || !(lr_discriminator > 0.0))
    throw ValidationError("optimizer: learning rates must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ValidationError("optimizer: betas must be in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ValidationError("optimizer: epsilon must be positive");
  schedule.validate();
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ValidationError("training: batch_size must be >= 1");
  if (max_epochs < 1) throw ValidationError("training: max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("training: patience must be >= 1");
  if (!(min_delta >= 0.0)) throw ValidationError("training: min_delta must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw ValidationError("training: max_grad_norm must be >= 0");
}

bool RunConfig::uses_text() const {
  return loss.coupling != Coupling::none || loss.lambda1 != 0.0;
}

void RunConfig::validate() const {
  features.validate();
  AcousticEncoderConfig a = acoustic;
  a.input_dim = features.num_mfcc;
  a.validate();
  loss.validate();
  if (loss.coupling == Coupling::adversarial) discriminator.validate();
  optimizer.validate();
  training.validate();
  if (data.num_workers < 1) throw ValidationError("data: num_workers must be >= 1");
  if (uses_text() && text.model.empty()) throw ValidationError("text: model must be set when text embeddings are used");
}

std::string RunConfig::to_yaml() const {
  YAML::Emitter out;
  out << to_node(*this);
  return std::string(out.c_str()) + "\n";
}

std::uint64_t RunConfig::hash() const { return fnv1a(to_yaml()); }

std::vector<std::string> profile_names() { return {"fsc", "snips", "synthetic"}; }

RunConfig profile_defaults(const std::string& name) {
  RunConfig c;
  c.profile = name;
  if (name == "fsc") return c;
  if (name == "snips") {
    c.acoustic.num_layers = 3;
    c.optimizer.schedule.kind = ScheduleKind::one_cycle;
    c.optimizer.schedule.max_lr = 6e-3;
    c.discriminator = DiscriminatorConfig::snips();
    c.training.batch_size = 32;
    return c;
  }
  if (name == "synthetic") {
    c.acoustic.num_layers = 1;
    c.acoustic.hidden_units = 32;
    c.text.model = LexicalTextEncoder::kModelId;
    c.optimizer.schedule.kind = ScheduleKind::constant;
    c.optimizer.lr_acoustic = 2e-3;
    c.optimizer.lr_discriminator = 1e-3;
    c.discriminator.num_units = 64;
    c.discriminator.num_layers = 1;
    c.training.batch_size = 16;
    c.training.max_epochs = 20;
    c.training.patience = 20;
    c.training.max_grad_norm = 5.0;
    c.training.output_dir = "runs/synthetic";
    return c;
  }
  std::string known;
  for (const auto& p : profile_names()) known += (known.empty() ? "" : ", ") + p;
  throw ValidationError("unknown profile '" + name + "' (expected one of " + known + ")");
}

RunConfig parse_run_config(const std::string& yaml_text, std::span<const std::string> overrides,
                           const fs::path& base_dir) {
  YAML::Node file;
  try {
    file = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(std::string("config: ") + e.msg, e.mark.line + 1);
  }
  if (file.IsNull()) file = YAML::Node(YAML::NodeType::Map);
  if (!file.IsMap()) throw ValidationError("config: top level must be a mapping");
  resolve_paths(file, base_dir);

  YAML::Node cli = overrides_node(overrides);
  resolve_paths(cli, fs::current_path());

  std::string profile = "fsc";
  if (file["profile"]) profile = file["profile"].as<std::string>();
  if (cli["profile"]) profile = cli["profile"].as<std::string>();

  YAML::Node merged = to_node(profile_defaults(profile));
  merge(merged, file);
  merge(merged, cli);
  RunConfig c = from_node(merged);
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), overrides, fs::absolute(path).parent_path());
}

}  // namespace cmls
