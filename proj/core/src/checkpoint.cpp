#include "cmls/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "binio.hpp"
#include "cmls/errors.hpp"

namespace cmls {
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'C', 'M', 'L', 'S', 'C', 'K', 'P', 'T'};

ConstParameterRefs all_parameters(const Checkpoint& c) {
  ConstParameterRefs out = c.model.parameters();
  if (c.discriminator)
    for (const Parameter* p : c.discriminator->parameters()) out.push_back(p);
  return out;
}

ParameterRefs all_parameters(Checkpoint& c) {
  ParameterRefs out = c.model.parameters();
  if (c.discriminator)
    for (Parameter* p : c.discriminator->parameters()) out.push_back(p);
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& c) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    bin::put<std::uint32_t>(out, kCheckpointVersion);
    bin::put<std::uint64_t>(out, c.config.hash());
    bin::put<std::uint64_t>(out, c.model.features.hash());
    bin::put_string(out, c.config.to_yaml());
    bin::put<std::int32_t>(out, c.epoch);
    bin::put<double>(out, c.best_valid_loss);
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.model.vocab.size()));
    for (const auto& l : c.model.vocab.labels()) bin::put_string(out, l);
    bin::put_matrix(out, c.model.normalizer.mean);
    bin::put_matrix(out, c.model.normalizer.inv_std);
    const ConstParameterRefs params = all_parameters(c);
    bin::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter* p : params) {
      bin::put_string(out, p->name);
      bin::put_matrix(out, p->value);
    }
    if (!out.flush()) throw ValidationError("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ParseError(path.string() + " is not a checkpoint file");
  const auto version = bin::get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto config_hash = bin::get<std::uint64_t>(in, "config hash");
  const auto feature_hash = bin::get<std::uint64_t>(in, "feature hash");
  const std::string yaml = bin::get_string(in, "config");

  Checkpoint c;
  c.config = parse_run_config(yaml);
  if (c.config.hash() != config_hash) throw ValidationError("checkpoint config hash mismatch in " + path.string());
  if (c.config.features.hash() != feature_hash)
    throw ValidationError("checkpoint feature hash mismatch in " + path.string());
  c.epoch = bin::get<std::int32_t>(in, "epoch");
  c.best_valid_loss = bin::get<double>(in, "best loss");

  const auto n_labels = bin::get<std::uint32_t>(in, "vocabulary size");
  std::vector<std::string> labels;
  for (std::uint32_t i = 0; i < n_labels; ++i) labels.push_back(bin::get_string(in, "label"));

  Rng rng(0);
  c.model = SluModel(IntentVocab(std::move(labels)), c.config.features, c.config.acoustic, rng);
  c.model.normalizer.mean = bin::get_matrix(in, "normalizer");
  c.model.normalizer.inv_std = bin::get_matrix(in, "normalizer");
  if (c.model.normalizer.mean.cols() != c.config.features.num_mfcc ||
      c.model.normalizer.inv_std.cols() != c.config.features.num_mfcc)
    throw ValidationError("checkpoint normalizer width disagrees with num_mfcc");
  if (c.config.loss.coupling == Coupling::adversarial) {
    DiscriminatorConfig dc = c.config.discriminator;
    dc.input_dim = c.config.acoustic.output_dim;
    c.discriminator = Discriminator(dc, rng);
  }

  std::map<std::string, Matrix> stored;
  const auto n_params = bin::get<std::uint32_t>(in, "parameter count");
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = bin::get_string(in, "parameter name");
    stored[name] = bin::get_matrix(in, "parameter");
  }
  const ParameterRefs params = all_parameters(c);
  if (params.size() != stored.size())
    throw ValidationError("checkpoint holds " + std::to_string(stored.size()) + " parameters, config implies " +
                          std::to_string(params.size()));
  for (Parameter* p : params) {
    auto it = stored.find(p->name);
    if (it == stored.end()) throw ValidationError("checkpoint lacks parameter " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw ValidationError("checkpoint parameter " + p->name + " has the wrong shape");
    p->value = std::move(it->second);
    p->grad.setZero(p->value.rows(), p->value.cols());
  }
  return c;
}

}  // namespace cmls
