#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>

#include "cmls/adversarial.hpp"
#include "cmls/config.hpp"
#include "cmls/model.hpp"

namespace cmls {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  SluModel model;
  std::optional<Discriminator> discriminator;
  int epoch = 0;
  double best_valid_loss = std::numeric_limits<double>::infinity();
};

/// Layout (little-endian): magic "CMLSCKPT", u32 version, u64 config hash,
/// u64 feature-config hash, config YAML, i32 epoch, f64 best validation loss,
/// vocabulary, normalizer, then named parameter matrices. Written to a
/// temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws ParseError on a malformed file and ValidationError when the embedded
/// hash, names or shapes disagree with the embedded config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cmls
