#pragma once

#include <optional>
#include <string>

#include "cmls/tensor.hpp"

namespace cmls {

enum class Modality { acoustic, text };

/// A vector in the shared latent space with its provenance.
struct Embedding {
  Vector vector;
  Modality modality = Modality::acoustic;
  std::optional<int> intent;
  std::string utterance_id;

  /// Throws ValidationError unless every component is finite and dim == expected_dim.
  void validate(int expected_dim = kEmbeddingDim) const;
};

}  // namespace cmls
