#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmls/losses.hpp"

namespace cmls {

/// Only in-batch uniform mining is implemented; the enum is the hook for
/// harder strategies.
enum class MiningStrategy { uniform };

std::string to_string(MiningStrategy s);
MiningStrategy parse_mining_strategy(const std::string& name);

/// One training item: the acoustic and text embeddings of the same utterance.
struct BatchEntry {
  Embedding acoustic;
  Embedding text;
  int intent = 0;
};

/// Warnings are appended to `warnings` when given and logged otherwise.

/// For each item i: (i, i, t=1) followed by (i, j, t=0) with j drawn uniformly
/// among items of another intent. Without another intent only positives are
/// emitted and a warning is appended.
std::vector<PairIndex> mine_pair_indices(std::span<const int> intents, std::uint64_t seed,
                                         std::vector<std::string>* warnings = nullptr);

/// For each item i: anchor i, positive drawn uniformly among same-intent items
/// (i itself included), negative drawn uniformly among other-intent items.
/// A single-intent batch yields no triplets and a warning.
std::vector<TripletIndex> mine_triplet_indices(std::span<const int> intents, std::uint64_t seed,
                                               std::vector<std::string>* warnings = nullptr);

std::vector<PairExample> mine_pairs(std::span<const BatchEntry> batch, std::uint64_t seed,
                                    std::vector<std::string>* warnings = nullptr);
std::vector<TripletExample> mine_triplets(std::span<const BatchEntry> batch, std::uint64_t seed,
                                          std::vector<std::string>* warnings = nullptr);

}  // namespace cmls
