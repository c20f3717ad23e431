#include "cmls/sampler.hpp"

#include <random>

#include <spdlog/spdlog.h>

#include "cmls/errors.hpp"

namespace cmls {

std::string to_string(MiningStrategy) { return "uniform"; }

MiningStrategy parse_mining_strategy(const std::string& name) {
  if (name == "uniform") return MiningStrategy::uniform;
  throw ValidationError("unknown mining strategy '" + name + "' (expected uniform)");
}

namespace {

void warn(std::vector<std::string>* sink, std::string msg) {
  if (sink)
    sink->push_back(std::move(msg));
  else
    spdlog::warn("{}", msg);
}

int pick(const std::vector<int>& pool, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  return pool[d(rng)];
}

}  // namespace

std::vector<PairIndex> mine_pair_indices(std::span<const int> intents, std::uint64_t seed, std::vector<std::string>* warnings) {
  const int n = static_cast<int>(intents.size());
  std::vector<PairIndex> out;
  if (n < 2) warn(warnings, "mine_pairs: batch of size " + std::to_string(n) + " has no negatives; positives only");
  Rng rng(seed);
  bool missing_negatives = false;
  std::vector<int> others;
  for (int i = 0; i < n; ++i) {
    out.push_back({i, i, true});
    others.clear();
    for (int j = 0; j < n; ++j)
      if (intents[j] != intents[i]) others.push_back(j);
    if (others.empty()) {
      missing_negatives = true;
      continue;
    }
    out.push_back({i, pick(others, rng), false});
  }
  if (missing_negatives && n >= 2)
    warn(warnings, "mine_pairs: some items have no other-intent partner in the batch; emitting positives only for them");
  return out;
}

std::vector<TripletIndex> mine_triplet_indices(std::span<const int> intents, std::uint64_t seed,
                                               std::vector<std::string>* warnings) {
  const int n = static_cast<int>(intents.size());
  std::vector<TripletIndex> out;
  bool multi = false;
  for (int i = 1; i < n && !multi; ++i) multi = intents[i] != intents[0];
  if (!multi) {
    warn(warnings, "mine_triplets: batch has fewer than two intents; no valid negatives");
    return out;
  }
  Rng rng(seed);
  std::vector<int> same, others;
  for (int i = 0; i < n; ++i) {
    same.clear();
    others.clear();
    for (int j = 0; j < n; ++j) (intents[j] == intents[i] ? same : others).push_back(j);
    const int pos = pick(same, rng);
    const int neg = pick(others, rng);
    out.push_back({i, pos, neg});
  }
  return out;
}

namespace {

std::vector<int> intents_of(std::span<const BatchEntry> batch) {
  std::vector<int> ys;
  for (const auto& e : batch) {
    if (e.acoustic.modality != Modality::acoustic || e.text.modality != Modality::text)
      throw ValidationError("sampler: batch entries must pair an acoustic with a text embedding");
    ys.push_back(e.intent);
  }
  return ys;
}

}  // namespace

std::vector<PairExample> mine_pairs(std::span<const BatchEntry> batch, std::uint64_t seed, std::vector<std::string>* warnings) {
  const auto ys = intents_of(batch);
  std::vector<PairExample> out;
  for (const auto& p : mine_pair_indices(ys, seed, warnings))
    out.push_back({batch[static_cast<std::size_t>(p.acoustic)].acoustic, batch[static_cast<std::size_t>(p.text)].text, p.same_intent});
  return out;
}

std::vector<TripletExample> mine_triplets(std::span<const BatchEntry> batch, std::uint64_t seed,
                                          std::vector<std::string>* warnings) {
  const auto ys = intents_of(batch);
  std::vector<TripletExample> out;
  for (const auto& t : mine_triplet_indices(ys, seed, warnings))
    out.push_back({batch[static_cast<std::size_t>(t.anchor)].acoustic, batch[static_cast<std::size_t>(t.positive)].text,
                   batch[static_cast<std::size_t>(t.negative)].text});
  return out;
}

}  // namespace cmls
