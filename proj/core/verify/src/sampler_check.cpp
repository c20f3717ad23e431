#include <chrono>
#include <set>

#include "cmls/sampler.hpp"
#include "cmls/verify.hpp"

namespace cmls::verify {
namespace {

Embedding emb(double x, Modality m, int intent) {
  Vector v(2);
  v << x, -x;
  return Embedding{v, m, intent, {}};
}

bool pairs_ok(const std::vector<int>& labels, const std::vector<PairIndex>& pairs, bool warned) {
  const std::set<int> distinct(labels.begin(), labels.end());
  const auto n = labels.size();
  const bool negatives = distinct.size() > 1;
  if (pairs.size() != (negatives ? 2 * n : n)) return false;
  if (!negatives && !warned) return false;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const PairIndex& pos = pairs[k++];
    if (pos.acoustic != static_cast<int>(i) || pos.text != static_cast<int>(i) || !pos.same_intent) return false;
    if (!negatives) continue;
    const PairIndex& neg = pairs[k++];
    if (neg.acoustic != static_cast<int>(i) || neg.same_intent) return false;
    if (neg.text < 0 || neg.text >= static_cast<int>(n)) return false;
    if (labels[static_cast<std::size_t>(neg.text)] == labels[i]) return false;
  }
  return true;
}

bool triplets_ok(const std::vector<int>& labels, const std::vector<TripletIndex>& triplets, bool warned) {
  const std::set<int> distinct(labels.begin(), labels.end());
  const auto n = labels.size();
  if (distinct.size() < 2) return triplets.empty() && warned;
  if (triplets.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const TripletIndex& t = triplets[i];
    if (t.anchor != static_cast<int>(i)) return false;
    if (t.positive < 0 || t.positive >= static_cast<int>(n) || t.negative < 0 || t.negative >= static_cast<int>(n))
      return false;
    if (labels[static_cast<std::size_t>(t.positive)] != labels[i]) return false;
    if (labels[static_cast<std::size_t>(t.negative)] == labels[i]) return false;
  }
  return true;
}

bool same_pairs(const std::vector<PairIndex>& a, const std::vector<PairIndex>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].acoustic != b[i].acoustic || a[i].text != b[i].text || a[i].same_intent != b[i].same_intent) return false;
  return true;
}

bool same_triplets(const std::vector<TripletIndex>& a, const std::vector<TripletIndex>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].anchor != b[i].anchor || a[i].positive != b[i].positive || a[i].negative != b[i].negative) return false;
  return true;
}

}  // namespace

SuiteResult sampler_invariants(int max_batch, int num_intents) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteResult s;
  s.name = "sampler invariants";
  long batches = 0, pair_bad = 0, triplet_bad = 0, modality_bad = 0, nondeterministic = 0;

  for (int n = 1; n <= max_batch; ++n) {
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    while (true) {
      ++batches;
      const std::uint64_t seed = static_cast<std::uint64_t>(batches) * 2654435761u;
      std::vector<std::string> pw, tw;
      const auto pairs = mine_pair_indices(labels, seed, &pw);
      const auto triplets = mine_triplet_indices(labels, seed, &tw);
      if (!pairs_ok(labels, pairs, !pw.empty())) ++pair_bad;
      if (!triplets_ok(labels, triplets, !tw.empty())) ++triplet_bad;
      if (!same_pairs(pairs, mine_pair_indices(labels, seed, &pw)) || !same_triplets(triplets, mine_triplet_indices(labels, seed, &tw)))
        ++nondeterministic;

      std::vector<BatchEntry> entries;
      for (int i = 0; i < n; ++i)
        entries.push_back({emb(i, Modality::acoustic, labels[static_cast<std::size_t>(i)]),
                           emb(100 + i, Modality::text, labels[static_cast<std::size_t>(i)]),
                           labels[static_cast<std::size_t>(i)]});
      for (const PairExample& p : mine_pairs(entries, seed, &pw)) {
        const bool same = p.x1.intent == p.x2.intent;
        if (p.x1.modality != Modality::acoustic || p.x2.modality != Modality::text || same != p.same_intent)
          ++modality_bad;
      }
      for (const TripletExample& t : mine_triplets(entries, seed, &tw)) {
        if (t.anchor.modality != Modality::acoustic || t.positive.modality != Modality::text ||
            t.negative.modality != Modality::text || t.anchor.intent != t.positive.intent ||
            t.anchor.intent == t.negative.intent)
          ++modality_bad;
      }

      int k = 0;
      while (k < n && ++labels[static_cast<std::size_t>(k)] == num_intents) labels[static_cast<std::size_t>(k++)] = 0;
      if (k == n) break;
    }
  }
  const std::string scanned = std::to_string(batches) + " batches";
  s.add("pair invariants", pair_bad == 0, std::to_string(pair_bad) + " violations over " + scanned);
  s.add("triplet invariants", triplet_bad == 0, std::to_string(triplet_bad) + " violations over " + scanned);
  s.add("cross-modal construction", modality_bad == 0, std::to_string(modality_bad) + " violations over " + scanned);
  s.add("deterministic given seed", nondeterministic == 0, std::to_string(nondeterministic) + " mismatches");

  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace cmls::verify
