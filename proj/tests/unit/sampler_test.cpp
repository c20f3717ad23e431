#include <algorithm>

#include <gtest/gtest.h>

#include "cmls/errors.hpp"
#include "cmls/sampler.hpp"
#include "cmls/text_encoder.hpp"
#include "test_support.hpp"

namespace cmls {
namespace {

std::vector<BatchEntry> make_batch(const std::vector<int>& intents, Rng& rng) {
  std::vector<BatchEntry> b;
  for (std::size_t i = 0; i < intents.size(); ++i) {
    const std::string id = "u" + std::to_string(i);
    b.push_back({Embedding{testing::random_vector(4, rng), Modality::acoustic, intents[i], id},
                 Embedding{testing::random_vector(4, rng), Modality::text, intents[i], id}, intents[i]});
  }
  return b;
}

TEST(MinePairs, CountsOnTwoIntentBatch) {
  Rng rng(1);
  const auto batch = make_batch({0, 1, 0, 1}, rng);
  std::vector<std::string> warnings;
  const auto pairs = mine_pairs(batch, 5, &warnings);
  ASSERT_EQ(pairs.size(), 8u);
  int pos = 0, neg = 0;
  for (const PairExample& p : pairs) {
    (p.same_intent ? pos : neg)++;
    EXPECT_EQ(p.x1.modality, Modality::acoustic);
    EXPECT_EQ(p.x2.modality, Modality::text);
    EXPECT_EQ(p.same_intent, p.x1.intent == p.x2.intent);
  }
  EXPECT_EQ(pos, 4);
  EXPECT_EQ(neg, 4);
  EXPECT_TRUE(warnings.empty());
}

TEST(MinePairs, PositiveIsOwnTranscript) {
  Rng rng(2);
  const auto batch = make_batch({0, 1, 2, 0, 1}, rng);
  const auto pairs = mine_pairs(batch, 9);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PairExample& p = pairs[2 * i];
    EXPECT_TRUE(p.same_intent);
    EXPECT_EQ(p.x1.utterance_id, batch[i].acoustic.utterance_id);
    EXPECT_EQ(p.x2.utterance_id, batch[i].text.utterance_id);
    EXPECT_EQ(p.x2.vector, batch[i].text.vector);
  }
}

TEST(MinePairs, SingleIntentBatchWarnsAndKeepsPositives) {
  Rng rng(3);
  const auto batch = make_batch({2, 2, 2, 2}, rng);
  std::vector<std::string> warnings;
  const auto pairs = mine_pairs(batch, 1, &warnings);
  ASSERT_EQ(pairs.size(), 4u);
  for (const PairExample& p : pairs) EXPECT_TRUE(p.same_intent);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(MinePairs, DeterministicGivenSeed) {
  const std::vector<int> intents = {0, 1, 2, 1, 0, 2, 2};
  const auto a = mine_pair_indices(intents, 42), b = mine_pair_indices(intents, 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].acoustic, b[i].acoustic);
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(a[i].same_intent, b[i].same_intent);
  }
  bool differs = false;
  for (std::uint64_t s = 0; s < 20 && !differs; ++s) {
    const auto c = mine_pair_indices(intents, s);
    for (std::size_t i = 0; i < a.size(); ++i) differs |= c[i].text != a[i].text;
  }
  EXPECT_TRUE(differs);
}

TEST(MineTriplets, CountsAndInvariants) {
  Rng rng(4);
  const auto batch = make_batch({0, 0, 1, 1, 2, 2}, rng);
  const auto tris = mine_triplets(batch, 7);
  ASSERT_EQ(tris.size(), 6u);
  for (std::size_t i = 0; i < tris.size(); ++i) {
    const TripletExample& t = tris[i];
    EXPECT_EQ(t.anchor.utterance_id, batch[i].acoustic.utterance_id);
    EXPECT_EQ(t.anchor.modality, Modality::acoustic);
    EXPECT_EQ(t.positive.modality, Modality::text);
    EXPECT_EQ(t.negative.modality, Modality::text);
    EXPECT_EQ(t.anchor.intent, t.positive.intent);
    EXPECT_NE(t.anchor.intent, t.negative.intent);
  }
}

TEST(MineTriplets, SingleIntentBatchIsEmptyWithWarning) {
  std::vector<std::string> warnings;
  const std::vector<int> intents = {1, 1, 1};
  EXPECT_TRUE(mine_triplet_indices(intents, 3, &warnings).empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(MineTriplets, NegativesAreUniformOverOtherIntents) {
  const std::vector<int> intents = {0, 1, 1, 2, 2, 2};
  std::vector<int> hits(6, 0);
  const int trials = 6000;
  for (int s = 0; s < trials; ++s) ++hits[static_cast<std::size_t>(mine_triplet_indices(intents, s)[0].negative)];
  EXPECT_EQ(hits[0], 0);
  for (int j = 1; j < 6; ++j) EXPECT_NEAR(hits[static_cast<std::size_t>(j)] / double(trials), 0.2, 0.03);
}

TEST(MineTriplets, BrightnessWorkedExample) {
  const LexicalTextEncoder te;
  const std::vector<std::string> texts = {"could you please increase the brightness", "it's too dark in here",
                                          "change the lights to green"};
  const std::vector<int> intents = {0, 0, 1};  // IncreaseBrightness, IncreaseBrightness, ChangeColor
  const Matrix text = te.encode(texts);
  std::vector<BatchEntry> batch;
  Rng rng(5);
  for (int i = 0; i < 3; ++i) {
    batch.push_back({Embedding{testing::random_vector(kEmbeddingDim, rng), Modality::acoustic, intents[i], texts[i]},
                     Embedding{text.row(i).transpose(), Modality::text, intents[i], texts[i]}, intents[i]});
  }
  bool found = false;
  for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
    const auto tris = mine_triplets(batch, seed);
    ASSERT_EQ(tris.size(), 3u);
    const TripletExample& t = tris[0];
    EXPECT_EQ(t.anchor.utterance_id, texts[0]);
    EXPECT_EQ(t.negative.utterance_id, texts[2]);
    found = t.positive.utterance_id == texts[1];
    if (found) {
      EXPECT_EQ(t.anchor.intent, t.positive.intent);
      EXPECT_NE(t.anchor.intent, t.negative.intent);
      EXPECT_EQ(t.positive.vector, text.row(1).transpose());
    }
  }
  EXPECT_TRUE(found);
}

TEST(MineTriplets, ExhaustiveInvariantScan) {
  long checked = 0;
  for (int n = 1; n <= 6; ++n) {
    std::vector<int> intents(static_cast<std::size_t>(n), 0);
    while (true) {
      std::vector<std::string> w;
      const auto tris = mine_triplet_indices(intents, static_cast<std::uint64_t>(checked), &w);
      const auto pairs = mine_pair_indices(intents, static_cast<std::uint64_t>(checked), &w);
      const bool multi = std::any_of(intents.begin(), intents.end(), [&](int x) { return x != intents[0]; });
      EXPECT_EQ(tris.size(), multi ? intents.size() : 0u);
      EXPECT_EQ(pairs.size(), multi ? 2 * intents.size() : intents.size());
      for (std::size_t i = 0; i < tris.size(); ++i) {
        EXPECT_EQ(tris[i].anchor, static_cast<int>(i));
        EXPECT_EQ(intents[static_cast<std::size_t>(tris[i].positive)], intents[i]);
        EXPECT_NE(intents[static_cast<std::size_t>(tris[i].negative)], intents[i]);
      }
      for (const PairIndex& p : pairs)
        EXPECT_EQ(p.same_intent, intents[static_cast<std::size_t>(p.acoustic)] == intents[static_cast<std::size_t>(p.text)]);
      ++checked;
      int k = 0;
      while (k < n && ++intents[static_cast<std::size_t>(k)] == 3) intents[static_cast<std::size_t>(k++)] = 0;
      if (k == n) break;
    }
  }
  EXPECT_EQ(checked, 3 + 9 + 27 + 81 + 243 + 729);
}

TEST(MiningStrategy, ParseRoundTrip) {
  EXPECT_EQ(parse_mining_strategy(to_string(MiningStrategy::uniform)), MiningStrategy::uniform);
  EXPECT_THROW(parse_mining_strategy("semi_hard"), ValidationError);
}

}  // namespace
}  // namespace cmls
