#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cmls/bert.hpp"
#include "cmls/errors.hpp"
#include "cmls/text_encoder.hpp"
#include "cmls/wordpiece.hpp"
#include "test_support.hpp"

namespace cmls {
namespace {

double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

TEST(LexicalTextEncoder, DeterministicAndSized) {
  const LexicalTextEncoder a, b;
  const std::vector<std::string> texts = {"switch the light on", "switch the light on", "make it colder"};
  const Matrix x = a.encode(texts), y = b.encode(texts);
  EXPECT_EQ(x.rows(), 3);
  EXPECT_EQ(x.cols(), kEmbeddingDim);
  EXPECT_EQ(x, y);
  EXPECT_EQ(x.row(0), x.row(1));
  EXPECT_NEAR(x.row(2).norm(), 1.0, 1e-12);
}

TEST(LexicalTextEncoder, WordsAreLowercasedAndSplit) {
  EXPECT_EQ(LexicalTextEncoder::words("It's TOO dark, in here!"),
            (std::vector<std::string>{"its", "too", "dark", "in", "here"}));
}

TEST(LexicalTextEncoder, EmptyTranscriptRejected) {
  const LexicalTextEncoder te;
  const std::vector<std::string> texts = {"fine", ""};
  EXPECT_THROW(te.encode(texts), ValidationError);
}

TEST(LexicalTextEncoder, ProbeSetSeparatesIntents) {
  const std::vector<std::vector<std::string>> probe = {
      {"increase the brightness", "make the lights brighter", "brighten the room", "more brightness please",
       "could you increase the brightness in here"},
      {"decrease the brightness", "dim the lights", "make the lights dimmer", "less brightness please",
       "could you lower the brightness"},
      {"switch the lights on", "turn on the lights", "lights on please", "switch on the lamp"},
      {"switch the lights off", "turn off the lights", "lights off please", "switch off the lamp",
       "kill the lights", "turn the lamp off"},
  };
  std::vector<std::string> texts;
  std::vector<int> label;
  for (std::size_t i = 0; i < probe.size(); ++i)
    for (const auto& s : probe[i]) {
      texts.push_back(s);
      label.push_back(static_cast<int>(i));
    }
  ASSERT_EQ(texts.size(), 20u);
  const LexicalTextEncoder te;
  const Matrix e = te.encode(texts);
  double within = 0, across = 0;
  int nw = 0, na = 0;
  for (std::size_t i = 0; i < texts.size(); ++i)
    for (std::size_t j = i + 1; j < texts.size(); ++j) {
      const double c = cosine(e.row(static_cast<long>(i)).transpose(), e.row(static_cast<long>(j)).transpose());
      if (label[i] == label[j]) {
        within += c;
        ++nw;
      } else {
        across += c;
        ++na;
      }
    }
  EXPECT_GT(within / nw, across / na);
}

TEST(TextEncoderStats, CountsConstructionAndTranscripts) {
  text_encoder_stats().reset();
  const LexicalTextEncoder te;
  EXPECT_EQ(text_encoder_stats().constructed.load(), 1);
  const std::vector<std::string> texts = {"a b", "c d", "e"};
  te.encode(texts);
  EXPECT_EQ(text_encoder_stats().forward_calls.load(), 3);
  text_encoder_stats().reset();
}

TEST(ResolveTextEncoder, BuiltinAndMissing) {
  EXPECT_EQ(resolve_text_encoder("builtin:lexical")->model_id(), "builtin:lexical");
  try {
    resolve_text_encoder("no-such-org/no-such-model-xyz");
    FAIL() << "expected ResolutionError";
  } catch (const ResolutionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("CMLS_MODEL_DIR"), std::string::npos) << msg;
  }
}

struct BertFixture : ::testing::Test {
  static void SetUpTestSuite() {
    std::ifstream in(testing::fixture("bert_expected.json"));
    ASSERT_TRUE(in);
    expected = nlohmann::json::parse(in);
  }
  static nlohmann::json expected;
};
nlohmann::json BertFixture::expected;

TEST_F(BertFixture, TokenizerMatchesReference) {
  const WordPieceTokenizer tok = WordPieceTokenizer::from_file(testing::fixture("tiny_bert/vocab.txt"));
  for (const auto& c : expected["cases"]) {
    const std::string text = c["text"];
    EXPECT_EQ(tok.tokenize(text), c["tokens"].get<std::vector<std::string>>()) << text;
    EXPECT_EQ(tok.encode(text), c["ids"].get<std::vector<int>>()) << text;
  }
}

TEST_F(BertFixture, ClsMatchesReference) {
  const auto te = resolve_text_encoder(testing::fixture("tiny_bert").string());
  EXPECT_EQ(te->dim(), 32);
  for (const auto& c : expected["cases"]) {
    const std::string text = c["text"];
    const std::vector<double> want = c["cls"];
    const Matrix got = te->encode(std::vector<std::string>{text});
    ASSERT_EQ(got.cols(), static_cast<long>(want.size()));
    double worst = 0.0;
    for (std::size_t k = 0; k < want.size(); ++k) worst = std::max(worst, std::abs(got(0, static_cast<long>(k)) - want[k]));
    EXPECT_LT(worst, 1e-9) << text;
  }
}

TEST_F(BertFixture, DeterministicInEvalMode) {
  const auto te = resolve_text_encoder(testing::fixture("tiny_bert").string());
  const std::vector<std::string> t = {"turn the light off", "turn the light off"};
  const Matrix e = te->encode(t);
  EXPECT_EQ(e.row(0), e.row(1));
}

TEST_F(BertFixture, TapeForwardMatchesAndReachesParameters) {
  auto te = resolve_text_encoder(testing::fixture("tiny_bert").string());
  const std::string text = "could you please increase the brightness";
  const Matrix plain = te->encode(std::vector<std::string>{text});
  ParameterRefs ps = te->parameters();
  ASSERT_FALSE(ps.empty());
  for (Parameter* p : ps) p->trainable = true;
  zero_grads(ps);
  {
    ag::Tape tape;
    ag::Var cls = te->encode_on_tape(tape, text);
    EXPECT_LT((cls.value() - plain).cwiseAbs().maxCoeff(), 1e-12);
    tape.backward(ag::sum_all(ag::mul(cls, cls)));
  }
  double total = 0.0;
  for (Parameter* p : ps) total += p->grad.squaredNorm();
  EXPECT_GT(total, 0.0);
}

TEST_F(BertFixture, BadLayoutIsRejected) {
  testing::TempDir dir;
  testing::write_file(dir / "config.json", "{\"hidden_size\": 32}");
  EXPECT_THROW(resolve_text_encoder(dir.path().string()), Error);
}

}  // namespace
}  // namespace cmls
