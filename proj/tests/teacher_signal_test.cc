#include "gecw/teacher_signal.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gecw/error.h"
#include "test_util.h"

namespace gecw {
namespace {

using testing::MakeCorpus;

TEST(EntropyNormTest, Examples) {
  const std::vector<double> one_hot = {0, 0, 1, 0};
  EXPECT_EQ(EntropyNorm(one_hot, 4), 0.0);
  const std::vector<double> uniform(4, 0.25);
  EXPECT_NEAR(EntropyNorm(uniform, 4), 1.0, 1e-15);
  const std::vector<double> half = {0.5, 0.5, 0, 0};
  EXPECT_NEAR(EntropyNorm(half, 4), 0.5, 1e-15);
  // High-precision value of -(0.9 ln 0.9 + 2 * 0.05 ln 0.05) / ln 3.
  const std::vector<double> peaked = {0.9, 0.05, 0.05};
  EXPECT_NEAR(EntropyNorm(peaked, 3), 0.3589962496465303, 1e-12);
}

TEST(EntropyNormTest, RejectsInvalidDistributions) {
  const std::vector<double> ok = {0.5, 0.5};
  EXPECT_THROW(EntropyNorm(ok, 1), Error);
  EXPECT_THROW(EntropyNorm(ok, 3), Error);
  const std::vector<double> negative = {1.5, -0.5};
  EXPECT_THROW(EntropyNorm(negative, 2), Error);
  const std::vector<double> short_sum = {0.5, 0.4};
  EXPECT_THROW(EntropyNorm(short_sum, 2), Error);
}

std::vector<double> RandomDist(std::mt19937_64& rng, int k) {
  std::exponential_distribution<double> exp_dist(1.0);
  std::vector<double> d(k);
  double sum = 0;
  for (double& x : d) sum += (x = exp_dist(rng));
  for (double& x : d) x /= sum;
  return d;
}

TEST(EntropyNormTest, PermutationInvariantAndMaximalAtUniform) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 20);
    std::vector<double> d = RandomDist(rng, k);
    const double h = EntropyNorm(d, k);
    EXPECT_GE(h, 0.0);
    EXPECT_LT(h, 1.0);
    std::shuffle(d.begin(), d.end(), rng);
    EXPECT_NEAR(EntropyNorm(d, k), h, 1e-12);
  }
}

SignalFile SmallFile() {
  SignalFile f;
  f.header.vocab_size = 3;
  f.header.vocab_hash = 42;
  f.header.has_full_dist = true;
  TeacherSignal s;
  s.sample_id = 0;
  s.positions = {{0.9, 0.3589962496465303}, {1.0 / 3, 1.0}};
  s.full_dist = std::vector<std::vector<double>>{{0.9, 0.05, 0.05}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  f.signals.push_back(s);
  return f;
}

TEST(SignalFileTest, SaveLoadIsExact) {
  testing::TempDir dir;
  const SignalFile f = SmallFile();
  SaveSignals(dir / "s.jsonl", f);
  const SignalFile back = LoadSignals(dir / "s.jsonl");
  EXPECT_EQ(back.header.vocab_size, 3);
  EXPECT_EQ(back.header.vocab_hash, 42u);
  EXPECT_TRUE(back.header.has_full_dist);
  EXPECT_EQ(back.header.manner, Manner::kSeq2Edit);
  ASSERT_EQ(back.signals.size(), 1u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.signals[0].positions[i].p_gold, f.signals[0].positions[i].p_gold);
    EXPECT_EQ(back.signals[0].positions[i].entropy_norm, f.signals[0].positions[i].entropy_norm);
  }
  EXPECT_EQ(*back.signals[0].full_dist, *f.signals[0].full_dist);
  SaveSignals(dir / "t.jsonl", back);
  EXPECT_EQ(testing::ReadFile(dir / "s.jsonl"), testing::ReadFile(dir / "t.jsonl"));
}

TEST(ValidateTest, OutOfRangeNamesSampleAndPosition) {
  SignalFile f = SmallFile();
  f.header.has_full_dist = false;
  f.signals[0].full_dist.reset();
  f.signals[0].positions[1].p_gold = 1.01;
  const ValidationReport r = ValidateSignalValues(f);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].sample_id, 0u);
  EXPECT_EQ(r.violations[0].position, std::optional<std::size_t>(1));
  EXPECT_NE(r.Summary().find("sample 0 position 1"), std::string::npos);
  EXPECT_THROW(RequireValid(r, "signals"), Error);
}

TEST(ValidateTest, NonFiniteAndDistMismatch) {
  SignalFile f = SmallFile();
  f.signals[0].positions[0].entropy_norm = std::nan("");
  (*f.signals[0].full_dist)[1] = {0.5, 0.5};
  EXPECT_EQ(ValidateSignalValues(f).violations.size(), 2u);
}

TEST(ValidateTest, Seq2EditSlotCount) {
  EncodedCorpus corpus;
  corpus.vocab_hash = 42;
  corpus.num_tags = 3;
  corpus.samples.push_back({0, {"a", "b"}, {"a", "b"}, {0, 0, 0}});
  SignalFile f = SmallFile();
  const ValidationReport r = ValidateSignals(f, corpus);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].message.find("2 positions for 3 tag slots"), std::string::npos);

  corpus.samples[0] = {0, {"a"}, {"a"}, {0, 0}};
  EXPECT_TRUE(ValidateSignals(f, corpus).ok());
  corpus.vocab_hash = 43;
  EXPECT_FALSE(ValidateSignals(f, corpus).ok());
}

// The seq2seq checks serve externally exported files.
TEST(ValidateTest, Seq2SeqPositions) {
  const Corpus corpus = MakeCorpus({{"a b", "a c"}});
  SignalFile f = SmallFile();
  f.header.manner = Manner::kSeq2Seq;
  EXPECT_TRUE(ValidateSignals(f, corpus).ok());
  f.header.includes_eos = true;
  EXPECT_FALSE(ValidateSignals(f, corpus).ok());
  f.signals[0].positions.push_back({1.0, 0.0});
  f.signals[0].full_dist->push_back({1.0, 0.0, 0.0});
  EXPECT_TRUE(ValidateSignals(f, corpus).ok());

  EncodedCorpus encoded;
  EXPECT_FALSE(ValidateSignals(f, encoded).ok());
  f.header.manner = Manner::kSeq2Edit;
  EXPECT_FALSE(ValidateSignals(f, corpus).ok());
}

TEST(ValidateTest, IdOrder) {
  const Corpus corpus = MakeCorpus({{"a", "a"}, {"b", "b"}});
  SignalFile f;
  f.header.vocab_size = 2;
  f.header.manner = Manner::kSeq2Seq;
  f.signals = {{1, {{1.0, 0.0}}, std::nullopt}, {0, {{1.0, 0.0}}, std::nullopt}};
  EXPECT_EQ(ValidateSignals(f, corpus).violations.size(), 2u);
}

Tagger FixtureTagger(const EncodedCorpus& corpus, const std::vector<double>& probs) {
  ModelConfig mc;
  mc.embed_dim = 2;
  mc.hidden_dim = 2;
  mc.window = 1;
  mc.tag_vocab_size = static_cast<int>(probs.size());
  Tagger t(mc, TokenVocab::Build(corpus), corpus.vocab_hash);
  t.params().value.SetZero();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    t.params().value.output_b[static_cast<long>(k)] = std::log(probs[k]);
  }
  return t;
}

EncodedCorpus ThreeTagCorpus() {
  EncodedCorpus c;
  c.vocab_hash = 7;
  c.num_tags = 3;
  c.samples.push_back({0, {"x", "y"}, {"x", "y"}, {0, 0, 0}});
  c.samples.push_back({1, {"z"}, {}, {0, 1}});
  return c;
}

TEST(GenerateSignalsTest, UniformModel) {
  const EncodedCorpus c = ThreeTagCorpus();
  const Tagger t = FixtureTagger(c, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const SignalFile f = GenerateSignals(t, c, false);
  EXPECT_TRUE(ValidateSignals(f, c).ok());
  for (const TeacherSignal& s : f.signals) {
    for (const PositionStat& p : s.positions) {
      EXPECT_NEAR(p.p_gold, 1.0 / 3, 1e-15);
      EXPECT_NEAR(p.entropy_norm, 1.0, 1e-15);
    }
  }
}

TEST(GenerateSignalsTest, KnownSoftmax) {
  const EncodedCorpus c = ThreeTagCorpus();
  const Tagger t = FixtureTagger(c, {0.9, 0.05, 0.05});
  const SignalFile f = GenerateSignals(t, c, true, 2);
  ASSERT_TRUE(ValidateSignals(f, c).ok()) << ValidateSignals(f, c).Summary();
  EXPECT_NEAR(f.signals[0].positions[1].p_gold, 0.9, 1e-12);
  EXPECT_NEAR(f.signals[0].positions[1].entropy_norm, 0.3589962496465303, 1e-12);
  EXPECT_NEAR(f.signals[1].positions[1].p_gold, 0.05, 1e-12);
  ASSERT_TRUE(f.signals[1].full_dist.has_value());
  EXPECT_NEAR((*f.signals[1].full_dist)[0][2], 0.05, 1e-12);
}

TEST(GenerateSignalsTest, RejectsForeignVocab) {
  EncodedCorpus c = ThreeTagCorpus();
  const Tagger t = FixtureTagger(c, {0.9, 0.05, 0.05});
  c.vocab_hash = 8;
  EXPECT_THROW(GenerateSignals(t, c, false), Error);
}

}  // namespace
}  // namespace gecw
