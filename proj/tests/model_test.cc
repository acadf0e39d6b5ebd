#include "gecw/model.h"

#include <gtest/gtest.h>

#include <random>

#include "gecw/error.h"
#include "gradcheck.h"
#include "test_util.h"

namespace gecw {
namespace {

ModelConfig TinyConfig(int tags = 5, std::uint64_t seed = 1) {
  ModelConfig mc;
  mc.embed_dim = 4;
  mc.hidden_dim = 6;
  mc.window = 2;
  mc.token_vocab_size = 8;
  mc.tag_vocab_size = tags;
  mc.seed = seed;
  return mc;
}

TEST(TokenVocabTest, ReservedIdsAndSortedTokens) {
  const TokenVocab v = TokenVocab::Build({{"b", "a"}, {"c", "a"}});
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "<s>", "a", "b", "c"}));
  EXPECT_EQ(v.Id("a"), 3);
  EXPECT_EQ(v.Id("zzz"), TokenVocab::kUnk);
  EXPECT_EQ(v.Encode({"c", "q"}), (std::vector<int>{5, 1}));
  EXPECT_EQ(TokenVocab::FromList(v.tokens()).hash(), v.hash());
  EXPECT_NE(TokenVocab::Build(std::vector<Tokens>{{"a"}}).hash(), v.hash());
}

TEST(ModelConfigTest, Validation) {
  ModelConfig mc = TinyConfig();
  EXPECT_NO_THROW(mc.Validate());
  mc.tag_vocab_size = 1;
  EXPECT_THROW(mc.Validate(), Error);
  mc = TinyConfig();
  mc.embed_dim = 0;
  EXPECT_THROW(mc.Validate(), Error);
  mc = TinyConfig();
  mc.window = -1;
  EXPECT_THROW(mc.Validate(), Error);
}

TEST(ParametersTest, ShapesAndInitRange) {
  const ModelConfig mc = TinyConfig();
  const Parameters p = Parameters::Random(mc);
  EXPECT_EQ(p.embedding.rows(), 8);
  EXPECT_EQ(p.embedding.cols(), 4);
  EXPECT_EQ(p.hidden_w.rows(), 6);
  EXPECT_EQ(p.hidden_w.cols(), 20);
  EXPECT_EQ(p.output_w.rows(), 5);
  EXPECT_EQ(p.count(), 8u * 4 + 6 * 20 + 6 + 5 * 6 + 5);
  for (const auto& t : p.tensors()) {
    for (double x : t) {
      EXPECT_GE(x, -0.1);
      EXPECT_LE(x, 0.1);
    }
  }
}

TEST(ParametersTest, SeededInitIsBitIdentical) {
  const Parameters a = Parameters::Random(TinyConfig(5, 9));
  const Parameters b = Parameters::Random(TinyConfig(5, 9));
  const Parameters c = Parameters::Random(TinyConfig(5, 10));
  EXPECT_TRUE(a.embedding == b.embedding && a.hidden_w == b.hidden_w &&
              a.hidden_b == b.hidden_b && a.output_w == b.output_w &&
              a.output_b == b.output_b);
  EXPECT_FALSE(a.embedding == c.embedding);
}

TEST(ForwardTest, ZeroParamsGiveUniformSoftmax) {
  const ModelConfig mc = TinyConfig();
  const Parameters p = Parameters::Zeros(mc);
  const std::vector<int> ids = {3, 4};
  for (int pos = 0; pos <= 2; ++pos) {
    const ForwardCache c = Forward(p, mc, ids, pos);
    EXPECT_TRUE(c.logits.isZero(0.0));
    const Vector s = Softmax(c.logits);
    for (int k = 0; k < s.size(); ++k) EXPECT_DOUBLE_EQ(s[k], 0.2);
  }
}

TEST(ForwardTest, WindowPadding) {
  const ModelConfig mc = TinyConfig();
  const Parameters p = Parameters::Random(mc);
  const std::vector<int> one = {5};
  const ForwardCache at_token = Forward(p, mc, one, 1);
  EXPECT_EQ(at_token.context, (std::vector<int>{0, 0, 5, 0, 0}));
  const ForwardCache at_start = Forward(p, mc, one, 0);
  EXPECT_EQ(at_start.context, (std::vector<int>{0, 0, 2, 5, 0}));
  EXPECT_EQ(at_token.input.size(), 20);
  EXPECT_EQ(at_token.input.segment(8, 4), p.embedding.row(5).transpose());
  EXPECT_THROW(Forward(p, mc, one, 2), Error);
  EXPECT_THROW(Forward(p, mc, one, -1), Error);
}

TEST(ForwardTest, DeterministicLogits) {
  const ModelConfig mc = TinyConfig();
  const std::vector<int> ids = {3, 4, 7};
  const Vector a = Forward(Parameters::Random(mc), mc, ids, 2).logits;
  const Vector b = Forward(Parameters::Random(mc), mc, ids, 2).logits;
  EXPECT_EQ(a, b);
}

TEST(SoftmaxTest, SumsToOneAndMatchesLogSoftmax) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector z(1 + static_cast<int>(rng() % 30));
    for (int k = 0; k < z.size(); ++k) z[k] = normal(rng);
    const Vector p = Softmax(z);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    const Vector lp = LogSoftmax(z);
    for (int k = 0; k < z.size(); ++k) {
      if (p[k] > 1e-300) EXPECT_NEAR(std::log(p[k]), lp[k], 1e-9);
    }
  }
}

TEST(ArgmaxTest, FirstMaximumWins) {
  Vector v(4);
  v << 1.0, 3.0, 3.0, 2.0;
  EXPECT_EQ(Argmax(v), 1);
  EXPECT_EQ(Argmax(Vector::Zero(5)), 0);
}

TEST(BackwardTest, ZeroUpstreamLeavesAccumulators) {
  const ModelConfig mc = TinyConfig();
  const Parameters p = Parameters::Random(mc);
  Parameters grad = Parameters::Random(TinyConfig(5, 77));
  const Parameters before = grad;
  const std::vector<int> ids = {3, 4};
  Backward(p, Forward(p, mc, ids, 1), Vector::Zero(5), grad);
  EXPECT_EQ(grad.embedding, before.embedding);
  EXPECT_EQ(grad.hidden_w, before.hidden_w);
  EXPECT_EQ(grad.hidden_b, before.hidden_b);
  EXPECT_EQ(grad.output_w, before.output_w);
  EXPECT_EQ(grad.output_b, before.output_b);
  EXPECT_THROW(Backward(p, ForwardCache{}, Vector::Zero(5), grad), Error);
}

// -sum over slots of ln p(gold) for one 3-token sentence.
double SentenceNll(const Parameters& p, const ModelConfig& mc, const std::vector<int>& ids,
                   const std::vector<int>& gold, Parameters* grad) {
  double loss = 0;
  for (int pos = 0; pos <= static_cast<int>(ids.size()); ++pos) {
    const ForwardCache c = Forward(p, mc, ids, pos);
    const Vector lp = LogSoftmax(c.logits);
    loss -= lp[gold[pos]];
    if (grad != nullptr) {
      Vector d = lp.array().exp();
      d[gold[pos]] -= 1.0;
      Backward(p, c, d, *grad);
    }
  }
  return loss;
}

TEST(BackwardTest, FiniteDifferenceOnThreeTokens) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const ModelConfig mc = TinyConfig(5, seed);
    const Parameters p = Parameters::Random(mc);
    const std::vector<int> ids = {3, 7, 3};
    const std::vector<int> gold = {0, 2, 4, 1};
    const auto r = testing::CheckGradient(p, mc, [&](const Parameters& q, Parameters* g) {
      return SentenceNll(q, mc, ids, gold, g);
    });
    EXPECT_EQ(r.checked, p.count());
    EXPECT_LE(r.max_rel_error, 1e-4) << "seed " << seed << " worst " << r.worst;
  }
}

TEST(TaggerTest, ZeroParamsPredictKeep) {
  Tagger t(TinyConfig(), TokenVocab::Build(std::vector<Tokens>{{"a", "b"}}), 1);
  t.params().value.SetZero();
  EXPECT_EQ(t.PredictTags({"a", "b", "zz"}), (std::vector<int>{0, 0, 0, 0}));
}

TEST(TaggerTest, OutputLengthIsSlotCount) {
  const Tagger t(TinyConfig(), TokenVocab::Build(std::vector<Tokens>{{"a", "b"}}), 1);
  for (std::size_t m = 1; m < 8; ++m) {
    EXPECT_EQ(t.PredictTags(Tokens(m, "a")).size(), m + 1);
  }
}

TEST(TaggerTest, CheckpointRoundTripIsBitExact) {
  testing::TempDir dir;
  const Tagger t(TinyConfig(5, 3), TokenVocab::Build({{"x", "y", "z"}}), 0xfeed);
  t.Save(dir / "m.ckpt");
  const Tagger back = Tagger::Load(dir / "m.ckpt");
  EXPECT_EQ(back.config(), t.config());
  EXPECT_EQ(back.tokens().tokens(), t.tokens().tokens());
  EXPECT_EQ(back.tag_vocab_hash(), 0xfeedu);
  EXPECT_EQ(back.params().value.hidden_w, t.params().value.hidden_w);
  EXPECT_EQ(back.params().value.embedding, t.params().value.embedding);
  back.Save(dir / "n.ckpt");
  EXPECT_EQ(testing::ReadFile(dir / "m.ckpt"), testing::ReadFile(dir / "n.ckpt"));

  std::string bytes = testing::ReadFile(dir / "m.ckpt");
  bytes[0] = 'X';
  testing::WriteFile(dir / "bad.ckpt", bytes);
  EXPECT_THROW(Tagger::Load(dir / "bad.ckpt"), Error);
  testing::WriteFile(dir / "short.ckpt", testing::ReadFile(dir / "m.ckpt").substr(0, 60));
  EXPECT_THROW(Tagger::Load(dir / "short.ckpt"), Error);
}

}  // namespace
}  // namespace gecw
