#include "gecw/trainer.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gecw/error.h"
#include "gecw/synth.h"
#include "gradcheck.h"
#include "test_util.h"

namespace gecw {
namespace {

using testing::MakeCorpus;

// Two samples, three tags, identical vocab hash 5.
EncodedCorpus Fixture() {
  EncodedCorpus c;
  c.name = "fixture";
  c.vocab_hash = 5;
  c.num_tags = 3;
  c.samples.push_back({0, {"a", "b"}, {}, {0, 1, 2}});
  c.samples.push_back({1, {"c"}, {}, {0, 0}});
  return c;
}

// A model that ignores its input and always outputs `probs`.
Tagger ConstantTagger(const EncodedCorpus& c, const std::vector<double>& probs) {
  ModelConfig mc;
  mc.embed_dim = 2;
  mc.hidden_dim = 2;
  mc.window = 1;
  mc.tag_vocab_size = static_cast<int>(probs.size());
  Tagger t(mc, TokenVocab::Build(c), c.vocab_hash);
  t.params().value.SetZero();
  for (std::size_t k = 0; k < probs.size(); ++k) {
    t.params().value.output_b[static_cast<long>(k)] = std::log(probs[k]);
  }
  return t;
}

std::vector<std::size_t> All(const TrainingData& d) {
  std::vector<std::size_t> v(d.size());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

bool SameParams(const Parameters& a, const Parameters& b) {
  return a.embedding == b.embedding && a.hidden_w == b.hidden_w && a.hidden_b == b.hidden_b &&
         a.output_w == b.output_w && a.output_b == b.output_b;
}

double MaxAbsDiff(const Parameters& a, const Parameters& b) {
  double m = 0;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k) {
    for (std::size_t i = 0; i < ta[k].size(); ++i) m = std::max(m, std::abs(ta[k][i] - tb[k][i]));
  }
  return m;
}

TEST(WeightingModeTest, ParseAndPrint) {
  for (WeightingMode m : kAllModes) EXPECT_EQ(ParseWeightingMode(ToString(m)), m);
  EXPECT_THROW(ParseWeightingMode("both"), Error);
}

TEST(LossTest, WeightedMatchesSpreadsheet) {
  const EncodedCorpus c = Fixture();
  const Tagger t = ConstantTagger(c, {0.5, 0.3, 0.2});
  TrainingData data(c, t.tokens());
  data.AttachWeights({{0, 0.8, {0.9, 0.5, 0.1}}, {1, 0.3, {1.0, 0.6}}});
  const auto batch = All(data);
  const LossResult r =
      LossWeighted(t.params().value, t.config(), data, batch, true, true, nullptr);
  EXPECT_EQ(r.positions, 5u);
  EXPECT_NEAR(r.loss, 0.288424154279407359663567555903, 1e-9);
  EXPECT_NEAR(LossNll(t.params().value, t.config(), data, batch, nullptr).loss,
              0.978570451687974459095040383072, 1e-9);
}

TEST(LossTest, KdMatchesSpreadsheet) {
  const EncodedCorpus c = Fixture();
  const Tagger t = ConstantTagger(c, {0.5, 0.3, 0.2});
  TrainingData data(c, t.tokens());
  SignalFile s;
  s.header = {3, c.vocab_hash, Manner::kSeq2Edit, true, false};
  const std::vector<double> q = {0.6, 0.3, 0.1};
  const double h = EntropyNorm(q, 3);
  for (const EncodedSample& e : c.samples) {
    TeacherSignal sig;
    sig.sample_id = e.id;
    sig.full_dist.emplace();
    for (int tag : e.tags) {
      sig.positions.push_back({q[tag], h});
      sig.full_dist->push_back(q);
    }
    s.signals.push_back(sig);
  }
  data.AttachTeacher(s);
  const auto batch = All(data);
  const LossResult r = LossKd(t.params().value, t.config(), data, batch, 0.25, nullptr);
  EXPECT_NEAR(r.loss, 0.948160568579862130446689399413, 1e-9);
}

struct RandomSetup {
  EncodedCorpus corpus;
  TokenVocab tokens;
  ModelConfig config;
  Parameters params;
  std::vector<SampleWeights> weights;
  SignalFile signals;
};

RandomSetup MakeRandom(std::uint64_t seed, int samples, int dims) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomSetup s;
  const int tags = 2 + static_cast<int>(rng() % 5);
  s.corpus.vocab_hash = 1;
  s.corpus.num_tags = static_cast<std::size_t>(tags);
  for (int i = 0; i < samples; ++i) {
    EncodedSample e;
    e.id = static_cast<std::size_t>(i);
    const int m = 1 + static_cast<int>(rng() % 6);
    for (int j = 0; j < m; ++j) e.source.push_back("t" + std::to_string(rng() % 7));
    for (int j = 0; j <= m; ++j) e.tags.push_back(static_cast<int>(rng() % tags));
    s.corpus.samples.push_back(e);
  }
  s.tokens = TokenVocab::Build(s.corpus);
  s.config.embed_dim = dims;
  s.config.hidden_dim = dims;
  s.config.window = 1 + static_cast<int>(rng() % 2);
  s.config.token_vocab_size = s.tokens.size();
  s.config.tag_vocab_size = tags;
  s.config.seed = seed;
  s.params = Parameters::Random(s.config);
  // Larger weights than the default init so the check exercises curvature.
  s.params.AddScaled(s.params, 9.0);
  s.signals.header = {tags, 1, Manner::kSeq2Edit, true, false};
  for (const EncodedSample& e : s.corpus.samples) {
    SampleWeights w;
    w.sample_id = e.id;
    w.w_sent = unit(rng);
    TeacherSignal sig;
    sig.sample_id = e.id;
    sig.full_dist.emplace();
    for (std::size_t j = 0; j < e.tags.size(); ++j) {
      w.w_token.push_back(unit(rng));
      std::vector<double> q(tags);
      double sum = 0;
      for (double& x : q) sum += (x = unit(rng) + 1e-3);
      for (double& x : q) x /= sum;
      sig.positions.push_back({q[e.tags[j]], EntropyNorm(q, tags)});
      sig.full_dist->push_back(q);
    }
    s.weights.push_back(w);
    s.signals.signals.push_back(sig);
  }
  return s;
}

TEST(LossTest, UnitWeightsReduceToNllExactly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomSetup s = MakeRandom(seed, 8, 6);
    for (SampleWeights& w : s.weights) {
      w.w_sent = 1.0;
      std::fill(w.w_token.begin(), w.w_token.end(), 1.0);
    }
    TrainingData data(s.corpus, s.tokens);
    data.AttachWeights(s.weights);
    const auto batch = All(data);
    Parameters g1 = Parameters::Zeros(s.config);
    Parameters g2 = Parameters::Zeros(s.config);
    const LossResult a = LossNll(s.params, s.config, data, batch, &g1);
    const LossResult b = LossWeighted(s.params, s.config, data, batch, true, true, &g2);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_TRUE(SameParams(g1, g2));
  }
}

TEST(LossTest, ZeroSentenceWeightContributesNothing) {
  RandomSetup s = MakeRandom(3, 4, 5);
  s.weights[2].w_sent = 0.0;
  TrainingData data(s.corpus, s.tokens);
  data.AttachWeights(s.weights);
  const std::vector<std::size_t> only = {2};
  Parameters g = Parameters::Zeros(s.config);
  const LossResult r = LossWeighted(s.params, s.config, data, only, true, true, &g);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(MaxAbsDiff(g, Parameters::Zeros(s.config)), 0.0);
}

TEST(LossTest, GradientIsLinearInTermWeight) {
  RandomSetup s = MakeRandom(4, 3, 5);
  TrainingData data(s.corpus, s.tokens);
  const std::vector<std::size_t> only = {1};
  s.weights[1].w_sent = 0.25;
  data.AttachWeights(s.weights);
  Parameters g1 = Parameters::Zeros(s.config);
  LossWeighted(s.params, s.config, data, only, true, true, &g1);
  s.weights[1].w_sent = 0.5;
  data.AttachWeights(s.weights);
  Parameters g2 = Parameters::Zeros(s.config);
  LossWeighted(s.params, s.config, data, only, true, true, &g2);
  g1.AddScaled(g1, 1.0);
  EXPECT_TRUE(SameParams(g1, g2));
}

TEST(LossTest, KdBoundaries) {
  RandomSetup s = MakeRandom(5, 6, 5);
  TrainingData data(s.corpus, s.tokens);
  data.AttachTeacher(s.signals);
  const auto batch = All(data);
  Parameters g1 = Parameters::Zeros(s.config);
  Parameters g2 = Parameters::Zeros(s.config);
  const LossResult nll = LossNll(s.params, s.config, data, batch, &g1);
  const LossResult kd = LossKd(s.params, s.config, data, batch, 1.0, &g2);
  EXPECT_EQ(nll.loss, kd.loss);
  EXPECT_TRUE(SameParams(g1, g2));

  // A one-hot teacher on the gold tag makes the soft term equal the NLL.
  for (std::size_t i = 0; i < s.signals.signals.size(); ++i) {
    auto& dist = *s.signals.signals[i].full_dist;
    for (std::size_t j = 0; j < dist.size(); ++j) {
      std::fill(dist[j].begin(), dist[j].end(), 0.0);
      dist[j][s.corpus.samples[i].tags[j]] = 1.0;
      s.signals.signals[i].positions[j] = {1.0, 0.0};
    }
  }
  TrainingData onehot(s.corpus, s.tokens);
  onehot.AttachTeacher(s.signals);
  for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
    EXPECT_NEAR(LossKd(s.params, s.config, onehot, batch, alpha, nullptr).loss, nll.loss, 1e-12);
  }
}

TEST(LossTest, MissingAttachmentsThrow) {
  RandomSetup s = MakeRandom(6, 3, 4);
  TrainingData data(s.corpus, s.tokens);
  const auto batch = All(data);
  EXPECT_THROW(LossWeighted(s.params, s.config, data, batch, true, true, nullptr), Error);
  EXPECT_THROW(LossKd(s.params, s.config, data, batch, 0.5, nullptr), Error);
  s.weights.pop_back();
  EXPECT_THROW(data.AttachWeights(s.weights), Error);
  s.signals.header.has_full_dist = false;
  for (auto& sig : s.signals.signals) sig.full_dist.reset();
  EXPECT_THROW(data.AttachTeacher(s.signals), Error);
}

TEST(LossTest, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    const RandomSetup s = MakeRandom(seed, 4, 4);
    TrainingData data(s.corpus, s.tokens);
    data.AttachWeights(s.weights);
    data.AttachTeacher(s.signals);
    const auto batch = All(data);
    const auto weighted = testing::CheckGradient(
        s.params, s.config, [&](const Parameters& p, Parameters* g) {
          return LossWeighted(p, s.config, data, batch, true, true, g).loss;
        });
    EXPECT_LE(weighted.max_rel_error, 1e-4) << "seed " << seed << " " << weighted.worst;
    const auto kd = testing::CheckGradient(s.params, s.config,
                                           [&](const Parameters& p, Parameters* g) {
                                             return LossKd(p, s.config, data, batch, 0.4, g).loss;
                                           });
    EXPECT_LE(kd.max_rel_error, 1e-4) << "seed " << seed << " " << kd.worst;
  }
}

TEST(LossTest, WorkersAgreeWithSerial) {
  const RandomSetup s = MakeRandom(20, 13, 5);
  TrainingData data(s.corpus, s.tokens);
  data.AttachWeights(s.weights);
  const auto batch = All(data);
  Parameters g1 = Parameters::Zeros(s.config);
  const double serial = LossWeighted(s.params, s.config, data, batch, true, true, &g1).loss;
  for (int workers : {2, 3, 8, 32}) {
    Parameters g2 = Parameters::Zeros(s.config);
    Parameters g3 = Parameters::Zeros(s.config);
    const double a = LossWeighted(s.params, s.config, data, batch, true, true, &g2, workers).loss;
    const double b = LossWeighted(s.params, s.config, data, batch, true, true, &g3, workers).loss;
    EXPECT_NEAR(a, serial, 1e-12);
    EXPECT_LE(MaxAbsDiff(g1, g2), 1e-12);
    EXPECT_EQ(a, b);
    EXPECT_TRUE(SameParams(g2, g3));
  }
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  ModelConfig mc;
  mc.embed_dim = 1;
  mc.hidden_dim = 1;
  mc.window = 0;
  mc.token_vocab_size = 3;
  mc.tag_vocab_size = 2;
  TrainConfig tc;
  tc.learning_rate = 0.01;
  AdamOptimizer adam(mc, tc);
  Parameters value = Parameters::Zeros(mc);
  Parameters grad = Parameters::Zeros(mc);
  grad.output_b << 2.0, -0.5;
  adam.Step(value, grad);
  EXPECT_EQ(adam.steps(), 1);
  EXPECT_NEAR(value.output_b[0], -0.01, 1e-10);
  EXPECT_NEAR(value.output_b[1], 0.01, 1e-9);
  EXPECT_EQ(value.hidden_b[0], 0.0);
}

struct ToyTask {
  Corpus corpus;
  TagVocab vocab;
  EncodedCorpus encoded;
  TokenVocab tokens;
};

ToyTask MakeToy(std::size_t n, std::uint64_t seed) {
  SynthConfig sc;
  sc.num_samples = n;
  sc.seed = seed;
  sc.error_free_rate = 0.2;
  ToyTask t;
  t.corpus = GenerateSynthetic(sc).clean;
  t.vocab = BuildVocab(t.corpus, 1000);
  t.encoded = EncodeCorpus(t.corpus, t.vocab, OovPolicy::kDropSample);
  t.tokens = TokenVocab::Build(t.encoded);
  return t;
}

ModelConfig ToyModel(const ToyTask& t, std::uint64_t seed) {
  ModelConfig mc;
  mc.embed_dim = 16;
  mc.hidden_dim = 32;
  mc.window = 2;
  mc.tag_vocab_size = static_cast<int>(t.vocab.size());
  mc.seed = seed;
  return mc;
}

TEST(TrainTest, OverfitsTenSamples) {
  const ToyTask t = MakeToy(10, 3);
  ASSERT_EQ(t.encoded.samples.size(), 10u);
  TrainingData data(t.encoded, t.tokens);
  ModelConfig mc;
  mc.tag_vocab_size = static_cast<int>(t.vocab.size());
  TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 1e-2;
  const TrainResult r = Train(Tagger(mc, t.tokens, t.vocab.hash()), data, data, tc);
  EXPECT_LT(r.best_dev_loss, 0.01);
  // The memorized tagger reproduces its own training tags.
  for (const EncodedSample& s : t.encoded.samples) {
    EXPECT_EQ(r.best.PredictTags(s.source), s.tags);
  }
}

TEST(TrainTest, SelectsMinimumDevLoss) {
  const ToyTask t = MakeToy(40, 4);
  const ToyTask d = MakeToy(15, 5);
  const EncodedCorpus dev = EncodeCorpus(d.corpus, t.vocab, OovPolicy::kMapKeep);
  TrainingData train(t.encoded, t.tokens);
  TrainingData devd(dev, t.tokens);
  TrainConfig tc;
  tc.epochs = 15;
  tc.batch_size = 8;
  tc.learning_rate = 3e-2;
  const TrainResult r = Train(Tagger(ToyModel(t, 1), t.tokens, t.vocab.hash()), train, devd, tc);
  ASSERT_EQ(r.log.size(), 15u);
  double best = INFINITY;
  int best_epoch = 0;
  for (const EpochLog& e : r.log) {
    if (e.dev_loss < best) {
      best = e.dev_loss;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.best_dev_loss, best);
  EXPECT_EQ(r.best_epoch, best_epoch);
  std::vector<std::size_t> all(dev.samples.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(LossNll(r.best.params().value, r.best.config(), devd, all, nullptr).loss, best);
}

TEST(TrainTest, SameSeedGivesIdenticalCheckpoint) {
  testing::TempDir dir;
  const ToyTask t = MakeToy(30, 6);
  TrainingData data(t.encoded, t.tokens);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 7;
  tc.shuffle_seed = 11;
  for (int run = 0; run < 2; ++run) {
    Train(Tagger(ToyModel(t, 2), t.tokens, t.vocab.hash()), data, data, tc)
        .best.Save(dir / ("m" + std::to_string(run)));
  }
  EXPECT_EQ(testing::ReadFile(dir / "m0"), testing::ReadFile(dir / "m1"));
  tc.shuffle_seed = 12;
  Train(Tagger(ToyModel(t, 2), t.tokens, t.vocab.hash()), data, data, tc).best.Save(dir / "m2");
  EXPECT_NE(testing::ReadFile(dir / "m0"), testing::ReadFile(dir / "m2"));
}

TEST(TrainTest, RejectsMismatchedVocab) {
  const ToyTask t = MakeToy(5, 7);
  TrainingData data(t.encoded, t.tokens);
  EXPECT_THROW(Train(Tagger(ToyModel(t, 1), t.tokens, t.vocab.hash() + 1), data, data, {}),
               Error);
  TrainConfig bad;
  bad.epochs = 0;
  EXPECT_THROW(Train(Tagger(ToyModel(t, 1), t.tokens, t.vocab.hash()), data, data, bad), Error);
}

// With a uniform teacher every weight is the same constant, so mixed training
// only rescales gradients. Adam cancels the scale except through its eps, and
// eps/(scale * |g|) is large here (scale ~ 1e-5), so eps is taken negligible.
TEST(TrainTest, UniformTeacherTracksUnweightedTraining) {
  const ToyTask t = MakeToy(20, 8);
  ModelConfig mc = ToyModel(t, 3);
  Tagger uniform(mc, t.tokens, t.vocab.hash());
  uniform.params().value.SetZero();
  const SignalFile signals = GenerateSignals(uniform, t.encoded, false);
  const auto weights = ComputeWeights(signals, WeightConfig{});
  for (const SampleWeights& w : weights) EXPECT_EQ(w.w_sent, std::exp(-9.0));

  TrainingData data(t.encoded, t.tokens);
  data.AttachWeights(weights);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.adam_eps = 1e-30;
  const Tagger init(mc, t.tokens, t.vocab.hash());
  mc = init.config();
  Tagger a = init, b = init;
  AdamOptimizer opt_a(mc, tc), opt_b(mc, tc);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  for (int step = 0; step < 50; ++step) {
    a.params().grad.SetZero();
    b.params().grad.SetZero();
    LossNll(a.params().value, mc, data, all, &a.params().grad);
    LossWeighted(b.params().value, mc, data, all, true, true, &b.params().grad);
    opt_a.Step(a.params().value, a.params().grad);
    opt_b.Step(b.params().value, b.params().grad);
  }
  const double diff = MaxAbsDiff(a.params().value, b.params().value);
  EXPECT_LE(diff, 1e-3);
  EXPECT_GT(MaxAbsDiff(a.params().value, init.params().value), 1e-2);
}

TEST(CorrectTest, StartSlotDeleteReadsAsKeep) {
  const ToyTask t = MakeToy(5, 9);
  ModelConfig mc = ToyModel(t, 1);
  Tagger tagger(mc, t.tokens, t.vocab.hash());
  tagger.params().value.SetZero();
  // Favour DELETE (index 1) everywhere.
  tagger.params().value.output_b[1] = 1.0;
  const Tokens src = {"he", "goes"};
  EXPECT_TRUE(CorrectSentence(tagger, t.vocab, src).empty());
  tagger.params().value.output_b[1] = 0.0;
  EXPECT_EQ(CorrectSentence(tagger, t.vocab, src), src);
  TagVocab other = BuildVocab(MakeCorpus({{"a", "b"}}), 5);
  EXPECT_THROW(CorrectAll(tagger, other, {src}), Error);
}

AblationSetup MakeAblation(const ToyTask& t, const SignalFile& signals,
                           const std::vector<std::uint64_t>& seeds, int epochs) {
  AblationSetup a;
  a.vocab = &t.vocab;
  a.train = &t.encoded;
  a.dev = &t.encoded;
  a.signals = &signals;
  for (const ParallelSample& s : t.corpus.samples) a.eval_sources.push_back(s.source);
  a.eval_gold = GoldFromParallel(t.corpus);
  a.model = ToyModel(t, 0);
  a.train_config.epochs = epochs;
  a.train_config.batch_size = 8;
  a.train_config.learning_rate = 2e-2;
  a.seeds = seeds;
  return a;
}

TEST(AblationTest, OneSeedGivesFiveRows) {
  const ToyTask t = MakeToy(20, 10);
  Tagger teacher(ToyModel(t, 5), t.tokens, t.vocab.hash());
  const SignalFile signals = GenerateSignals(teacher, t.encoded, true);
  const AblationReport r = RunAblation(MakeAblation(t, signals, {1}, 2));
  ASSERT_EQ(r.rows.size(), 5u);
  ASSERT_EQ(r.runs.size(), 5u);
  for (const AblationRow& row : r.rows) {
    for (double v : {row.p_mean, row.r_mean, row.f_mean}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(row.f_sd, 0.0);
  }
  const std::string tsv = r.ToTsv();
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 6);
  EXPECT_NE(r.ToText().find("mixed"), std::string::npos);
  EXPECT_THROW(r.row(static_cast<WeightingMode>(99)), Error);
}

TEST(AblationTest, CleanCorpusIsMemorizedByNoneAndMixed) {
  const ToyTask t = MakeToy(30, 12);
  // A well-trained teacher keeps the weights informative.
  TrainingData data(t.encoded, t.tokens);
  TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 8;
  tc.learning_rate = 2e-2;
  const TrainResult teacher =
      Train(Tagger(ToyModel(t, 7), t.tokens, t.vocab.hash()), data, data, tc);
  const SignalFile signals = GenerateSignals(teacher.best, t.encoded, true);
  AblationSetup a = MakeAblation(t, signals, {1}, 150);
  a.modes = {WeightingMode::kNone, WeightingMode::kMixed};
  const AblationReport r = RunAblation(a);
  EXPECT_EQ(r.row(WeightingMode::kNone).f_mean, 1.0);
  EXPECT_EQ(r.row(WeightingMode::kMixed).f_mean, 1.0);
}

}  // namespace
}  // namespace gecw
