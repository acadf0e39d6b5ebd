#include "gecw/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "gecw/error.h"
#include "gecw/hash.h"
#include "gecw/parallel.h"
#include "json.hpp"
#include "json_io.h"

namespace gecw {
namespace {

using json = nlohmann::json;

struct TermOutput {
  double loss = 0.0;
  Vector dlogits;  // gradient of `loss` w.r.t. the logits
};

// Sums per-slot loss terms over a batch. term(sample_index, slot, logits)
// returns the slot's contribution; the result and gradients are divided by the
// number of slots.
template <typename TermFn>
LossResult BatchLoss(const Parameters& params, const ModelConfig& config,
                     const TrainingData& data, std::span<const std::size_t> batch,
                     Parameters* grad, int workers, TermFn&& term) {
  LossResult result;
  for (std::size_t idx : batch) result.positions += data.sample(idx).tags.size();
  if (result.positions == 0) return result;
  const double scale = 1.0 / static_cast<double>(result.positions);

  auto run_block = [&](std::size_t begin, std::size_t end, Parameters* g) {
    double sum = 0.0;
    for (std::size_t b = begin; b < end; ++b) {
      const std::size_t idx = batch[b];
      const std::vector<int>& ids = data.ids(idx);
      const std::size_t slots = data.sample(idx).tags.size();
      for (std::size_t pos = 0; pos < slots; ++pos) {
        const ForwardCache cache = Forward(params, config, ids, static_cast<int>(pos));
        TermOutput out = term(idx, pos, cache.logits, g != nullptr);
        sum += out.loss;
        if (g != nullptr) Backward(params, cache, out.dlogits * scale, *g);
      }
    }
    return sum;
  };

  const std::size_t k = std::min<std::size_t>(std::max(workers, 1), batch.size());
  if (k <= 1) {
    result.loss = run_block(0, batch.size(), grad) * scale;
    return result;
  }
  std::vector<double> sums(k, 0.0);
  std::vector<Parameters> grads;
  if (grad != nullptr) grads.assign(k, Parameters::Zeros(config));
  ParallelFor(k, static_cast<int>(k), [&](std::size_t w) {
    const std::size_t begin = batch.size() * w / k;
    const std::size_t end = batch.size() * (w + 1) / k;
    sums[w] = run_block(begin, end, grad != nullptr ? &grads[w] : nullptr);
  });
  double total = 0.0;
  for (std::size_t w = 0; w < k; ++w) {
    total += sums[w];
    if (grad != nullptr) grad->AddScaled(grads[w], 1.0);
  }
  result.loss = total * scale;
  return result;
}

void CheckFinite(const LossResult& r, const std::string& where) {
  if (!std::isfinite(r.loss)) {
    throw Error("non-finite loss (" + std::to_string(r.loss) + ") " + where +
                "; try a lower learning rate");
  }
}

double Mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double SampleSd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = Mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string ToString(WeightingMode mode) {
  switch (mode) {
    case WeightingMode::kNone: return "none";
    case WeightingMode::kToken: return "token";
    case WeightingMode::kSent: return "sent";
    case WeightingMode::kMixed: return "mixed";
    case WeightingMode::kKd: return "kd";
  }
  return "?";
}

WeightingMode ParseWeightingMode(const std::string& text) {
  for (WeightingMode m : kAllModes) {
    if (ToString(m) == text) return m;
  }
  throw Error("unknown weighting mode '" + text +
              "' (expected none|token|sent|mixed|kd)");
}

void TrainConfig::Validate() const {
  if (epochs < 1) throw Error("epochs must be >= 1");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (!(kd_alpha >= 0.0 && kd_alpha <= 1.0)) throw Error("kd_alpha must lie in [0, 1]");
  if (workers < 1) throw Error("workers must be >= 1");
}

TrainingData::TrainingData(const EncodedCorpus& corpus, const TokenVocab& tokens)
    : corpus_(&corpus) {
  ids_.reserve(corpus.samples.size());
  for (const EncodedSample& s : corpus.samples) ids_.push_back(tokens.Encode(s.source));
}

void TrainingData::AttachWeights(const std::vector<SampleWeights>& weights) {
  if (weights.size() != size()) {
    throw Error(std::to_string(weights.size()) + " weight records for " +
                std::to_string(size()) + " samples");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    const EncodedSample& s = sample(i);
    if (weights[i].sample_id != s.id) {
      throw Error("weight record " + std::to_string(i) + " is for sample " +
                  std::to_string(weights[i].sample_id) + ", expected " +
                  std::to_string(s.id));
    }
    if (weights[i].w_token.size() != s.tags.size()) {
      throw Error("sample " + std::to_string(s.id) + ": " +
                  std::to_string(weights[i].w_token.size()) +
                  " token weights for " + std::to_string(s.tags.size()) + " slots");
    }
  }
  weights_ = weights;
}

void TrainingData::AttachTeacher(const SignalFile& signals) {
  RequireValid(ValidateSignals(signals, *corpus_), "teacher signals");
  if (!signals.header.has_full_dist) {
    throw Error("knowledge distillation needs teacher signals with full distributions");
  }
  teacher_ = signals.signals;
}

LossResult LossNll(const Parameters& params, const ModelConfig& config,
                   const TrainingData& data, std::span<const std::size_t> batch,
                   Parameters* grad, int workers) {
  return BatchLoss(params, config, data, batch, grad, workers,
                   [&](std::size_t idx, std::size_t pos, const Vector& logits,
                       bool want_grad) {
                     const int gold = data.sample(idx).tags[pos];
                     TermOutput out;
                     out.loss = -LogSoftmax(logits)[gold];
                     if (want_grad) {
                       out.dlogits = Softmax(logits);
                       out.dlogits[gold] -= 1.0;
                     }
                     return out;
                   });
}

LossResult LossWeighted(const Parameters& params, const ModelConfig& config,
                        const TrainingData& data, std::span<const std::size_t> batch,
                        bool use_token, bool use_sent, Parameters* grad,
                        int workers) {
  for (std::size_t idx : batch) {
    if (data.weights(idx) == nullptr) throw Error("training weights not attached");
  }
  return BatchLoss(params, config, data, batch, grad, workers,
                   [&](std::size_t idx, std::size_t pos, const Vector& logits,
                       bool want_grad) {
                     const SampleWeights& w = *data.weights(idx);
                     const double w_sent = use_sent ? w.w_sent : 1.0;
                     const double w_token = use_token ? w.w_token[pos] : 1.0;
                     const double factor = w_sent * w_token;
                     const int gold = data.sample(idx).tags[pos];
                     TermOutput out;
                     out.loss = -(factor * LogSoftmax(logits)[gold]);
                     if (want_grad) {
                       out.dlogits = Softmax(logits);
                       out.dlogits[gold] -= 1.0;
                       out.dlogits *= factor;
                     }
                     return out;
                   });
}

LossResult LossKd(const Parameters& params, const ModelConfig& config,
                  const TrainingData& data, std::span<const std::size_t> batch,
                  double kd_alpha, Parameters* grad, int workers) {
  for (std::size_t idx : batch) {
    if (data.teacher(idx) == nullptr) {
      throw Error("teacher distributions not attached");
    }
  }
  return BatchLoss(params, config, data, batch, grad, workers,
                   [&](std::size_t idx, std::size_t pos, const Vector& logits,
                       bool want_grad) {
                     const std::vector<double>& q = (*data.teacher(idx)->full_dist)[pos];
                     const Eigen::Map<const Vector> teacher(q.data(),
                                                           static_cast<int>(q.size()));
                     const int gold = data.sample(idx).tags[pos];
                     const Vector logp = LogSoftmax(logits);
                     const double nll = -logp[gold];
                     const double soft = -teacher.dot(logp);
                     TermOutput out;
                     out.loss = kd_alpha * nll + (1.0 - kd_alpha) * soft;
                     if (want_grad) {
                       // d/dlogits of -sum q ln softmax = p * sum(q) - q.
                       const Vector p = Softmax(logits);
                       Vector d_nll = p;
                       d_nll[gold] -= 1.0;
                       const Vector d_soft = p * teacher.sum() - teacher;
                       out.dlogits = kd_alpha * d_nll + (1.0 - kd_alpha) * d_soft;
                     }
                     return out;
                   });
}

LossResult TrainingLoss(const Parameters& params, const ModelConfig& config,
                        const TrainingData& data, std::span<const std::size_t> batch,
                        const TrainConfig& train, Parameters* grad) {
  switch (train.mode) {
    case WeightingMode::kNone:
      return LossNll(params, config, data, batch, grad, train.workers);
    case WeightingMode::kToken:
      return LossWeighted(params, config, data, batch, true, false, grad, train.workers);
    case WeightingMode::kSent:
      return LossWeighted(params, config, data, batch, false, true, grad, train.workers);
    case WeightingMode::kMixed:
      return LossWeighted(params, config, data, batch, true, true, grad, train.workers);
    case WeightingMode::kKd:
      return LossKd(params, config, data, batch, train.kd_alpha, grad, train.workers);
  }
  throw Error("unknown weighting mode");
}

AdamOptimizer::AdamOptimizer(const ModelConfig& model, const TrainConfig& config)
    : lr_(config.learning_rate), beta1_(config.beta1), beta2_(config.beta2),
      eps_(config.adam_eps), m_(Parameters::Zeros(model)), v_(Parameters::Zeros(model)) {}

void AdamOptimizer::Step(Parameters& value, const Parameters& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  auto theta = value.tensors();
  auto g = grad.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (std::size_t i = 0; i < theta[k].size(); ++i) {
      m[k][i] = beta1_ * m[k][i] + (1.0 - beta1_) * g[k][i];
      v[k][i] = beta2_ * v[k][i] + (1.0 - beta2_) * g[k][i] * g[k][i];
      const double m_hat = m[k][i] / c1;
      const double v_hat = v[k][i] / c2;
      theta[k][i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

TrainResult Train(Tagger initial, const TrainingData& train, const TrainingData& dev,
                  const TrainConfig& config) {
  config.Validate();
  if (train.size() == 0) throw Error("empty training corpus");
  for (const TrainingData* d : {&train, &dev}) {
    if (d->corpus().vocab_hash != initial.tag_vocab_hash()) {
      throw Error("corpus '" + d->corpus().name + "' tag-vocab hash " +
                  HashToString(d->corpus().vocab_hash) + " does not match model " +
                  HashToString(initial.tag_vocab_hash()));
    }
  }
  const TrainingData& selection = dev.size() > 0 ? dev : train;

  const ModelConfig& mc = initial.config();
  Parameters& params = initial.params().value;
  Parameters& grad = initial.params().grad;
  AdamOptimizer adam(mc, config);
  std::mt19937_64 rng(config.shuffle_seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::size_t> all_dev(selection.size());
  std::iota(all_dev.begin(), all_dev.end(), 0);

  TrainResult result;
  result.best_dev_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    double weighted_sum = 0.0;
    std::size_t positions = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      grad.SetZero();
      const LossResult r = TrainingLoss(params, mc, train, batch, config, &grad);
      CheckFinite(r, "at epoch " + std::to_string(epoch) + ", batch starting " +
                         std::to_string(start));
      adam.Step(params, grad);
      weighted_sum += r.loss * static_cast<double>(r.positions);
      positions += r.positions;
    }
    const LossResult dev_loss =
        LossNll(params, mc, selection, all_dev, nullptr, config.workers);
    CheckFinite(dev_loss, "on dev after epoch " + std::to_string(epoch));

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = positions ? weighted_sum / static_cast<double>(positions) : 0.0;
    entry.dev_loss = dev_loss.loss;
    entry.mode = config.mode;
    entry.seed = config.shuffle_seed;
    result.log.push_back(entry);
    if (dev_loss.loss < result.best_dev_loss) {
      result.best_dev_loss = dev_loss.loss;
      result.best_epoch = epoch;
      result.best = initial;
    }
  }
  result.best.params().grad.SetZero();
  return result;
}

void SaveTrainingLog(const std::filesystem::path& path,
                     const std::vector<EpochLog>& log) {
  auto out = internal::OpenOut(path);
  for (const EpochLog& e : log) {
    json rec = {{"epoch", e.epoch},          {"train_loss", e.train_loss},
                {"dev_loss", e.dev_loss},    {"mode", ToString(e.mode)},
                {"seed", e.seed}};
    out << rec.dump() << '\n';
  }
}

Tokens CorrectSentence(const Tagger& tagger, const TagVocab& vocab,
                       const Tokens& source) {
  std::vector<EditTag> tags = DecodeTags(tagger.PredictTags(source), vocab);
  const EditTag::Kind start = tags[0].kind;
  if (start != EditTag::Kind::kKeep && start != EditTag::Kind::kAppend) {
    tags[0] = EditTag::Keep();
  }
  return ApplyTags(source, tags);
}

std::vector<Tokens> CorrectAll(const Tagger& tagger, const TagVocab& vocab,
                               const std::vector<Tokens>& sources, int workers) {
  if (tagger.tag_vocab_hash() != vocab.hash()) {
    throw Error("model tag-vocab hash " + HashToString(tagger.tag_vocab_hash()) +
                " does not match vocabulary " + HashToString(vocab.hash()));
  }
  std::vector<Tokens> out(sources.size());
  ParallelFor(sources.size(), workers, [&](std::size_t i) {
    out[i] = CorrectSentence(tagger, vocab, sources[i]);
  });
  return out;
}

const AblationRow& AblationReport::row(WeightingMode mode) const {
  for (const AblationRow& r : rows) {
    if (r.mode == mode) return r;
  }
  throw Error("no ablation row for mode " + ToString(mode));
}

std::vector<double> AblationReport::f_by_seed(WeightingMode mode) const {
  std::vector<double> out;
  for (const AblationRun& r : runs) {
    if (r.mode == mode) out.push_back(r.score.f_beta);
  }
  return out;
}

std::string AblationReport::ToTsv() const {
  std::ostringstream out;
  out << "mode\tseeds\tP_mean\tP_sd\tR_mean\tR_sd\tF0.5_mean\tF0.5_sd\n";
  char buf[256];
  for (const AblationRow& r : rows) {
    const std::size_t n = f_by_seed(r.mode).size();
    std::snprintf(buf, sizeof(buf), "%s\t%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n",
                  ToString(r.mode).c_str(), n, r.p_mean, r.p_sd, r.r_mean, r.r_sd,
                  r.f_mean, r.f_sd);
    out << buf;
  }
  return out.str();
}

std::string AblationReport::ToText() const {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-6s  %-15s  %-15s  %-15s\n", "mode", "P", "R",
                "F0.5");
  out << buf;
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-6s  %6.2f +- %5.2f  %6.2f +- %5.2f  %6.2f +- %5.2f\n",
                  ToString(r.mode).c_str(), 100 * r.p_mean, 100 * r.p_sd,
                  100 * r.r_mean, 100 * r.r_sd, 100 * r.f_mean, 100 * r.f_sd);
    out << buf;
  }
  return out.str();
}

AblationReport RunAblation(const AblationSetup& setup) {
  if (setup.seeds.empty()) throw Error("ablation needs at least one seed");
  if (!setup.vocab || !setup.train || !setup.dev || !setup.signals) {
    throw Error("ablation setup is incomplete");
  }
  const TokenVocab tokens = TokenVocab::Build(*setup.train);

  WeightConfig wc = setup.weights;
  wc.use_token = true;
  wc.use_sent = true;
  const std::vector<SampleWeights> weights = ComputeWeights(*setup.signals, wc);

  TrainingData train(*setup.train, tokens);
  TrainingData dev(*setup.dev, tokens);
  RequireValid(ValidateSignals(*setup.signals, *setup.train), "teacher signals");
  train.AttachWeights(weights);
  const bool needs_kd = std::find(setup.modes.begin(), setup.modes.end(),
                                  WeightingMode::kKd) != setup.modes.end();
  if (needs_kd) train.AttachTeacher(*setup.signals);

  AblationReport report;
  for (WeightingMode mode : setup.modes) {
    std::vector<double> ps, rs, fs;
    for (std::uint64_t seed : setup.seeds) {
      ModelConfig mc = setup.model;
      mc.seed = seed;
      mc.tag_vocab_size = static_cast<int>(setup.vocab->size());
      TrainConfig tc = setup.train_config;
      tc.mode = mode;
      tc.shuffle_seed = seed;
      TrainResult trained = Train(Tagger(mc, tokens, setup.vocab->hash()), train, dev, tc);
      const std::vector<Tokens> hyps =
          CorrectAll(trained.best, *setup.vocab, setup.eval_sources, tc.workers);
      AblationRun run;
      run.mode = mode;
      run.seed = seed;
      run.score = Score(setup.eval_sources, hyps, setup.eval_gold);
      run.best_dev_loss = trained.best_dev_loss;
      run.best_epoch = trained.best_epoch;
      ps.push_back(run.score.precision);
      rs.push_back(run.score.recall);
      fs.push_back(run.score.f_beta);
      report.runs.push_back(run);
    }
    report.rows.push_back({mode, Mean(ps), SampleSd(ps), Mean(rs), SampleSd(rs),
                           Mean(fs), SampleSd(fs)});
  }
  return report;
}

}  // namespace gecw
