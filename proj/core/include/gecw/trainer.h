#ifndef GECW_TRAINER_H_
#define GECW_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gecw/align.h"
#include "gecw/eval.h"
#include "gecw/model.h"
#include "gecw/teacher_signal.h"
#include "gecw/weights.h"

namespace gecw {

enum class WeightingMode { kNone, kToken, kSent, kMixed, kKd };

std::string ToString(WeightingMode mode);
WeightingMode ParseWeightingMode(const std::string& text);
inline constexpr WeightingMode kAllModes[] = {
    WeightingMode::kNone, WeightingMode::kToken, WeightingMode::kSent,
    WeightingMode::kMixed, WeightingMode::kKd};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-8;
  std::uint64_t shuffle_seed = 0;
  WeightingMode mode = WeightingMode::kNone;
  double kd_alpha = 0.5;  // weight of the gold NLL term in KD
  int workers = 1;

  void Validate() const;
};

// A tag-converted corpus with its sources mapped to tagger input ids, plus the
// optional per-sample weights and teacher distributions.
class TrainingData {
 public:
  TrainingData(const EncodedCorpus& corpus, const TokenVocab& tokens);

  // Weights must be in corpus order with matching ids and position counts.
  void AttachWeights(const std::vector<SampleWeights>& weights);
  // Signals must carry full distributions over the corpus tag vocabulary.
  void AttachTeacher(const SignalFile& signals);

  std::size_t size() const { return corpus_->samples.size(); }
  const EncodedCorpus& corpus() const { return *corpus_; }
  const EncodedSample& sample(std::size_t i) const { return corpus_->samples[i]; }
  const std::vector<int>& ids(std::size_t i) const { return ids_[i]; }
  const SampleWeights* weights(std::size_t i) const {
    return weights_.empty() ? nullptr : &weights_[i];
  }
  const TeacherSignal* teacher(std::size_t i) const {
    return teacher_.empty() ? nullptr : &teacher_[i];
  }
  std::size_t total_positions() const { return corpus_->total_positions(); }

 private:
  const EncodedCorpus* corpus_;
  std::vector<std::vector<int>> ids_;
  std::vector<SampleWeights> weights_;
  std::vector<TeacherSignal> teacher_;
};

struct LossResult {
  double loss = 0.0;          // summed terms divided by `positions`
  std::size_t positions = 0;  // tag slots in the batch
};

// Each loss below is a mean over all tag slots of the batch; when `grad` is
// non-null the gradient of that mean is added into it. With workers > 1 the
// batch is split into contiguous blocks whose gradients are merged in block
// order.

// -sum ln p(gold) / N.
LossResult LossNll(const Parameters& params, const ModelConfig& config,
                   const TrainingData& data, std::span<const std::size_t> batch,
                   Parameters* grad, int workers = 1);

// -sum w_sent * w_token * ln p(gold) / N. Components switched off are read as
// 1. Throws if weights are not attached.
LossResult LossWeighted(const Parameters& params, const ModelConfig& config,
                        const TrainingData& data, std::span<const std::size_t> batch,
                        bool use_token, bool use_sent, Parameters* grad,
                        int workers = 1);

// sum [alpha * -ln p(gold) + (1 - alpha) * -sum_k q_k ln p_k] / N with q the
// teacher distribution. Throws if teacher distributions are not attached.
LossResult LossKd(const Parameters& params, const ModelConfig& config,
                  const TrainingData& data, std::span<const std::size_t> batch,
                  double kd_alpha, Parameters* grad, int workers = 1);

// The objective selected by config.mode.
LossResult TrainingLoss(const Parameters& params, const ModelConfig& config,
                        const TrainingData& data, std::span<const std::size_t> batch,
                        const TrainConfig& train, Parameters* grad);

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelConfig& model, const TrainConfig& config);
  void Step(Parameters& value, const Parameters& grad);
  int steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Parameters m_;
  Parameters v_;
  int t_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  WeightingMode mode = WeightingMode::kNone;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Tagger best;  // parameters at the lowest dev loss
  int best_epoch = 0;
  double best_dev_loss = 0.0;
  std::vector<EpochLog> log;
};

// Seeded-shuffled minibatches and Adam updates for config.epochs epochs; dev
// loss (unweighted NLL) after each epoch; the lowest-dev-loss parameters are
// kept. Throws on hash mismatches or a non-finite loss.
TrainResult Train(Tagger initial, const TrainingData& train, const TrainingData& dev,
                  const TrainConfig& config);

void SaveTrainingLog(const std::filesystem::path& path,
                     const std::vector<EpochLog>& log);

// Predicted tags applied to the source. A start slot predicted as anything
// but KEEP/APPEND is read as KEEP.
Tokens CorrectSentence(const Tagger& tagger, const TagVocab& vocab,
                       const Tokens& source);
std::vector<Tokens> CorrectAll(const Tagger& tagger, const TagVocab& vocab,
                               const std::vector<Tokens>& sources, int workers = 1);

struct AblationSetup {
  const TagVocab* vocab = nullptr;
  const EncodedCorpus* train = nullptr;
  const EncodedCorpus* dev = nullptr;       // for checkpoint selection
  std::vector<Tokens> eval_sources;         // scored sentences
  std::vector<GoldEditSet> eval_gold;
  const SignalFile* signals = nullptr;      // full distributions needed for kd
  WeightConfig weights;                     // epsilon; flags set per mode
  ModelConfig model;                        // seed overridden per run
  TrainConfig train_config;                 // mode and seed overridden per run
  std::vector<std::uint64_t> seeds;
  std::vector<WeightingMode> modes{std::begin(kAllModes), std::end(kAllModes)};
};

struct AblationRun {
  WeightingMode mode = WeightingMode::kNone;
  std::uint64_t seed = 0;
  ScoreReport score;
  double best_dev_loss = 0.0;
  int best_epoch = 0;
};

struct AblationRow {
  WeightingMode mode = WeightingMode::kNone;
  double p_mean = 0, p_sd = 0, r_mean = 0, r_sd = 0, f_mean = 0, f_sd = 0;
};

struct AblationReport {
  std::vector<AblationRun> runs;
  std::vector<AblationRow> rows;

  const AblationRow& row(WeightingMode mode) const;
  std::vector<double> f_by_seed(WeightingMode mode) const;
  std::string ToTsv() const;
  std::string ToText() const;
};

// Trains every mode for every seed and scores each on the evaluation set.
AblationReport RunAblation(const AblationSetup& setup);

}  // namespace gecw

#endif  // GECW_TRAINER_H_
