#ifndef GECW_WEIGHTS_H_
#define GECW_WEIGHTS_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gecw/teacher_signal.h"

namespace gecw {

struct WeightConfig {
  // Smoothing term, log anchor, and floor of the sentence weight.
  double epsilon = std::exp(-9.0);
  bool use_token = true;
  bool use_sent = true;

  void Validate() const;  // 0 < epsilon < 1
};

struct SampleWeights {
  std::size_t sample_id = 0;
  double w_sent = 1.0;           // in [epsilon, 1]
  std::vector<double> w_token;   // in [0, 1], one per position
};

// Token-level weight: the teacher's probability of the annotated tag.
inline double TokenWeight(const PositionStat& stat) { return stat.p_gold; }

// Mean normalized entropy over all positions. Throws on an empty signal.
double Diversity(const TeacherSignal& signal);

// max(ln(div + eps) / ln(eps), eps). Decreasing in div; 1 at div = 0 and
// eps at div = 1.
double SentenceWeight(double div, const WeightConfig& config);

std::vector<SampleWeights> ComputeWeights(const SignalFile& signals,
                                          const WeightConfig& config);

struct WeightsFile {
  WeightConfig config;
  std::uint64_t signal_file_hash = 0;  // FNV-1a of the signal file bytes
  std::uint64_t vocab_hash = 0;
  std::vector<SampleWeights> weights;
};

// JSON lines: header {epsilon, use_token, use_sent, signal_file_hash,
// vocab_hash}, then {id, w_sent, w_token} per sample.
void SaveWeights(const std::filesystem::path& path, const WeightsFile& file);
WeightsFile LoadWeights(const std::filesystem::path& path);

}  // namespace gecw

#endif  // GECW_WEIGHTS_H_
