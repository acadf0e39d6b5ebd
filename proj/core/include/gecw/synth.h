#ifndef GECW_SYNTH_H_
#define GECW_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gecw/corpus.h"

namespace gecw {

// Rule-based generator of (errorful, corrected) English-like sentence pairs
// over a closed vocabulary. Errors: subject-verb agreement, dropped or wrong
// articles, dropped or wrong prepositions, duplicated words, misspellings.
struct SynthConfig {
  std::size_t num_samples = 2000;
  std::uint64_t seed = 1;
  double error_free_rate = 0.2;  // share of samples with no injected error
  double corruption_rate = 0.0;  // share of samples whose target is corrupted
};

struct SynthCorpus {
  Corpus noisy;   // training view: targets corrupted at corruption_rate
  Corpus clean;   // same sources with correct targets
  std::vector<bool> corrupted;
};

SynthCorpus GenerateSynthetic(const SynthConfig& config);

}  // namespace gecw

#endif  // GECW_SYNTH_H_
