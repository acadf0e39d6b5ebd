#ifndef GECW_EVAL_H_
#define GECW_EVAL_H_

#include <cstddef>
#include <string>
#include <vector>

#include "gecw/corpus.h"

namespace gecw {

// Replace source[start, end) with `replacement` (empty = deletion,
// start == end = insertion).
struct Edit {
  int start = 0;
  int end = 0;
  Tokens replacement;

  friend bool operator==(const Edit&, const Edit&) = default;
  friend auto operator<=>(const Edit&, const Edit&) = default;
};

// Span edits turning `source` into `hypothesis`: the tag alignment's non-KEEP
// operations with adjacent ones merged. Sorted and non-overlapping.
std::vector<Edit> ExtractEdits(const Tokens& source, const Tokens& hypothesis);

// Applies sorted, non-overlapping edits.
Tokens ApplyEdits(const Tokens& source, const std::vector<Edit>& edits);

struct ScoreReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double beta = 0.5;
  double precision = 1.0;
  double recall = 1.0;
  double f_beta = 0.0;

  std::string ToTsv() const;
  std::string ToText() const;
};

// Precision tp/(tp+fp) and recall tp/(tp+fn), 0/0 read as 1; F is
// (1+b^2)PR/(b^2 P + R), 0/0 read as 0.
ScoreReport MakeReport(std::size_t tp, std::size_t fp, std::size_t fn,
                       double beta = 0.5);
double FBeta(double precision, double recall, double beta);

struct SentenceCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  int annotator = 0;
};

// Counts against the annotator with the best sentence-level F_beta
// (ties go to the lower annotator id).
SentenceCounts ScoreSentence(const std::vector<Edit>& hypothesis_edits,
                             const GoldEditSet& gold, double beta);

// Corpus-level scores from summed per-sentence counts. Throws on length
// mismatch, an empty input, or a gold record whose source differs.
ScoreReport Score(const std::vector<Tokens>& sources,
                  const std::vector<Tokens>& hypotheses,
                  const std::vector<GoldEditSet>& gold, double beta = 0.5);

// Single-annotator gold edits extracted from each (source, target) pair.
std::vector<GoldEditSet> GoldFromParallel(const Corpus& corpus);

}  // namespace gecw

#endif  // GECW_EVAL_H_
