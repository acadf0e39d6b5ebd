#include "gecw/eval.h"

#include <algorithm>
#include <cstdio>
#include <set>

#include "gecw/align.h"
#include "gecw/error.h"

namespace gecw {

std::vector<Edit> ExtractEdits(const Tokens& source, const Tokens& hypothesis) {
  ParallelSample pair{0, source, hypothesis};
  const int cap = std::max<int>(1, static_cast<int>(hypothesis.size()));
  const TagSequence seq = AlignToTags(pair, cap);

  std::vector<Edit> atomic;
  for (std::size_t slot = 0; slot < seq.tags.size(); ++slot) {
    const EditTag& t = seq.tags[slot];
    const int i = static_cast<int>(slot);
    switch (t.kind) {
      case EditTag::Kind::kKeep:
        break;
      case EditTag::Kind::kDelete:
        atomic.push_back({i - 1, i, {}});
        break;
      case EditTag::Kind::kReplace:
        atomic.push_back({i - 1, i, t.tokens});
        break;
      case EditTag::Kind::kAppend:
        atomic.push_back({i, i, t.tokens});
        break;
    }
  }
  std::vector<Edit> merged;
  for (Edit& e : atomic) {
    if (!merged.empty() && merged.back().end == e.start) {
      Edit& prev = merged.back();
      prev.end = e.end;
      prev.replacement.insert(prev.replacement.end(), e.replacement.begin(),
                              e.replacement.end());
    } else {
      merged.push_back(std::move(e));
    }
  }
  return merged;
}

Tokens ApplyEdits(const Tokens& source, const std::vector<Edit>& edits) {
  Tokens out;
  int cursor = 0;
  const int m = static_cast<int>(source.size());
  for (const Edit& e : edits) {
    if (e.start < cursor || e.end < e.start || e.end > m) {
      throw Error("edits must be sorted, non-overlapping, and within the source");
    }
    out.insert(out.end(), source.begin() + cursor, source.begin() + e.start);
    out.insert(out.end(), e.replacement.begin(), e.replacement.end());
    cursor = e.end;
  }
  out.insert(out.end(), source.begin() + cursor, source.end());
  return out;
}

double FBeta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / denom;
}

ScoreReport MakeReport(std::size_t tp, std::size_t fp, std::size_t fn, double beta) {
  ScoreReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.beta = beta;
  r.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
  r.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
  r.f_beta = FBeta(r.precision, r.recall, beta);
  return r;
}

std::string ScoreReport::ToTsv() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "tp\tfp\tfn\tprecision\trecall\tf%.2g\n%zu\t%zu\t%zu\t%.6f\t%.6f\t%.6f\n",
                beta, tp, fp, fn, precision, recall, f_beta);
  return buf;
}

std::string ScoreReport::ToText() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "TP %zu  FP %zu  FN %zu\nPrecision %.4f\nRecall    %.4f\nF%-8.2g %.4f\n",
                tp, fp, fn, precision, recall, beta, f_beta);
  return buf;
}

SentenceCounts ScoreSentence(const std::vector<Edit>& hypothesis_edits,
                             const GoldEditSet& gold, double beta) {
  const std::set<Edit> hyp(hypothesis_edits.begin(), hypothesis_edits.end());
  SentenceCounts best;
  double best_f = -1.0;
  bool first = true;
  auto consider = [&](int annotator, const std::vector<GoldEdit>& edits) {
    std::set<Edit> ref;
    for (const GoldEdit& g : edits) ref.insert({g.start, g.end, g.replacement});
    std::size_t tp = 0;
    for (const Edit& e : hyp) tp += ref.count(e);
    SentenceCounts c{tp, hyp.size() - tp, ref.size() - tp, annotator};
    const double f = MakeReport(c.tp, c.fp, c.fn, beta).f_beta;
    // Annotators arrive in increasing id order, so strict > keeps the lowest.
    if (first || f > best_f) {
      best = c;
      best_f = f;
      first = false;
    }
  };
  if (gold.annotations.empty()) {
    consider(0, {});
  } else {
    for (const auto& [annotator, edits] : gold.annotations) consider(annotator, edits);
  }
  return best;
}

ScoreReport Score(const std::vector<Tokens>& sources,
                  const std::vector<Tokens>& hypotheses,
                  const std::vector<GoldEditSet>& gold, double beta) {
  if (sources.empty()) throw Error("nothing to score");
  if (sources.size() != hypotheses.size() || sources.size() != gold.size()) {
    throw Error("scoring needs equal numbers of sources (" +
                std::to_string(sources.size()) + "), hypotheses (" +
                std::to_string(hypotheses.size()) + ") and gold records (" +
                std::to_string(gold.size()) + ")");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (gold[i].source != sources[i]) {
      throw Error("sentence " + std::to_string(i) +
                  ": gold source differs from the scored source");
    }
    const SentenceCounts c =
        ScoreSentence(ExtractEdits(sources[i], hypotheses[i]), gold[i], beta);
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  return MakeReport(tp, fp, fn, beta);
}

std::vector<GoldEditSet> GoldFromParallel(const Corpus& corpus) {
  std::vector<GoldEditSet> gold;
  gold.reserve(corpus.size());
  for (const ParallelSample& s : corpus.samples) {
    GoldEditSet g;
    g.source = s.source;
    auto& edits = g.annotations[0];
    for (const Edit& e : ExtractEdits(s.source, s.target)) {
      edits.push_back({e.start, e.end, e.replacement, 0});
    }
    gold.push_back(std::move(g));
  }
  return gold;
}

}  // namespace gecw
