#ifndef GECW_TEACHER_SIGNAL_H_
#define GECW_TEACHER_SIGNAL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gecw/align.h"
#include "gecw/corpus.h"
#include "gecw/model.h"

namespace gecw {

// Teacher statistics at one target position (Seq2Seq) or tag slot (Seq2Edit).
struct PositionStat {
  double p_gold = 0.0;        // teacher probability of the annotated token/tag
  double entropy_norm = 0.0;  // H(teacher distribution) / ln(vocab_size)
};

struct TeacherSignal {
  std::size_t sample_id = 0;
  std::vector<PositionStat> positions;
  // Full teacher distributions, one per position; only needed for KD.
  std::optional<std::vector<std::vector<double>>> full_dist;
};

enum class Manner { kSeq2Edit, kSeq2Seq };

std::string ToString(Manner manner);
Manner ParseManner(const std::string& text);

struct SignalHeader {
  int vocab_size = 0;           // |E| or |V|
  std::uint64_t vocab_hash = 0;
  Manner manner = Manner::kSeq2Edit;
  bool has_full_dist = false;
  bool includes_eos = false;    // Seq2Seq only: n counts an end-of-sequence slot
};

struct SignalFile {
  SignalHeader header;
  std::vector<TeacherSignal> signals;  // corpus order
};

// Shannon entropy of `dist` (natural log, 0 ln 0 = 0) divided by
// ln(vocab_size). Throws on vocab_size < 2, a length mismatch, negative
// entries, or a sum off 1 by more than 1e-6.
double EntropyNorm(std::span<const double> dist, int vocab_size);

// JSON lines: header record, then {id, p_gold, entropy_norm, dist?} per sample.
// Floats are written in shortest round-trip form.
void SaveSignals(const std::filesystem::path& path, const SignalFile& file);
SignalFile LoadSignals(const std::filesystem::path& path);

struct Violation {
  std::size_t sample_id = 0;
  std::optional<std::size_t> position;
  std::string message;

  std::string ToString() const;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string Summary(std::size_t max_lines = 10) const;
};

// Range and consistency checks that need no corpus.
ValidationReport ValidateSignalValues(const SignalFile& file);

// Seq2Edit: ids, order, and m+1 slot counts against the tag-converted corpus,
// plus vocabulary hash and size.
ValidationReport ValidateSignals(const SignalFile& file,
                                 const EncodedCorpus& corpus);

// Seq2Seq: ids, order, and n (+1 with includes_eos) target positions.
ValidationReport ValidateSignals(const SignalFile& file, const Corpus& corpus);

// Throws gecw::Error carrying the report summary when it is not ok.
void RequireValid(const ValidationReport& report, const std::string& what);

// Runs the tagger over every slot of every sample and records softmax
// statistics of the gold tag. Throws if the tagger's tag-vocab hash differs
// from the corpus'.
SignalFile GenerateSignals(const Tagger& tagger, const EncodedCorpus& corpus,
                           bool with_full_dist, int workers = 1);

}  // namespace gecw

#endif  // GECW_TEACHER_SIGNAL_H_
