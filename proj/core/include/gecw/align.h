#ifndef GECW_ALIGN_H_
#define GECW_ALIGN_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gecw/corpus.h"

namespace gecw {

inline constexpr int kDefaultAppendMax = 4;

// One edit operation attached to a source slot.
//   KEEP       emit the slot's token
//   DELETE     emit nothing
//   REPLACE t  emit t instead of the slot's token
//   APPEND s   emit the slot's token, then the span s (1..A_max tokens)
struct EditTag {
  enum class Kind { kKeep, kDelete, kReplace, kAppend };

  Kind kind = Kind::kKeep;
  Tokens tokens;  // one token for kReplace, the span for kAppend

  static EditTag Keep() { return {}; }
  static EditTag Delete() { return {Kind::kDelete, {}}; }
  static EditTag Replace(std::string token) {
    return {Kind::kReplace, {std::move(token)}};
  }
  static EditTag Append(Tokens span) { return {Kind::kAppend, std::move(span)}; }

  bool token_dependent() const {
    return kind == Kind::kReplace || kind == Kind::kAppend;
  }

  // "$KEEP", "$DELETE", "$REPLACE_<tok>", "$APPEND_<tok> <tok> ...".
  std::string Render() const;
  static EditTag Parse(std::string_view rendered);

  friend bool operator==(const EditTag&, const EditTag&) = default;
};

// Tags for a source of m tokens: m + 1 entries. Slot 0 is a virtual
// sentence-start position (KEEP or APPEND only); slot i covers source token i.
struct TagSequence {
  std::size_t sample_id = 0;
  std::vector<EditTag> tags;
};

// Aligns source to target with a Levenshtein program restricted to what one
// tag per slot can express: insertions only follow a kept token or the start
// slot, and each inserted run is at most `append_max` tokens. Costs are 0 for
// a match and 1 for substitution, deletion, and each inserted token. Ties
// during backtrace prefer match, then substitute, then delete, then insert.
// Throws gecw::Error if no alignment within `append_max` exists.
TagSequence AlignToTags(const ParallelSample& sample,
                        int append_max = kDefaultAppendMax);

// Throws gecw::Error on a length mismatch or an illegal start-slot tag.
Tokens ApplyTags(const Tokens& source, const std::vector<EditTag>& tags);

struct AlignedCorpus {
  std::vector<TagSequence> sequences;  // in sample order
  std::vector<std::size_t> failed;     // ids of unalignable samples
};

// With `skip_unalignable` false the first failure is rethrown.
AlignedCorpus AlignCorpus(const Corpus& corpus, int append_max,
                          bool skip_unalignable, int workers = 1);

class TagVocab {
 public:
  TagVocab();  // {KEEP, DELETE}

  static TagVocab FromTags(const std::vector<EditTag>& tags);

  std::size_t size() const { return tags_.size(); }
  const EditTag& tag(std::size_t index) const { return tags_.at(index); }
  const std::vector<EditTag>& tags() const { return tags_; }
  std::optional<int> Find(const EditTag& tag) const;
  std::vector<std::string> Rendered() const;
  std::uint64_t hash() const { return hash_; }

  // Occurrence counts seen while building (rendered tag -> count).
  std::map<std::string, std::size_t> frequencies;
  int append_max = kDefaultAppendMax;

 private:
  std::vector<EditTag> tags_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t hash_ = 0;
};

// KEEP and DELETE first, then the `cap - 2` most frequent token-dependent
// tags (ties broken by rendered string). Throws if cap < 2.
TagVocab BuildVocab(const std::vector<TagSequence>& sequences, std::size_t cap);
TagVocab BuildVocab(const Corpus& corpus, std::size_t cap,
                    int append_max = kDefaultAppendMax);

void SaveVocab(const std::filesystem::path& path, const TagVocab& vocab);
TagVocab LoadVocab(const std::filesystem::path& path);

enum class OovPolicy { kDropSample, kMapKeep };

struct EncodedSample {
  std::size_t id = 0;
  Tokens source;
  Tokens target;
  std::vector<int> tags;  // source.size() + 1 vocab indices
};

struct EncodeReport {
  std::size_t encoded = 0;
  std::size_t dropped = 0;        // samples removed for out-of-vocab tags
  std::size_t mapped_to_keep = 0; // tags replaced by KEEP
  std::size_t unalignable = 0;    // samples whose alignment failed
};

// The tag-converted corpus.
struct EncodedCorpus {
  std::string name;
  std::uint64_t vocab_hash = 0;
  std::size_t num_tags = 0;
  std::vector<EncodedSample> samples;
  EncodeReport report;

  std::size_t total_positions() const;
};

// Samples that cannot be aligned within vocab.append_max are skipped and
// counted in report.unalignable.
EncodedCorpus EncodeCorpus(const Corpus& corpus, const TagVocab& vocab,
                           OovPolicy policy, int workers = 1);

// JSON lines: header record, then {id, source, target, tags} per sample.
void SaveEncoded(const std::filesystem::path& path, const EncodedCorpus& corpus);
EncodedCorpus LoadEncoded(const std::filesystem::path& path);

std::vector<EditTag> DecodeTags(const std::vector<int>& indices,
                                const TagVocab& vocab);

}  // namespace gecw

#endif  // GECW_ALIGN_H_
