#ifndef GECW_CORPUS_H_
#define GECW_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gecw {

using Tokens = std::vector<std::string>;

// One (source, target) training pair. `source` is never empty; `target` may be
// (full deletion). Tokens are non-empty and contain no whitespace.
struct ParallelSample {
  std::size_t id = 0;
  Tokens source;
  Tokens target;
};

struct Corpus {
  std::string name;
  std::vector<ParallelSample> samples;  // samples[i].id == i

  std::size_t size() const { return samples.size(); }
};

// Splits on single spaces. Throws gecw::Error on empty tokens (leading,
// trailing or doubled spaces) or embedded whitespace.
Tokens SplitTokens(std::string_view text);
std::string JoinTokens(const Tokens& tokens);

// Parallel TSV: one `source \t target` pair per line, LF endings.
Corpus ParseParallel(std::istream& in, std::string name);
Corpus LoadParallel(const std::filesystem::path& path);
void WriteParallel(std::ostream& out, const Corpus& corpus);
void SaveParallel(const std::filesystem::path& path, const Corpus& corpus);

struct GoldEdit {
  int start = 0;
  int end = 0;
  Tokens replacement;
  int annotator = 0;

  friend bool operator==(const GoldEdit&, const GoldEdit&) = default;
};

// Gold annotation of one sentence in M2 layout. Every annotator mentioned in
// the record has an entry, possibly empty (noop). A record without any `A`
// line is treated as annotator 0 proposing no edits.
struct GoldEditSet {
  Tokens source;
  std::map<int, std::vector<GoldEdit>> annotations;  // sorted by (start, end)
};

std::vector<GoldEditSet> ParseM2(std::istream& in);
std::vector<GoldEditSet> LoadM2(const std::filesystem::path& path);
void WriteM2(std::ostream& out, const std::vector<GoldEditSet>& gold);

}  // namespace gecw

#endif  // GECW_CORPUS_H_
