#include "gecw/align.h"

#include <algorithm>
#include <limits>
#include <string>

#include "gecw/error.h"
#include "gecw/hash.h"
#include "gecw/parallel.h"
#include "json.hpp"
#include "json_io.h"

namespace gecw {
namespace {

using json = nlohmann::json;

constexpr int kInf = std::numeric_limits<int>::max() / 4;

constexpr std::string_view kKeep = "$KEEP";
constexpr std::string_view kDelete = "$DELETE";
constexpr std::string_view kReplacePrefix = "$REPLACE_";
constexpr std::string_view kAppendPrefix = "$APPEND_";

// Cost tables for the restricted alignment program.
//   closed(i, j): y[0..j) produced from x[0..i) with slot i finished
//   open(i, j, r): slot i kept (or is the start slot) and r tokens appended
class AlignmentTable {
 public:
  AlignmentTable(const Tokens& x, const Tokens& y, int run_cap)
      : x_(x), y_(y), m_(x.size()), n_(y.size()), cap_(run_cap),
        closed_((m_ + 1) * (n_ + 1), kInf),
        open_((m_ + 1) * (n_ + 1) * (cap_ + 1), kInf) {
    Fill();
  }

  int cost() const { return closed(m_, n_); }

  std::vector<EditTag> Backtrace() const {
    std::vector<EditTag> tags(m_ + 1);
    std::size_t i = m_;
    std::size_t j = n_;
    while (i > 0 || j > 0) {
      const int c = closed(i, j);
      if (i == 0) {
        tags[0] = EditTag::Append(Tokens(y_.begin(), y_.begin() + j));
        break;
      }
      if (open(i, j, 0) == c) {
        tags[i] = EditTag::Keep();
        --i;
        --j;
      } else if (j > 0 && x_[i - 1] != y_[j - 1] && closed(i - 1, j - 1) + 1 == c) {
        tags[i] = EditTag::Replace(y_[j - 1]);
        --i;
        --j;
      } else if (closed(i - 1, j) + 1 == c) {
        tags[i] = EditTag::Delete();
        --i;
      } else {
        int r = 1;
        while (r <= cap_ && open(i, j, r) != c) ++r;
        tags[i] = EditTag::Append(Tokens(y_.begin() + (j - r), y_.begin() + j));
        j -= r;
        // The token under an append is always a match.
        --i;
        --j;
      }
    }
    return tags;
  }

 private:
  int& closed(std::size_t i, std::size_t j) { return closed_[i * (n_ + 1) + j]; }
  int closed(std::size_t i, std::size_t j) const {
    return closed_[i * (n_ + 1) + j];
  }
  int& open(std::size_t i, std::size_t j, int r) {
    return open_[(i * (n_ + 1) + j) * (cap_ + 1) + r];
  }
  int open(std::size_t i, std::size_t j, int r) const {
    return open_[(i * (n_ + 1) + j) * (cap_ + 1) + r];
  }

  static int Add(int a, int b) { return a >= kInf ? kInf : a + b; }

  void Fill() {
    for (std::size_t i = 0; i <= m_; ++i) {
      for (std::size_t j = 0; j <= n_; ++j) {
        if (i == 0) {
          open(0, j, 0) = j == 0 ? 0 : kInf;
        } else {
          open(i, j, 0) = (j > 0 && x_[i - 1] == y_[j - 1]) ? closed(i - 1, j - 1)
                                                            : kInf;
        }
        for (int r = 1; r <= cap_; ++r) {
          open(i, j, r) = j > 0 ? Add(open(i, j - 1, r - 1), 1) : kInf;
        }
        int best = kInf;
        for (int r = 0; r <= cap_; ++r) best = std::min(best, open(i, j, r));
        if (i > 0) {
          best = std::min(best, Add(closed(i - 1, j), 1));
          if (j > 0 && x_[i - 1] != y_[j - 1]) {
            best = std::min(best, Add(closed(i - 1, j - 1), 1));
          }
        }
        closed(i, j) = best;
      }
    }
  }

  const Tokens& x_;
  const Tokens& y_;
  std::size_t m_;
  std::size_t n_;
  int cap_;
  std::vector<int> closed_;
  std::vector<int> open_;
};

}  // namespace

std::string EditTag::Render() const {
  switch (kind) {
    case Kind::kKeep:
      return std::string(kKeep);
    case Kind::kDelete:
      return std::string(kDelete);
    case Kind::kReplace:
      return std::string(kReplacePrefix) + tokens.at(0);
    case Kind::kAppend:
      return std::string(kAppendPrefix) + JoinTokens(tokens);
  }
  return {};
}

EditTag EditTag::Parse(std::string_view rendered) {
  if (rendered == kKeep) return Keep();
  if (rendered == kDelete) return Delete();
  try {
    if (rendered.substr(0, kReplacePrefix.size()) == kReplacePrefix) {
      Tokens t = SplitTokens(rendered.substr(kReplacePrefix.size()));
      if (t.size() == 1) return Replace(std::move(t[0]));
    } else if (rendered.substr(0, kAppendPrefix.size()) == kAppendPrefix) {
      Tokens t = SplitTokens(rendered.substr(kAppendPrefix.size()));
      if (!t.empty()) return Append(std::move(t));
    }
  } catch (const Error&) {
  }
  throw Error("malformed tag '" + std::string(rendered) + "'");
}

TagSequence AlignToTags(const ParallelSample& sample, int append_max) {
  if (append_max < 1) throw Error("append_max must be >= 1");
  const int cap = std::min<int>(append_max, static_cast<int>(sample.target.size()));
  AlignmentTable table(sample.source, sample.target, std::max(cap, 0));
  if (table.cost() >= kInf) {
    throw Error("sample " + std::to_string(sample.id) +
                ": no alignment with appended runs of at most " +
                std::to_string(append_max) + " tokens");
  }
  return TagSequence{sample.id, table.Backtrace()};
}

Tokens ApplyTags(const Tokens& source, const std::vector<EditTag>& tags) {
  if (tags.size() != source.size() + 1) {
    throw Error("tag sequence has " + std::to_string(tags.size()) +
                " slots, expected " + std::to_string(source.size() + 1));
  }
  Tokens out;
  const EditTag& start = tags[0];
  if (start.kind == EditTag::Kind::kAppend) {
    out.insert(out.end(), start.tokens.begin(), start.tokens.end());
  } else if (start.kind != EditTag::Kind::kKeep) {
    throw Error("start slot only accepts $KEEP or $APPEND");
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    const EditTag& t = tags[i + 1];
    switch (t.kind) {
      case EditTag::Kind::kKeep:
        out.push_back(source[i]);
        break;
      case EditTag::Kind::kDelete:
        break;
      case EditTag::Kind::kReplace:
        out.push_back(t.tokens.at(0));
        break;
      case EditTag::Kind::kAppend:
        out.push_back(source[i]);
        out.insert(out.end(), t.tokens.begin(), t.tokens.end());
        break;
    }
  }
  return out;
}

AlignedCorpus AlignCorpus(const Corpus& corpus, int append_max,
                          bool skip_unalignable, int workers) {
  std::vector<std::optional<TagSequence>> slots(corpus.size());
  std::vector<std::string> errors(corpus.size());
  ParallelFor(corpus.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = AlignToTags(corpus.samples[i], append_max);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  AlignedCorpus result;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      result.sequences.push_back(std::move(*slots[i]));
    } else if (skip_unalignable) {
      result.failed.push_back(corpus.samples[i].id);
    } else {
      throw Error(corpus.name + ": " + errors[i]);
    }
  }
  return result;
}

TagVocab::TagVocab() {
  tags_ = {EditTag::Keep(), EditTag::Delete()};
  index_ = {{tags_[0].Render(), 0}, {tags_[1].Render(), 1}};
  hash_ = HashJoined(Rendered());
}

TagVocab TagVocab::FromTags(const std::vector<EditTag>& tags) {
  if (tags.size() < 2 || !(tags[0] == EditTag::Keep())) {
    throw Error("tag vocabulary must start with $KEEP and hold at least 2 tags");
  }
  TagVocab v;
  v.tags_.clear();
  v.index_.clear();
  for (const EditTag& t : tags) {
    std::string r = t.Render();
    if (!v.index_.emplace(r, static_cast<int>(v.tags_.size())).second) {
      throw Error("duplicate tag " + r);
    }
    v.tags_.push_back(t);
  }
  if (!v.Find(EditTag::Delete())) throw Error("tag vocabulary lacks $DELETE");
  v.hash_ = HashJoined(v.Rendered());
  return v;
}

std::optional<int> TagVocab::Find(const EditTag& tag) const {
  auto it = index_.find(tag.Render());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> TagVocab::Rendered() const {
  std::vector<std::string> out;
  out.reserve(tags_.size());
  for (const EditTag& t : tags_) out.push_back(t.Render());
  return out;
}

TagVocab BuildVocab(const std::vector<TagSequence>& sequences, std::size_t cap) {
  if (cap < 2) throw Error("vocabulary cap must be >= 2");
  std::map<std::string, std::size_t> counts;
  for (const TagSequence& seq : sequences) {
    for (const EditTag& t : seq.tags) {
      if (t.token_dependent()) ++counts[t.Render()];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  // counts is already ordered by rendering, so a stable sort on frequency
  // leaves equal-frequency tags in lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<EditTag> tags = {EditTag::Keep(), EditTag::Delete()};
  for (const auto& [rendered, count] : ranked) {
    if (tags.size() >= cap) break;
    tags.push_back(EditTag::Parse(rendered));
  }
  TagVocab vocab = TagVocab::FromTags(tags);
  vocab.frequencies = std::move(counts);
  return vocab;
}

TagVocab BuildVocab(const Corpus& corpus, std::size_t cap, int append_max) {
  TagVocab vocab =
      BuildVocab(AlignCorpus(corpus, append_max, false).sequences, cap);
  vocab.append_max = append_max;
  return vocab;
}

void SaveVocab(const std::filesystem::path& path, const TagVocab& vocab) {
  json j;
  j["tags"] = vocab.Rendered();
  j["hash"] = HashToString(vocab.hash());
  j["append_max"] = vocab.append_max;
  json counts = json::object();
  for (const auto& [tag, count] : vocab.frequencies) counts[tag] = count;
  j["counts"] = std::move(counts);
  auto out = internal::OpenOut(path);
  out << j.dump(1) << '\n';
}

TagVocab LoadVocab(const std::filesystem::path& path) {
  auto in = internal::OpenIn(path);
  try {
    json j = json::parse(in);
    std::vector<EditTag> tags;
    for (const auto& r : j.at("tags")) tags.push_back(EditTag::Parse(r.get<std::string>()));
    TagVocab vocab = TagVocab::FromTags(tags);
    const std::uint64_t stored = HashFromString(j.at("hash").get<std::string>());
    if (stored != vocab.hash()) {
      throw Error("hash " + HashToString(stored) +
                  " does not match tag list (" + HashToString(vocab.hash()) + ")");
    }
    vocab.append_max = j.value("append_max", kDefaultAppendMax);
    if (j.contains("counts")) {
      for (const auto& [tag, count] : j["counts"].items()) {
        vocab.frequencies[tag] = count.get<std::size_t>();
      }
    }
    return vocab;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::size_t EncodedCorpus::total_positions() const {
  std::size_t n = 0;
  for (const EncodedSample& s : samples) n += s.tags.size();
  return n;
}

EncodedCorpus EncodeCorpus(const Corpus& corpus, const TagVocab& vocab,
                           OovPolicy policy, int workers) {
  const AlignedCorpus aligned =
      AlignCorpus(corpus, vocab.append_max, /*skip_unalignable=*/true, workers);
  EncodedCorpus out;
  out.name = corpus.name;
  out.vocab_hash = vocab.hash();
  out.num_tags = vocab.size();
  out.report.unalignable = aligned.failed.size();
  for (const TagSequence& seq : aligned.sequences) {
    const ParallelSample& sample = corpus.samples.at(seq.sample_id);
    EncodedSample enc{sample.id, sample.source, sample.target, {}};
    enc.tags.reserve(seq.tags.size());
    std::size_t oov = 0;
    for (const EditTag& t : seq.tags) {
      std::optional<int> idx = vocab.Find(t);
      if (!idx) {
        ++oov;
        idx = 0;
      }
      enc.tags.push_back(*idx);
    }
    if (oov > 0 && policy == OovPolicy::kDropSample) {
      ++out.report.dropped;
      continue;
    }
    out.report.mapped_to_keep += oov;
    out.samples.push_back(std::move(enc));
  }
  out.report.encoded = out.samples.size();
  return out;
}

void SaveEncoded(const std::filesystem::path& path, const EncodedCorpus& corpus) {
  auto out = internal::OpenOut(path);
  json header = {
      {"format", "gecw.encoded"},
      {"version", 1},
      {"name", corpus.name},
      {"vocab_hash", HashToString(corpus.vocab_hash)},
      {"num_tags", corpus.num_tags},
      {"report",
       {{"encoded", corpus.report.encoded},
        {"dropped", corpus.report.dropped},
        {"mapped_to_keep", corpus.report.mapped_to_keep},
        {"unalignable", corpus.report.unalignable}}},
  };
  out << header.dump() << '\n';
  for (const EncodedSample& s : corpus.samples) {
    json rec = {{"id", s.id}, {"source", s.source}, {"target", s.target},
                {"tags", s.tags}};
    out << rec.dump() << '\n';
  }
}

EncodedCorpus LoadEncoded(const std::filesystem::path& path) {
  auto in = internal::OpenIn(path);
  EncodedCorpus corpus;
  std::string line;
  std::size_t lineno = 0;
  try {
    if (!std::getline(in, line)) throw Error("empty file");
    ++lineno;
    json header = json::parse(line);
    if (header.value("format", "") != "gecw.encoded") {
      throw Error("not an encoded-corpus file");
    }
    corpus.name = header.value("name", path.string());
    corpus.vocab_hash = HashFromString(header.at("vocab_hash").get<std::string>());
    corpus.num_tags = header.at("num_tags").get<std::size_t>();
    if (header.contains("report")) {
      const json& r = header["report"];
      corpus.report.encoded = r.value("encoded", std::size_t{0});
      corpus.report.dropped = r.value("dropped", std::size_t{0});
      corpus.report.mapped_to_keep = r.value("mapped_to_keep", std::size_t{0});
      corpus.report.unalignable = r.value("unalignable", std::size_t{0});
    }
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json rec = json::parse(line);
      EncodedSample s;
      s.id = rec.at("id").get<std::size_t>();
      s.source = rec.at("source").get<Tokens>();
      s.target = rec.value("target", Tokens{});
      s.tags = rec.at("tags").get<std::vector<int>>();
      if (s.source.empty()) throw Error("empty source");
      if (s.tags.size() != s.source.size() + 1) {
        throw Error("sample " + std::to_string(s.id) + " has " +
                    std::to_string(s.tags.size()) + " tags for " +
                    std::to_string(s.source.size()) + " source tokens");
      }
      for (int t : s.tags) {
        if (t < 0 || static_cast<std::size_t>(t) >= corpus.num_tags) {
          throw Error("tag index " + std::to_string(t) + " out of range");
        }
      }
      corpus.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(internal::Where(path, lineno) + e.what());
  } catch (const Error& e) {
    throw Error(internal::Where(path, lineno) + e.what());
  }
  return corpus;
}

std::vector<EditTag> DecodeTags(const std::vector<int>& indices,
                                const TagVocab& vocab) {
  std::vector<EditTag> tags;
  tags.reserve(indices.size());
  for (int i : indices) tags.push_back(vocab.tag(static_cast<std::size_t>(i)));
  return tags;
}

}  // namespace gecw
