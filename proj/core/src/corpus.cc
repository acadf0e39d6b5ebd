#include "gecw/corpus.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gecw/error.h"

namespace gecw {
namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

std::string AtLine(const std::string& where, std::size_t line) {
  return where + ":" + std::to_string(line) + ": ";
}

std::vector<std::string_view> SplitOn(std::string_view text,
                                      std::string_view sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = text.find(sep, pos);
    if (next == std::string_view::npos) {
      parts.push_back(text.substr(pos));
      return parts;
    }
    parts.push_back(text.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

int ParseInt(std::string_view text, const std::string& context) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(context + "expected integer, got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Tokens SplitTokens(std::string_view text) {
  Tokens tokens;
  if (text.empty()) return tokens;
  for (std::string_view piece : SplitOn(text, " ")) {
    if (piece.empty()) throw Error("empty token (stray space)");
    if (std::any_of(piece.begin(), piece.end(), IsSpace)) {
      throw Error("token contains whitespace: '" + std::string(piece) + "'");
    }
    tokens.emplace_back(piece);
  }
  return tokens;
}

std::string JoinTokens(const Tokens& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

Corpus ParseParallel(std::istream& in, std::string name) {
  Corpus corpus;
  corpus.name = std::move(name);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = AtLine(corpus.name, lineno);
    if (line.empty()) throw Error(where + "blank line");
    if (std::count(line.begin(), line.end(), '\t') != 1) {
      throw Error(where + "expected exactly one tab separating source and target");
    }
    const std::size_t tab = line.find('\t');
    ParallelSample sample;
    sample.id = corpus.samples.size();
    try {
      sample.source = SplitTokens(std::string_view(line).substr(0, tab));
      sample.target = SplitTokens(std::string_view(line).substr(tab + 1));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
    if (sample.source.empty()) throw Error(where + "empty source sentence");
    corpus.samples.push_back(std::move(sample));
  }
  if (in.bad()) throw Error(corpus.name + ": read error");
  return corpus;
}

Corpus LoadParallel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return ParseParallel(in, path.string());
}

void WriteParallel(std::ostream& out, const Corpus& corpus) {
  for (const ParallelSample& s : corpus.samples) {
    out << JoinTokens(s.source) << '\t' << JoinTokens(s.target) << '\n';
  }
}

void SaveParallel(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  WriteParallel(out, corpus);
}

std::vector<GoldEditSet> ParseM2(std::istream& in) {
  std::vector<GoldEditSet> result;
  GoldEditSet current;
  bool open = false;
  std::size_t lineno = 0;

  auto finish = [&]() {
    if (!open) return;
    if (current.annotations.empty()) current.annotations[0];
    for (auto& [annotator, edits] : current.annotations) {
      std::sort(edits.begin(), edits.end(),
                [](const GoldEdit& a, const GoldEdit& b) {
                  return std::pair(a.start, a.end) < std::pair(b.start, b.end);
                });
      for (std::size_t i = 1; i < edits.size(); ++i) {
        const GoldEdit& prev = edits[i - 1];
        const GoldEdit& next = edits[i];
        const bool overlap = prev.end > next.start ||
                             (prev.start == next.start && prev.end == next.end);
        if (overlap) {
          throw Error("m2 record ending at line " + std::to_string(lineno) +
                      ": overlapping edits for annotator " +
                      std::to_string(annotator));
        }
      }
    }
    result.push_back(std::move(current));
    current = GoldEditSet{};
    open = false;
  };

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "m2:" + std::to_string(lineno) + ": ";
    if (line.empty()) {
      finish();
      continue;
    }
    if (line.rfind("S ", 0) == 0 || line == "S") {
      finish();
      open = true;
      try {
        current.source = SplitTokens(line.size() > 2 ? line.substr(2) : "");
      } catch (const Error& e) {
        throw Error(where + e.what());
      }
      continue;
    }
    if (line.rfind("A ", 0) != 0) {
      throw Error(where + "expected 'S ' or 'A ' line");
    }
    if (!open) throw Error(where + "edit line before any 'S' line");
    const auto fields = SplitOn(std::string_view(line).substr(2), "|||");
    if (fields.size() != 6) {
      throw Error(where + "edit line must have 6 '|||'-separated fields");
    }
    const auto span = SplitOn(fields[0], " ");
    if (span.size() != 2) throw Error(where + "malformed span '" + std::string(fields[0]) + "'");
    const int start = ParseInt(span[0], where);
    const int end = ParseInt(span[1], where);
    const std::string_view type = fields[1];
    const std::string_view replacement = fields[2];
    const int annotator = ParseInt(fields[5], where);
    if (annotator < 0) throw Error(where + "negative annotator id");

    auto& edits = current.annotations[annotator];
    if (type == "noop" || (start == -1 && end == -1)) continue;

    const int m = static_cast<int>(current.source.size());
    if (start < 0 || start > end || end > m) {
      throw Error(where + "span " + std::to_string(start) + " " +
                  std::to_string(end) + " out of range for " +
                  std::to_string(m) + " source tokens");
    }
    GoldEdit edit;
    edit.start = start;
    edit.end = end;
    edit.annotator = annotator;
    if (replacement != "-NONE-" && !replacement.empty()) {
      try {
        edit.replacement = SplitTokens(replacement);
      } catch (const Error& e) {
        throw Error(where + e.what());
      }
    }
    edits.push_back(std::move(edit));
  }
  if (in.bad()) throw Error("m2: read error");
  finish();
  return result;
}

std::vector<GoldEditSet> LoadM2(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return ParseM2(in);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void WriteM2(std::ostream& out, const std::vector<GoldEditSet>& gold) {
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (i > 0) out << '\n';
    out << "S " << JoinTokens(gold[i].source) << '\n';
    for (const auto& [annotator, edits] : gold[i].annotations) {
      if (edits.empty()) {
        out << "A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||" << annotator
            << '\n';
        continue;
      }
      for (const GoldEdit& e : edits) {
        out << "A " << e.start << ' ' << e.end << "|||X|||"
            << (e.replacement.empty() ? "-NONE-" : JoinTokens(e.replacement))
            << "|||REQUIRED|||-NONE-|||"
            << annotator << '\n';
      }
    }
  }
}

}  // namespace gecw
