#include "gecw/teacher_signal.h"

#include <cmath>
#include <sstream>

#include "gecw/error.h"
#include "gecw/hash.h"
#include "gecw/parallel.h"
#include "json.hpp"
#include "json_io.h"

namespace gecw {
namespace {

using json = nlohmann::json;

constexpr double kTolerance = 1e-6;

double RawEntropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void CheckValues(const TeacherSignal& s, const SignalHeader& header,
                 ValidationReport& report) {
  auto add = [&](std::optional<std::size_t> pos, std::string msg) {
    report.violations.push_back({s.sample_id, pos, std::move(msg)});
  };
  for (std::size_t i = 0; i < s.positions.size(); ++i) {
    const PositionStat& st = s.positions[i];
    if (!(st.p_gold >= 0.0 && st.p_gold <= 1.0)) {
      add(i, "p_gold " + std::to_string(st.p_gold) + " outside [0, 1]");
    }
    if (!(st.entropy_norm >= 0.0 && st.entropy_norm <= 1.0)) {
      add(i, "entropy_norm " + std::to_string(st.entropy_norm) + " outside [0, 1]");
    }
  }
  if (header.has_full_dist != s.full_dist.has_value()) {
    add(std::nullopt, header.has_full_dist ? "missing dist" : "unexpected dist");
    return;
  }
  if (!s.full_dist) return;
  const auto& dists = *s.full_dist;
  if (dists.size() != s.positions.size()) {
    add(std::nullopt, "dist has " + std::to_string(dists.size()) +
                          " rows for " + std::to_string(s.positions.size()) +
                          " positions");
    return;
  }
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const auto& d = dists[i];
    if (static_cast<int>(d.size()) != header.vocab_size) {
      add(i, "dist length " + std::to_string(d.size()) + " != vocab_size");
      continue;
    }
    double h = 0.0;
    try {
      h = EntropyNorm(d, header.vocab_size);
    } catch (const Error& e) {
      add(i, e.what());
      continue;
    }
    if (std::abs(h - s.positions[i].entropy_norm) > kTolerance) {
      add(i, "entropy_norm disagrees with dist");
    }
  }
}

}  // namespace

std::string ToString(Manner manner) {
  return manner == Manner::kSeq2Edit ? "seq2edit" : "seq2seq";
}

Manner ParseManner(const std::string& text) {
  if (text == "seq2edit") return Manner::kSeq2Edit;
  if (text == "seq2seq") return Manner::kSeq2Seq;
  throw Error("unknown manner '" + text + "'");
}

double EntropyNorm(std::span<const double> dist, int vocab_size) {
  if (vocab_size < 2) throw Error("vocab_size must be >= 2 to normalize entropy");
  if (static_cast<int>(dist.size()) != vocab_size) {
    throw Error("distribution length " + std::to_string(dist.size()) +
                " != vocab_size " + std::to_string(vocab_size));
  }
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0)) throw Error("negative or NaN probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    throw Error("distribution sums to " + std::to_string(sum));
  }
  return RawEntropy(dist) / std::log(static_cast<double>(vocab_size));
}

void SaveSignals(const std::filesystem::path& path, const SignalFile& file) {
  auto out = internal::OpenOut(path);
  const SignalHeader& h = file.header;
  json header = {{"format", "gecw.signals"},
                 {"vocab_size", h.vocab_size},
                 {"vocab_hash", HashToString(h.vocab_hash)},
                 {"manner", ToString(h.manner)},
                 {"has_full_dist", h.has_full_dist},
                 {"includes_eos", h.includes_eos}};
  out << header.dump() << '\n';
  for (const TeacherSignal& s : file.signals) {
    json p_gold = json::array();
    json entropy = json::array();
    for (const PositionStat& st : s.positions) {
      p_gold.push_back(st.p_gold);
      entropy.push_back(st.entropy_norm);
    }
    json rec = {{"id", s.sample_id}, {"p_gold", p_gold}, {"entropy_norm", entropy}};
    if (s.full_dist) rec["dist"] = *s.full_dist;
    out << rec.dump() << '\n';
  }
}

SignalFile LoadSignals(const std::filesystem::path& path) {
  auto in = internal::OpenIn(path);
  SignalFile file;
  std::string line;
  std::size_t lineno = 0;
  try {
    if (!std::getline(in, line)) throw Error("empty file");
    ++lineno;
    json header = json::parse(line);
    file.header.vocab_size = header.at("vocab_size").get<int>();
    file.header.vocab_hash = HashFromString(header.at("vocab_hash").get<std::string>());
    file.header.manner = ParseManner(header.at("manner").get<std::string>());
    file.header.has_full_dist = header.at("has_full_dist").get<bool>();
    file.header.includes_eos = header.value("includes_eos", false);
    if (file.header.vocab_size < 2) throw Error("vocab_size must be >= 2");
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json rec = json::parse(line);
      TeacherSignal s;
      s.sample_id = rec.at("id").get<std::size_t>();
      const auto p_gold = rec.at("p_gold").get<std::vector<double>>();
      const auto entropy = rec.at("entropy_norm").get<std::vector<double>>();
      if (p_gold.size() != entropy.size()) {
        throw Error("p_gold and entropy_norm lengths differ");
      }
      for (std::size_t i = 0; i < p_gold.size(); ++i) {
        s.positions.push_back({p_gold[i], entropy[i]});
      }
      if (rec.contains("dist")) {
        s.full_dist = rec["dist"].get<std::vector<std::vector<double>>>();
      }
      file.signals.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(internal::Where(path, lineno) + e.what());
  } catch (const Error& e) {
    throw Error(internal::Where(path, lineno) + e.what());
  }
  return file;
}

std::string Violation::ToString() const {
  std::string out = "sample " + std::to_string(sample_id);
  if (position) out += " position " + std::to_string(*position);
  return out + ": " + message;
}

std::string ValidationReport::Summary(std::size_t max_lines) const {
  std::ostringstream out;
  out << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < max_lines; ++i) {
    out << "\n  " << violations[i].ToString();
  }
  if (violations.size() > max_lines) out << "\n  ...";
  return out.str();
}

ValidationReport ValidateSignalValues(const SignalFile& file) {
  ValidationReport report;
  for (const TeacherSignal& s : file.signals) CheckValues(s, file.header, report);
  return report;
}

ValidationReport ValidateSignals(const SignalFile& file,
                                 const EncodedCorpus& corpus) {
  ValidationReport report;
  if (file.header.manner != Manner::kSeq2Edit) {
    report.violations.push_back({0, std::nullopt, "expected a seq2edit signal file"});
    return report;
  }
  if (file.header.vocab_hash != corpus.vocab_hash) {
    report.violations.push_back(
        {0, std::nullopt,
         "vocab hash " + HashToString(file.header.vocab_hash) +
             " does not match corpus " + HashToString(corpus.vocab_hash)});
  }
  if (static_cast<std::size_t>(file.header.vocab_size) != corpus.num_tags) {
    report.violations.push_back(
        {0, std::nullopt, "vocab_size " + std::to_string(file.header.vocab_size) +
                              " != corpus tag count " +
                              std::to_string(corpus.num_tags)});
  }
  if (file.signals.size() != corpus.samples.size()) {
    report.violations.push_back(
        {0, std::nullopt, std::to_string(file.signals.size()) + " signals for " +
                              std::to_string(corpus.samples.size()) + " samples"});
  }
  const std::size_t n = std::min(file.signals.size(), corpus.samples.size());
  for (std::size_t i = 0; i < n; ++i) {
    const TeacherSignal& s = file.signals[i];
    const EncodedSample& c = corpus.samples[i];
    if (s.sample_id != c.id) {
      report.violations.push_back({s.sample_id, std::nullopt,
                                   "expected sample id " + std::to_string(c.id)});
      continue;
    }
    if (s.positions.size() != c.tags.size()) {
      report.violations.push_back(
          {s.sample_id, std::nullopt,
           std::to_string(s.positions.size()) + " positions for " +
               std::to_string(c.tags.size()) + " tag slots"});
    }
    CheckValues(s, file.header, report);
  }
  return report;
}

ValidationReport ValidateSignals(const SignalFile& file, const Corpus& corpus) {
  ValidationReport report;
  if (file.header.manner != Manner::kSeq2Seq) {
    report.violations.push_back({0, std::nullopt, "expected a seq2seq signal file"});
    return report;
  }
  if (file.signals.size() != corpus.samples.size()) {
    report.violations.push_back(
        {0, std::nullopt, std::to_string(file.signals.size()) + " signals for " +
                              std::to_string(corpus.samples.size()) + " samples"});
  }
  const std::size_t extra = file.header.includes_eos ? 1 : 0;
  const std::size_t n = std::min(file.signals.size(), corpus.samples.size());
  for (std::size_t i = 0; i < n; ++i) {
    const TeacherSignal& s = file.signals[i];
    const ParallelSample& c = corpus.samples[i];
    if (s.sample_id != c.id) {
      report.violations.push_back({s.sample_id, std::nullopt,
                                   "expected sample id " + std::to_string(c.id)});
      continue;
    }
    if (s.positions.size() != c.target.size() + extra) {
      report.violations.push_back(
          {s.sample_id, std::nullopt,
           std::to_string(s.positions.size()) + " positions for " +
               std::to_string(c.target.size() + extra) + " target positions"});
    }
    CheckValues(s, file.header, report);
  }
  return report;
}

void RequireValid(const ValidationReport& report, const std::string& what) {
  if (!report.ok()) throw Error(what + ": " + report.Summary());
}

SignalFile GenerateSignals(const Tagger& tagger, const EncodedCorpus& corpus,
                           bool with_full_dist, int workers) {
  if (tagger.tag_vocab_hash() != corpus.vocab_hash) {
    throw Error("model tag-vocab hash " + HashToString(tagger.tag_vocab_hash()) +
                " does not match corpus " + HashToString(corpus.vocab_hash));
  }
  const int num_tags = tagger.config().tag_vocab_size;
  if (static_cast<std::size_t>(num_tags) != corpus.num_tags) {
    throw Error("model predicts " + std::to_string(num_tags) + " tags, corpus has " +
                std::to_string(corpus.num_tags));
  }
  SignalFile file;
  file.header.vocab_size = num_tags;
  file.header.vocab_hash = corpus.vocab_hash;
  file.header.manner = Manner::kSeq2Edit;
  file.header.has_full_dist = with_full_dist;
  file.signals.resize(corpus.samples.size());
  const double log_size = std::log(static_cast<double>(num_tags));

  ParallelFor(corpus.samples.size(), workers, [&](std::size_t i) {
    const EncodedSample& sample = corpus.samples[i];
    const std::vector<int> ids = tagger.EncodeSource(sample.source);
    TeacherSignal& s = file.signals[i];
    s.sample_id = sample.id;
    s.positions.resize(sample.tags.size());
    if (with_full_dist) s.full_dist.emplace(sample.tags.size());
    for (std::size_t pos = 0; pos < sample.tags.size(); ++pos) {
      const Vector p = Softmax(tagger.Forward(ids, static_cast<int>(pos)).logits);
      std::span<const double> dist(p.data(), static_cast<std::size_t>(p.size()));
      s.positions[pos].p_gold = p[sample.tags[pos]];
      s.positions[pos].entropy_norm = std::min(1.0, RawEntropy(dist) / log_size);
      if (with_full_dist) (*s.full_dist)[pos].assign(dist.begin(), dist.end());
    }
  });
  return file;
}

}  // namespace gecw
