#include "gecw/weights.h"

#include <algorithm>

#include "gecw/error.h"
#include "gecw/hash.h"
#include "json.hpp"
#include "json_io.h"

namespace gecw {

using json = nlohmann::json;

void WeightConfig::Validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw Error("epsilon must lie in (0, 1), got " + std::to_string(epsilon));
  }
}

double Diversity(const TeacherSignal& signal) {
  if (signal.positions.empty()) {
    throw Error("sample " + std::to_string(signal.sample_id) + " has no positions");
  }
  double sum = 0.0;
  for (const PositionStat& st : signal.positions) sum += st.entropy_norm;
  return sum / static_cast<double>(signal.positions.size());
}

double SentenceWeight(double div, const WeightConfig& config) {
  config.Validate();
  const double eps = config.epsilon;
  return std::max(std::log(div + eps) / std::log(eps), eps);
}

std::vector<SampleWeights> ComputeWeights(const SignalFile& signals,
                                          const WeightConfig& config) {
  config.Validate();
  RequireValid(ValidateSignalValues(signals), "teacher signals");
  std::vector<SampleWeights> out;
  out.reserve(signals.signals.size());
  for (const TeacherSignal& s : signals.signals) {
    SampleWeights w;
    w.sample_id = s.sample_id;
    w.w_sent = config.use_sent ? SentenceWeight(Diversity(s), config) : 1.0;
    w.w_token.reserve(s.positions.size());
    for (const PositionStat& st : s.positions) {
      w.w_token.push_back(config.use_token ? TokenWeight(st) : 1.0);
    }
    out.push_back(std::move(w));
  }
  return out;
}

void SaveWeights(const std::filesystem::path& path, const WeightsFile& file) {
  auto out = internal::OpenOut(path);
  json header = {{"format", "gecw.weights"},
                 {"epsilon", file.config.epsilon},
                 {"use_token", file.config.use_token},
                 {"use_sent", file.config.use_sent},
                 {"signal_file_hash", HashToString(file.signal_file_hash)},
                 {"vocab_hash", HashToString(file.vocab_hash)}};
  out << header.dump() << '\n';
  for (const SampleWeights& w : file.weights) {
    json rec = {{"id", w.sample_id}, {"w_sent", w.w_sent}, {"w_token", w.w_token}};
    out << rec.dump() << '\n';
  }
}

WeightsFile LoadWeights(const std::filesystem::path& path) {
  auto in = internal::OpenIn(path);
  WeightsFile file;
  std::string line;
  std::size_t lineno = 0;
  try {
    if (!std::getline(in, line)) throw Error("empty file");
    ++lineno;
    json header = json::parse(line);
    file.config.epsilon = header.at("epsilon").get<double>();
    file.config.use_token = header.at("use_token").get<bool>();
    file.config.use_sent = header.at("use_sent").get<bool>();
    file.config.Validate();
    file.signal_file_hash =
        HashFromString(header.at("signal_file_hash").get<std::string>());
    file.vocab_hash = HashFromString(header.at("vocab_hash").get<std::string>());
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json rec = json::parse(line);
      SampleWeights w;
      w.sample_id = rec.at("id").get<std::size_t>();
      w.w_sent = rec.at("w_sent").get<double>();
      w.w_token = rec.at("w_token").get<std::vector<double>>();
      file.weights.push_back(std::move(w));
    }
  } catch (const json::exception& e) {
    throw Error(internal::Where(path, lineno) + e.what());
  } catch (const Error& e) {
    throw Error(internal::Where(path, lineno) + e.what());
  }
  return file;
}

}  // namespace gecw
