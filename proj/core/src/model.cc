#include "gecw/model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "gecw/error.h"
#include "gecw/hash.h"

namespace gecw {
namespace {

constexpr char kMagic[8] = {'G', 'E', 'C', 'W', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
T ToLittle(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

template <typename T>
void WriteLe(std::ostream& out, T value) {
  value = ToLittle(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadLe(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated checkpoint");
  return ToLittle(value);
}

const std::array<std::string, 3> kReserved = {"<pad>", "<unk>", "<s>"};

}  // namespace

void ModelConfig::Validate() const {
  if (embed_dim < 1 || window < 0 || hidden_dim < 1) {
    throw Error("model dimensions must be positive");
  }
  if (token_vocab_size < 3) throw Error("token vocabulary needs the 3 reserved ids");
  if (tag_vocab_size < 2) throw Error("tag vocabulary must hold at least 2 tags");
}

TokenVocab::TokenVocab() : tokens_(kReserved.begin(), kReserved.end()) {
  for (std::size_t i = 0; i < kReserved.size(); ++i) {
    ids_[kReserved[i]] = static_cast<int>(i);
  }
}

TokenVocab TokenVocab::FromList(std::vector<std::string> tokens) {
  TokenVocab v;
  for (std::string& t : tokens) {
    if (v.ids_.count(t)) continue;
    v.ids_[t] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

TokenVocab TokenVocab::Build(const std::vector<Tokens>& sentences) {
  std::set<std::string> distinct;
  for (const Tokens& s : sentences) distinct.insert(s.begin(), s.end());
  return FromList({distinct.begin(), distinct.end()});
}

TokenVocab TokenVocab::Build(const EncodedCorpus& corpus) {
  std::vector<Tokens> sentences;
  sentences.reserve(corpus.samples.size());
  for (const EncodedSample& s : corpus.samples) sentences.push_back(s.source);
  return Build(sentences);
}

int TokenVocab::Id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> TokenVocab::Encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(Id(t));
  return ids;
}

std::uint64_t TokenVocab::hash() const { return HashJoined(tokens_); }

Parameters Parameters::Zeros(const ModelConfig& config) {
  config.Validate();
  Parameters p;
  p.embedding = Matrix::Zero(config.token_vocab_size, config.embed_dim);
  p.hidden_w = Matrix::Zero(config.hidden_dim, config.input_dim());
  p.hidden_b = Vector::Zero(config.hidden_dim);
  p.output_w = Matrix::Zero(config.tag_vocab_size, config.hidden_dim);
  p.output_b = Vector::Zero(config.tag_vocab_size);
  return p;
}

Parameters Parameters::Random(const ModelConfig& config) {
  Parameters p = Zeros(config);
  std::mt19937_64 rng(config.seed);
  for (std::span<double> t : p.tensors()) {
    for (double& x : t) {
      // 53 random mantissa bits -> [0, 1), independent of the standard
      // library's distribution implementation.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      x = -0.1 + 0.2 * u;
    }
  }
  return p;
}

void Parameters::SetZero() {
  for (std::span<double> t : tensors()) std::fill(t.begin(), t.end(), 0.0);
}

void Parameters::AddScaled(const Parameters& other, double scale) {
  auto dst = tensors();
  auto src = other.tensors();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    if (dst[k].size() != src[k].size()) throw Error("parameter shape mismatch");
    for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] += scale * src[k][i];
  }
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

bool Parameters::AllFinite() const {
  for (auto t : tensors()) {
    for (double x : t) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

std::array<std::span<double>, 5> Parameters::tensors() {
  return {std::span<double>(embedding.data(), embedding.size()),
          std::span<double>(hidden_w.data(), hidden_w.size()),
          std::span<double>(hidden_b.data(), hidden_b.size()),
          std::span<double>(output_w.data(), output_w.size()),
          std::span<double>(output_b.data(), output_b.size())};
}

std::array<std::span<const double>, 5> Parameters::tensors() const {
  return {std::span<const double>(embedding.data(), embedding.size()),
          std::span<const double>(hidden_w.data(), hidden_w.size()),
          std::span<const double>(hidden_b.data(), hidden_b.size()),
          std::span<const double>(output_w.data(), output_w.size()),
          std::span<const double>(output_b.data(), output_b.size())};
}

ForwardCache Forward(const Parameters& params, const ModelConfig& config,
                     std::span<const int> source_ids, int position) {
  const int m = static_cast<int>(source_ids.size());
  if (position < 0 || position > m) {
    throw Error("position " + std::to_string(position) + " outside [0, " +
                std::to_string(m) + "]");
  }
  ForwardCache cache;
  cache.position = position;
  cache.context.resize(config.context_width());
  cache.input.resize(config.input_dim());
  for (int k = 0; k < config.context_width(); ++k) {
    const int offset = k - config.window;
    const int q = position + offset;
    int id = TokenVocab::kPad;
    if (position == 0 && offset == 0) {
      id = TokenVocab::kStart;
    } else if (q >= 1 && q <= m) {
      id = source_ids[q - 1];
    }
    cache.context[k] = id;
    cache.input.segment(k * config.embed_dim, config.embed_dim) =
        params.embedding.row(id).transpose();
  }
  cache.hidden = (params.hidden_w * cache.input + params.hidden_b).array().tanh();
  cache.logits = params.output_w * cache.hidden + params.output_b;
  return cache;
}

void Backward(const Parameters& params, const ForwardCache& cache,
              const Vector& dlogits, Parameters& grad) {
  if (!cache.valid()) throw Error("backward called without a forward cache");
  grad.output_w.noalias() += dlogits * cache.hidden.transpose();
  grad.output_b += dlogits;
  const Vector dz = ((params.output_w.transpose() * dlogits).array() *
                     (1.0 - cache.hidden.array().square()))
                        .matrix();
  grad.hidden_w.noalias() += dz * cache.input.transpose();
  grad.hidden_b += dz;
  const Vector dx = params.hidden_w.transpose() * dz;
  const int e = static_cast<int>(params.embedding.cols());
  for (std::size_t k = 0; k < cache.context.size(); ++k) {
    grad.embedding.row(cache.context[k]) +=
        dx.segment(static_cast<int>(k) * e, e).transpose();
  }
}

Vector LogSoftmax(const Vector& logits) {
  const double max = logits.maxCoeff();
  const double lse = max + std::log((logits.array() - max).exp().sum());
  return logits.array() - lse;
}

Vector Softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

int Argmax(const Vector& values) {
  int best = 0;
  for (int i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Tagger::Tagger(ModelConfig config, TokenVocab tokens, std::uint64_t tag_vocab_hash)
    : config_(config), tokens_(std::move(tokens)), tag_vocab_hash_(tag_vocab_hash) {
  config_.token_vocab_size = tokens_.size();
  config_.Validate();
  params_.value = Parameters::Random(config_);
  params_.grad = Parameters::Zeros(config_);
}

std::vector<int> Tagger::PredictTags(const Tokens& source) const {
  const std::vector<int> ids = EncodeSource(source);
  std::vector<int> tags(source.size() + 1);
  for (int pos = 0; pos <= static_cast<int>(source.size()); ++pos) {
    tags[pos] = Argmax(Forward(ids, pos).logits);
  }
  return tags;
}

void Tagger::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  WriteLe<std::uint32_t>(out, kCheckpointVersion);
  WriteLe<std::uint32_t>(out, config_.embed_dim);
  WriteLe<std::uint32_t>(out, config_.window);
  WriteLe<std::uint32_t>(out, config_.hidden_dim);
  WriteLe<std::uint32_t>(out, config_.token_vocab_size);
  WriteLe<std::uint32_t>(out, config_.tag_vocab_size);
  WriteLe<std::uint64_t>(out, config_.seed);
  WriteLe<std::uint64_t>(out, tokens_.hash());
  WriteLe<std::uint64_t>(out, tag_vocab_hash_);
  for (std::span<const double> t : params_.value.tensors()) {
    for (double x : t) WriteLe<double>(out, x);
  }
  WriteLe<std::uint64_t>(out, tokens_.tokens().size());
  for (const std::string& tok : tokens_.tokens()) {
    WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(tok.size()));
    out.write(tok.data(), static_cast<std::streamsize>(tok.size()));
  }
  if (!out) throw Error("write failed: " + path.string());
}

Tagger Tagger::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
      throw Error("not a gecw checkpoint");
    }
    const auto version = ReadLe<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
      throw Error("unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig config;
    config.embed_dim = static_cast<int>(ReadLe<std::uint32_t>(in));
    config.window = static_cast<int>(ReadLe<std::uint32_t>(in));
    config.hidden_dim = static_cast<int>(ReadLe<std::uint32_t>(in));
    config.token_vocab_size = static_cast<int>(ReadLe<std::uint32_t>(in));
    config.tag_vocab_size = static_cast<int>(ReadLe<std::uint32_t>(in));
    config.seed = ReadLe<std::uint64_t>(in);
    const auto token_hash = ReadLe<std::uint64_t>(in);
    const auto tag_hash = ReadLe<std::uint64_t>(in);
    config.Validate();

    Parameters value = Parameters::Zeros(config);
    for (std::span<double> t : value.tensors()) {
      for (double& x : t) x = ReadLe<double>(in);
    }
    const auto n = ReadLe<std::uint64_t>(in);
    std::vector<std::string> tokens;
    tokens.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto len = ReadLe<std::uint32_t>(in);
      std::string tok(len, '\0');
      in.read(tok.data(), len);
      if (!in) throw Error("truncated checkpoint");
      tokens.push_back(std::move(tok));
    }
    if (tokens.size() < kReserved.size() ||
        !std::equal(kReserved.begin(), kReserved.end(), tokens.begin())) {
      throw Error("checkpoint token list lacks reserved entries");
    }
    TokenVocab vocab = TokenVocab::FromList(
        std::vector<std::string>(tokens.begin() + kReserved.size(), tokens.end()));
    if (vocab.hash() != token_hash || vocab.size() != config.token_vocab_size) {
      throw Error("token vocabulary hash mismatch");
    }
    Tagger tagger;
    tagger.config_ = config;
    tagger.tokens_ = std::move(vocab);
    tagger.tag_vocab_hash_ = tag_hash;
    tagger.params_.value = std::move(value);
    tagger.params_.grad = Parameters::Zeros(config);
    return tagger;
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace gecw
