#ifndef GECW_MODEL_H_
#define GECW_MODEL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "gecw/align.h"
#include "gecw/corpus.h"

namespace gecw {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ModelConfig {
  int embed_dim = 32;
  int window = 2;  // context tokens on each side
  int hidden_dim = 64;
  int token_vocab_size = 0;
  int tag_vocab_size = 0;
  std::uint64_t seed = 0;

  int context_width() const { return 2 * window + 1; }
  int input_dim() const { return context_width() * embed_dim; }
  void Validate() const;  // throws gecw::Error

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Input vocabulary of the tagger. Ids 0..2 are reserved.
class TokenVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kStart = 2;

  TokenVocab();
  // Distinct tokens in lexicographic order after the reserved entries.
  static TokenVocab Build(const std::vector<Tokens>& sentences);
  static TokenVocab Build(const EncodedCorpus& corpus);
  static TokenVocab FromList(std::vector<std::string> tokens);

  int Id(const std::string& token) const;
  std::vector<int> Encode(const Tokens& tokens) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// All learnable tensors, in declaration order:
// embedding [V x e], hidden_w [H x (2w+1)e], hidden_b [H],
// output_w [|E| x H], output_b [|E|].
struct Parameters {
  Matrix embedding;
  Matrix hidden_w;
  Vector hidden_b;
  Matrix output_w;
  Vector output_b;

  static Parameters Zeros(const ModelConfig& config);
  // Uniform in [-0.1, 0.1] from a 64-bit Mersenne Twister seeded with
  // config.seed, consumed tensor by tensor in declaration order.
  static Parameters Random(const ModelConfig& config);

  void SetZero();
  void AddScaled(const Parameters& other, double scale);
  std::size_t count() const;
  bool AllFinite() const;

  std::array<std::span<double>, 5> tensors();
  std::array<std::span<const double>, 5> tensors() const;
  static constexpr std::array<const char*, 5> kNames = {
      "embedding", "hidden_w", "hidden_b", "output_w", "output_b"};
};

// Values and gradient accumulators of the same shape.
struct ModelParams {
  Parameters value;
  Parameters grad;
};

struct ForwardCache {
  int position = -1;
  std::vector<int> context;  // token ids feeding each window slot
  Vector input;              // concatenated embeddings
  Vector hidden;             // tanh activations
  Vector logits;

  bool valid() const { return position >= 0; }
};

// Logits for tag slot `position` of a sentence of token ids
// (0 = sentence-start slot, i = token i). Window neighbours outside the
// sentence read the PAD embedding; slot 0 is centred on START.
ForwardCache Forward(const Parameters& params, const ModelConfig& config,
                     std::span<const int> source_ids, int position);

// Adds the gradient of a loss term with d(term)/d(logits) == dlogits into
// `grad`. Throws if the cache is not populated.
void Backward(const Parameters& params, const ForwardCache& cache,
              const Vector& dlogits, Parameters& grad);

Vector Softmax(const Vector& logits);
Vector LogSoftmax(const Vector& logits);

// First index of the maximum entry.
int Argmax(const Vector& values);

// A tagger bound to its input and output vocabularies.
class Tagger {
 public:
  Tagger() = default;
  Tagger(ModelConfig config, TokenVocab tokens, std::uint64_t tag_vocab_hash);

  const ModelConfig& config() const { return config_; }
  const TokenVocab& tokens() const { return tokens_; }
  std::uint64_t tag_vocab_hash() const { return tag_vocab_hash_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  std::vector<int> EncodeSource(const Tokens& source) const {
    return tokens_.Encode(source);
  }
  ForwardCache Forward(std::span<const int> ids, int position) const {
    return gecw::Forward(params_.value, config_, ids, position);
  }
  // Argmax tag index for every slot 0..m.
  std::vector<int> PredictTags(const Tokens& source) const;

  // Binary checkpoint: header, float64 little-endian tensors, token list.
  void Save(const std::filesystem::path& path) const;
  static Tagger Load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  TokenVocab tokens_;
  std::uint64_t tag_vocab_hash_ = 0;
  ModelParams params_;
};

}  // namespace gecw

#endif  // GECW_MODEL_H_
