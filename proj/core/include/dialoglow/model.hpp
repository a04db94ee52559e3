#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialoglow/corpus.hpp"
#include "dialoglow/ops.hpp"
#include "dialoglow/preprocess.hpp"
#include "dialoglow/rng.hpp"
#include "dialoglow/tensor.hpp"
#include "dialoglow/vocab.hpp"

namespace dialoglow {

enum class Variant { BiLstm, SaBiLstm };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);  // "bilstm" | "sa-bilstm"

struct ModelConfig {
  std::size_t embedding_dim = 300;
  std::size_t hidden = 256;  // per direction
  std::size_t n_max = 25;
  std::vector<std::size_t> fc_dims{128, 128};
  std::size_t num_labels = kNumLabels;
  double dropout = 0.3;
  Variant variant = Variant::SaBiLstm;

  /// Attention scaling dimension; always twice the per-direction width.
  std::size_t attention_dim() const { return 2 * hidden; }
  std::size_t sentence_dim() const { return 2 * hidden; }

  void validate() const;  // throws std::invalid_argument
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

using TensorMap = std::map<std::string, ad::Tensor>;

namespace param {
inline constexpr const char* kEmbedding = "embedding";
inline constexpr const char* kLstmForwardWeight = "lstm.fwd.weight";
inline constexpr const char* kLstmForwardBias = "lstm.fwd.bias";
inline constexpr const char* kLstmBackwardWeight = "lstm.bwd.weight";
inline constexpr const char* kLstmBackwardBias = "lstm.bwd.bias";
inline constexpr const char* kOutWeight = "out.weight";
inline constexpr const char* kOutBias = "out.bias";
std::string fc_weight(std::size_t layer);
std::string fc_bias(std::size_t layer);
}  // namespace param

// All trainable tensors, by name. LSTM weights are [4l x (d+l)] with gate
// blocks stacked input, forget, candidate, output; the first d columns act on
// the word vector. Dense weights are [out x in].
class ModelParams {
 public:
  ModelParams() = default;

  /// Glorot-uniform weights, zero biases except the forget-gate slice (1.0).
  /// Embedding rows are uniform in [-0.05, 0.05] with a zero <pad> row.
  static ModelParams initialize(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed);

  static std::size_t parameter_count(const ModelConfig& cfg, std::size_t vocab_size);
  std::size_t parameter_count() const;

  TensorMap& tensors() { return tensors_; }
  const TensorMap& tensors() const { return tensors_; }
  ad::Tensor& at(const std::string& name) { return tensors_.at(name); }
  const ad::Tensor& at(const std::string& name) const { return tensors_.at(name); }

  /// Names in the fixed binding order used by bind_params().
  static std::vector<std::string> names(const ModelConfig& cfg);

  /// Throws std::invalid_argument when a tensor is missing or mis-shaped.
  void check_shapes(const ModelConfig& cfg, std::size_t vocab_size) const;

  friend bool operator==(const ModelParams&, const ModelParams&);

 private:
  TensorMap tensors_;
};

struct LstmVars {
  ad::Var weight;            // [4l x (d+l)]
  ad::Var bias;              // [4l]
  ad::Var input_weight;      // first d columns
  ad::Var recurrent_weight;  // last l columns
};

struct DenseVars {
  ad::Var weight;
  ad::Var bias;
};

struct BoundParams {
  ad::Var embedding;
  LstmVars forward;
  LstmVars backward;
  std::vector<DenseVars> hidden;
  DenseVars out;
};

/// Puts every tensor on `tape`. With `grads` non-null, gradients accumulate
/// into same-named entries (created as zeros); the embedding only receives a
/// gradient when `train_embedding` is set.
BoundParams bind_params(ad::Tape& tape, const ModelParams& params, const ModelConfig& cfg, TensorMap* grads,
                 bool train_embedding = true);

/// Rebuilds the structured view from leaves ordered as ModelParams::names().
BoundParams bind_params(std::span<const ad::Var> leaves, const ModelConfig& cfg);

struct LstmState {
  ad::Var h;
  ad::Var c;
};

/// One LSTM step from the full gate matrix: z = [w_t, h_prev] W^T + b,
/// i,f,o = sigmoid, g = tanh, c = f*c_prev + i*g, h = o*tanh(c).
LstmState lstm_cell_step(const ad::Var& w_t, const ad::Var& h_prev, const ad::Var& c_prev,
                         const LstmVars& p, std::size_t hidden);

/// BiLSTM over the first `valid_len` ids followed by max-over-time pooling.
/// Returns a [1 x 2l] row.
ad::Var encode_sentence(const BoundParams& p, std::span<const TokenId> ids, std::size_t valid_len,
                        const ModelConfig& cfg);

/// U U^T / sqrt(d_k) over all n_pad rows; entries with i >= n or j >= n are
/// excluded by attention_mask() downstream.
ad::Var attention_scores(const ad::Var& u, std::size_t n, std::size_t d_k);

/// Row-major [n_pad x n_pad] mask with true where i < n and j < n.
std::vector<bool> attention_mask(std::size_t n_pad, std::size_t n);

/// Masked row softmax of attention_scores; rows >= n are zero.
ad::Var attention_weights(const ad::Var& u, std::size_t n, std::size_t d_k);

/// U'_i = sum_{j<n} softmax(F_i)_j U_j for i < n; rows >= n are zero.
ad::Var self_attend(const ad::Var& u, std::size_t n, std::size_t d_k);

/// Hidden layers (affine, ReLU, dropout) then the output projection.
ad::Var classify(const ad::Var& u, const BoundParams& p, const ModelConfig& cfg, ad::Mode mode,
                 CounterRng& rng);

/// A window with every utterance already token-encoded.
struct EncodedWindow {
  std::string source_dialogue_id;
  std::size_t start_index = 0;
  std::vector<std::vector<TokenId>> utterances;
  std::vector<EmotionLabel> golds;

  std::size_t size() const { return utterances.size(); }
};

EncodedWindow encode_window(const DialogueWindow& window, const TextCleaner& cleaner, const Vocab& vocab);

/// Windows of every dialogue in order, encoded.
std::vector<EncodedWindow> encode_dataset(const Dataset& ds, std::size_t n_max, const TextCleaner& cleaner,
                                          const Vocab& vocab);

/// Logits ([n x num_labels]) for the n real utterances of `window`. The
/// sentence matrix is padded to `n_pad` rows (0 means n) before attention.
/// The BiLSTM variant skips attention. Dropout sits on the classifier input
/// and after each hidden layer.
ad::Var forward_window(const BoundParams& p, const EncodedWindow& window, const ModelConfig& cfg,
                       ad::Mode mode, CounterRng& rng, std::size_t n_pad = 0);

/// Sentence matrix [k x 2l] for independent utterances (BiLSTM batches).
ad::Var encode_batch(const BoundParams& p, std::span<const std::vector<TokenId>> utterances,
                     const ModelConfig& cfg);

/// Index of the largest of the four considered logits in `row` (first on ties).
EmotionLabel predict_label(std::span<const double> logits_row);

}  // namespace dialoglow
