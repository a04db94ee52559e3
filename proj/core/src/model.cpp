#include "dialoglow/model.hpp"

#include <cmath>
#include <stdexcept>

#include "dialoglow/embeddings.hpp"

namespace dialoglow {

using ad::Tensor;
using ad::Var;

std::string_view to_string(Variant variant) {
  return variant == Variant::BiLstm ? "bilstm" : "sa-bilstm";
}

Variant parse_variant(std::string_view text) {
  if (text == "bilstm") {
    return Variant::BiLstm;
  }
  if (text == "sa-bilstm") {
    return Variant::SaBiLstm;
  }
  throw std::invalid_argument("unknown variant '" + std::string(text) + "' (expected bilstm or sa-bilstm)");
}

void ModelConfig::validate() const {
  if (embedding_dim == 0 || hidden == 0) {
    throw std::invalid_argument("model config: embedding_dim and hidden must be positive");
  }
  if (n_max == 0) {
    throw std::invalid_argument("model config: n_max must be at least 1");
  }
  if (fc_dims.empty()) {
    throw std::invalid_argument("model config: fc_dims must not be empty");
  }
  for (auto d : fc_dims) {
    if (d == 0) {
      throw std::invalid_argument("model config: fc_dims entries must be positive");
    }
  }
  if (num_labels != kNumLabels) {
    throw std::invalid_argument("model config: num_labels must be " + std::to_string(kNumLabels));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("model config: dropout must lie in [0, 1)");
  }
}

nlohmann::ordered_json ModelConfig::to_json() const {
  return {{"embedding_dim", embedding_dim},
          {"hidden", hidden},
          {"attention_dim", attention_dim()},
          {"n_max", n_max},
          {"fc_dims", fc_dims},
          {"num_labels", num_labels},
          {"dropout", dropout},
          {"variant", to_string(variant)}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  cfg.hidden = j.at("hidden").get<std::size_t>();
  cfg.n_max = j.at("n_max").get<std::size_t>();
  cfg.fc_dims = j.at("fc_dims").get<std::vector<std::size_t>>();
  cfg.num_labels = j.at("num_labels").get<std::size_t>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  cfg.validate();
  return cfg;
}

namespace param {
std::string fc_weight(std::size_t layer) { return "fc." + std::to_string(layer) + ".weight"; }
std::string fc_bias(std::size_t layer) { return "fc." + std::to_string(layer) + ".bias"; }
}  // namespace param

namespace {

std::map<std::string, ad::Shape> expected_shapes(const ModelConfig& cfg, std::size_t vocab_size) {
  const std::size_t d = cfg.embedding_dim, l = cfg.hidden;
  std::map<std::string, ad::Shape> shapes;
  shapes[param::kEmbedding] = {vocab_size, d};
  shapes[param::kLstmForwardWeight] = {4 * l, d + l};
  shapes[param::kLstmForwardBias] = {4 * l};
  shapes[param::kLstmBackwardWeight] = {4 * l, d + l};
  shapes[param::kLstmBackwardBias] = {4 * l};
  std::size_t in = cfg.sentence_dim();
  for (std::size_t k = 0; k < cfg.fc_dims.size(); ++k) {
    shapes[param::fc_weight(k)] = {cfg.fc_dims[k], in};
    shapes[param::fc_bias(k)] = {cfg.fc_dims[k]};
    in = cfg.fc_dims[k];
  }
  shapes[param::kOutWeight] = {cfg.num_labels, in};
  shapes[param::kOutBias] = {cfg.num_labels};
  return shapes;
}

std::uint64_t name_stream(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  }
  return h;
}

Tensor glorot(const ad::Shape& shape, std::uint64_t seed, const std::string& name) {
  Tensor t(shape);
  const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
  CounterRng rng(seed, name_stream(name));
  for (double& v : t.values()) {
    v = rng.uniform(-limit, limit);
  }
  return t;
}

}  // namespace

std::vector<std::string> ModelParams::names(const ModelConfig& cfg) {
  std::vector<std::string> out = {param::kEmbedding, param::kLstmForwardWeight, param::kLstmForwardBias,
                                  param::kLstmBackwardWeight, param::kLstmBackwardBias};
  for (std::size_t k = 0; k < cfg.fc_dims.size(); ++k) {
    out.push_back(param::fc_weight(k));
    out.push_back(param::fc_bias(k));
  }
  out.emplace_back(param::kOutWeight);
  out.emplace_back(param::kOutBias);
  return out;
}

ModelParams ModelParams::initialize(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  for (const auto& [name, shape] : expected_shapes(cfg, vocab_size)) {
    if (name == param::kEmbedding) {
      p.tensors_[name] = random_embedding_matrix(shape[0], shape[1], seed);
    } else if (shape.size() == 2) {
      p.tensors_[name] = glorot(shape, seed, name);
    } else {
      p.tensors_[name] = Tensor(shape);
    }
  }
  const std::size_t l = cfg.hidden;
  for (const char* bias : {param::kLstmForwardBias, param::kLstmBackwardBias}) {
    Tensor& b = p.tensors_[bias];
    for (std::size_t k = l; k < 2 * l; ++k) {
      b[k] = 1.0;
    }
  }
  return p;
}

std::size_t ModelParams::parameter_count(const ModelConfig& cfg, std::size_t vocab_size) {
  std::size_t total = 0;
  for (const auto& [name, shape] : expected_shapes(cfg, vocab_size)) {
    total += ad::element_count(shape);
  }
  return total;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : tensors_) {
    total += t.size();
  }
  return total;
}

void ModelParams::check_shapes(const ModelConfig& cfg, std::size_t vocab_size) const {
  const auto shapes = expected_shapes(cfg, vocab_size);
  if (shapes.size() != tensors_.size()) {
    throw std::invalid_argument("model parameters: expected " + std::to_string(shapes.size()) + " tensors, found " +
                                std::to_string(tensors_.size()));
  }
  for (const auto& [name, shape] : shapes) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) {
      throw std::invalid_argument("model parameters: missing tensor '" + name + "'");
    }
    if (it->second.shape() != shape) {
      throw std::invalid_argument("model parameters: tensor '" + name + "' has shape " +
                                  ad::to_string(it->second.shape()) + ", expected " + ad::to_string(shape));
    }
  }
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.tensors_.size() != b.tensors_.size()) {
    return false;
  }
  for (const auto& [name, t] : a.tensors_) {
    auto it = b.tensors_.find(name);
    if (it == b.tensors_.end() || !ad::bit_equal(t, it->second)) {
      return false;
    }
  }
  return true;
}

// --- binding ----------------------------------------------------------------

BoundParams bind_params(ad::Tape& tape, const ModelParams& params, const ModelConfig& cfg, TensorMap* grads,
                 bool train_embedding) {
  std::vector<Var> leaves;
  for (const auto& name : ModelParams::names(cfg)) {
    const Tensor& value = params.at(name);
    Tensor* sink = nullptr;
    if (grads != nullptr && (train_embedding || name != param::kEmbedding)) {
      auto [it, inserted] = grads->try_emplace(name, value.shape());
      if (!inserted && it->second.shape() != value.shape()) {
        it->second = Tensor(value.shape());
      }
      sink = &it->second;
    }
    leaves.push_back(tape.parameter(value, sink));
  }
  return bind_params(std::span<const Var>(leaves), cfg);
}

BoundParams bind_params(std::span<const Var> leaves, const ModelConfig& cfg) {
  const std::size_t expected = 7 + 2 * cfg.fc_dims.size();
  if (leaves.size() != expected) {
    throw std::invalid_argument("bind: expected " + std::to_string(expected) + " leaves, got " +
                                std::to_string(leaves.size()));
  }
  const std::size_t d = cfg.embedding_dim, l = cfg.hidden;
  auto lstm = [&](const Var& w, const Var& b) {
    return LstmVars{w, b, ad::slice_cols(w, 0, d), ad::slice_cols(w, d, d + l)};
  };
  BoundParams p;
  p.embedding = leaves[0];
  p.forward = lstm(leaves[1], leaves[2]);
  p.backward = lstm(leaves[3], leaves[4]);
  std::size_t k = 5;
  for (std::size_t layer = 0; layer < cfg.fc_dims.size(); ++layer, k += 2) {
    p.hidden.push_back({leaves[k], leaves[k + 1]});
  }
  p.out = {leaves[k], leaves[k + 1]};
  return p;
}

// --- sentence encoder -------------------------------------------------------

namespace {

LstmState gate_update(const Var& z, const Var& c_prev, std::size_t l) {
  const Var i = ad::sigmoid(ad::slice_cols(z, 0, l));
  const Var f = ad::sigmoid(ad::slice_cols(z, l, 2 * l));
  const Var g = ad::tanh(ad::slice_cols(z, 2 * l, 3 * l));
  const Var o = ad::sigmoid(ad::slice_cols(z, 3 * l, 4 * l));
  const Var c = ad::add(ad::mul(f, c_prev), ad::mul(i, g));
  const Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

// Hidden states of one direction over `steps`, stored in time order.
std::vector<Var> run_direction(const Var& gate_inputs, const LstmVars& p, std::size_t l, bool reverse) {
  const std::size_t m = gate_inputs.rows();
  std::vector<Var> states(m);
  ad::Tape& tape = gate_inputs.tape();
  Var c = tape.constant(Tensor({1, l}));
  Var h;
  for (std::size_t step = 0; step < m; ++step) {
    const std::size_t t = reverse ? m - 1 - step : step;
    Var z = ad::slice_rows(gate_inputs, t, t + 1);
    if (step > 0) {
      z = ad::add(z, ad::matmul_nt(h, p.recurrent_weight));
    }
    auto next = gate_update(z, c, l);
    h = next.h;
    c = next.c;
    states[t] = h;
  }
  return states;
}

}  // namespace

LstmState lstm_cell_step(const Var& w_t, const Var& h_prev, const Var& c_prev, const LstmVars& p,
                         std::size_t hidden) {
  const Var z = ad::affine(ad::concat({w_t, h_prev}, 1), p.weight, p.bias);
  return gate_update(z, c_prev, hidden);
}

Var encode_sentence(const BoundParams& p, std::span<const TokenId> ids, std::size_t valid_len,
                    const ModelConfig& cfg) {
  if (valid_len == 0 || valid_len > ids.size()) {
    throw std::invalid_argument("encode_sentence: valid length " + std::to_string(valid_len) + " outside [1, " +
                                std::to_string(ids.size()) + "]");
  }
  const std::size_t l = cfg.hidden;
  const Var x = lookup(p.embedding, ids.first(valid_len));
  const Var fwd_in = ad::affine(x, p.forward.input_weight, p.forward.bias);
  const Var bwd_in = ad::affine(x, p.backward.input_weight, p.backward.bias);
  const auto fwd = run_direction(fwd_in, p.forward, l, false);
  const auto bwd = run_direction(bwd_in, p.backward, l, true);
  const Var h = ad::concat({ad::concat(fwd, 0), ad::concat(bwd, 0)}, 1);
  return ad::max_over_time(h, valid_len);
}

Var encode_batch(const BoundParams& p, std::span<const std::vector<TokenId>> utterances, const ModelConfig& cfg) {
  if (utterances.empty()) {
    throw std::invalid_argument("encode_batch: no utterances");
  }
  std::vector<Var> rows;
  rows.reserve(utterances.size());
  for (const auto& ids : utterances) {
    rows.push_back(encode_sentence(p, ids, ids.size(), cfg));
  }
  return ad::concat(rows, 0);
}

// --- self-attention ---------------------------------------------------------

Var attention_scores(const Var& u, std::size_t n, std::size_t d_k) {
  if (n == 0 || n > u.rows()) {
    throw std::invalid_argument("attention_scores: valid count " + std::to_string(n) + " outside [1, " +
                                std::to_string(u.rows()) + "]");
  }
  if (d_k == 0) {
    throw std::invalid_argument("attention_scores: d_k must be positive");
  }
  return ad::scale(ad::matmul_nt(u, u), 1.0 / std::sqrt(static_cast<double>(d_k)));
}

std::vector<bool> attention_mask(std::size_t n_pad, std::size_t n) {
  std::vector<bool> mask(n_pad * n_pad, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      mask[i * n_pad + j] = true;
    }
  }
  return mask;
}

Var attention_weights(const Var& u, std::size_t n, std::size_t d_k) {
  return ad::masked_softmax_rows(attention_scores(u, n, d_k), attention_mask(u.rows(), n));
}

Var self_attend(const Var& u, std::size_t n, std::size_t d_k) {
  const Var a = attention_weights(u, n, d_k);
  // Only the n valid columns/rows enter the sum.
  return ad::matmul(ad::slice_cols(a, 0, n), ad::slice_rows(u, 0, n));
}

// --- classifier -------------------------------------------------------------

Var classify(const Var& u, const BoundParams& p, const ModelConfig& cfg, ad::Mode mode, CounterRng& rng) {
  Var x = u;
  for (const auto& layer : p.hidden) {
    x = ad::dropout(ad::relu(ad::affine(x, layer.weight, layer.bias)), cfg.dropout, mode, rng);
  }
  return ad::affine(x, p.out.weight, p.out.bias);
}

Var forward_window(const BoundParams& p, const EncodedWindow& window, const ModelConfig& cfg, ad::Mode mode,
                   CounterRng& rng, std::size_t n_pad) {
  const std::size_t n = window.size();
  if (n == 0) {
    throw std::invalid_argument("forward_window: empty window");
  }
  if (n > cfg.n_max) {
    throw std::invalid_argument("forward_window: window of " + std::to_string(n) + " utterances exceeds n_max " +
                                std::to_string(cfg.n_max));
  }
  if (n_pad == 0) {
    n_pad = n;
  }
  if (n_pad < n) {
    throw std::invalid_argument("forward_window: n_pad smaller than the window");
  }
  Var u = encode_batch(p, window.utterances, cfg);
  if (cfg.variant == Variant::SaBiLstm) {
    if (n_pad > n) {
      u = ad::pad_rows(u, n_pad);
    }
    u = ad::slice_rows(self_attend(u, n, cfg.attention_dim()), 0, n);
  }
  u = ad::dropout(u, cfg.dropout, mode, rng);
  return classify(u, p, cfg, mode, rng);
}

EmotionLabel predict_label(std::span<const double> logits_row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumConsidered; ++k) {
    if (logits_row[k] > logits_row[best]) {
      best = k;
    }
  }
  return label_at(best);
}

// --- encoding ---------------------------------------------------------------

EncodedWindow encode_window(const DialogueWindow& window, const TextCleaner& cleaner, const Vocab& vocab) {
  EncodedWindow out;
  out.source_dialogue_id = window.source_dialogue_id;
  out.start_index = window.start_index;
  for (std::size_t i = 0; i < window.utterances.size(); ++i) {
    const auto& u = window.utterances[i];
    out.utterances.push_back(encode(normalize(u.raw_text, cleaner, window.start_index + i), vocab));
    out.golds.push_back(u.gold);
  }
  return out;
}

std::vector<EncodedWindow> encode_dataset(const Dataset& ds, std::size_t n_max, const TextCleaner& cleaner,
                                          const Vocab& vocab) {
  std::vector<EncodedWindow> out;
  for (const auto& d : ds.dialogues) {
    for (const auto& w : split_windows(d, n_max)) {
      out.push_back(encode_window(w, cleaner, vocab));
    }
  }
  return out;
}

}  // namespace dialoglow
