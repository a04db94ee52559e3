#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialoglow/checkpoint.hpp"
#include "dialoglow/metrics.hpp"
#include "dialoglow/model.hpp"

namespace dialoglow {

enum class ClassWeighting { Uniform, InverseFrequency };

struct TrainConfig {
  double lr0 = 0.0002;
  double decay = 0.99;  // per epoch
  std::size_t epochs = 20;
  /// Utterances per step for BiLSTM; windows per step for SA-BiLSTM.
  std::size_t batch_size = 1;
  std::array<double, kNumLabels> class_weights = default_class_weights();
  std::uint64_t seed = 7;
  double clip_norm = 0.0;  // 0 disables
  bool train_embeddings = true;
  bool track_train_metrics = false;

  /// 1 for the considered labels, 0 elsewhere.
  static std::array<double, kNumLabels> default_class_weights();
  /// 10 epochs / batch 16 for BiLSTM; 20 epochs / one dialogue per step for SA-BiLSTM.
  static TrainConfig defaults_for(Variant variant);

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

/// lr0 * decay^epoch, epochs counted from 0.
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

/// Inverse-frequency weights over the considered labels (mean 1 over the
/// labels present), zero elsewhere.
std::array<double, kNumLabels> inverse_frequency_weights(std::span<const EncodedWindow> windows);

ad::Var weighted_cross_entropy(const ad::Var& logits, std::span<const EmotionLabel> golds,
                               std::span<const double, kNumLabels> weights);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  TensorMap m;
  TensorMap v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam over every tensor in `grads`. Throws std::domain_error
/// on a non-finite gradient, before touching any parameter.
void adam_step(TensorMap& params, const TensorMap& grads, AdamState& state, double lr,
               const AdamOptions& options = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<EvalReport> train;
  std::optional<EvalReport> valid;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

struct TrainInputs {
  std::vector<EncodedWindow> train;
  std::vector<EncodedWindow> valid;  // may be empty
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs the full schedule. The checkpoint with the best validation UWA is
/// kept (the last epoch when there is no validation data). Deterministic in
/// (inputs, configs, initial params, seed).
TrainResult train(const TrainInputs& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  ModelParams initial, const Vocab& vocab, const EpochCallback& on_epoch = {});

/// Eval-mode predictions (argmax over the considered logits), one per utterance.
std::vector<EmotionLabel> predict(const ModelParams& params, const ModelConfig& cfg,
                                  const EncodedWindow& window);

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg,
                    std::span<const EncodedWindow> windows);

}  // namespace dialoglow
