#include "dialoglow/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dialoglow/version.hpp"

namespace dialoglow {

using ad::Tensor;
using ad::Var;

std::array<double, kNumLabels> TrainConfig::default_class_weights() {
  std::array<double, kNumLabels> w{};
  for (auto label : kConsideredLabels) {
    w[index_of(label)] = 1.0;
  }
  return w;
}

TrainConfig TrainConfig::defaults_for(Variant variant) {
  TrainConfig cfg;
  if (variant == Variant::BiLstm) {
    cfg.epochs = 10;
    cfg.batch_size = 16;
  } else {
    cfg.epochs = 20;
    cfg.batch_size = 1;
  }
  return cfg;
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) {
    throw std::invalid_argument("train config: lr0 must be positive");
  }
  if (!(decay > 0.0) || decay > 1.0) {
    throw std::invalid_argument("train config: decay must be in (0, 1]");
  }
  if (epochs == 0) {
    throw std::invalid_argument("train config: epochs must be positive");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("train config: batch_size must be positive");
  }
  if (clip_norm < 0.0 || !std::isfinite(clip_norm)) {
    throw std::invalid_argument("train config: clip_norm must be nonnegative");
  }
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const auto label = kAllLabels[k];
    if (!(class_weights[k] >= 0.0) || !std::isfinite(class_weights[k])) {
      throw std::invalid_argument("train config: weight for " + std::string(to_string(label)) +
                                  " must be finite and nonnegative");
    }
    if (!is_considered(label) && class_weights[k] != 0.0) {
      throw std::invalid_argument("train config: weight for " + std::string(to_string(label)) + " must be 0");
    }
  }
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json w = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    w[std::string(to_string(kAllLabels[k]))] = class_weights[k];
  }
  return {{"lr0", lr0},
          {"decay", decay},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"class_weights", std::move(w)},
          {"seed", seed},
          {"clip_norm", clip_norm},
          {"train_embeddings", train_embeddings},
          {"adam", {{"beta1", AdamOptions{}.beta1}, {"beta2", AdamOptions{}.beta2}, {"eps", AdamOptions{}.eps}}}};
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(epoch));
}

std::array<double, kNumLabels> inverse_frequency_weights(std::span<const EncodedWindow> windows) {
  std::array<std::uint64_t, kNumLabels> counts{};
  for (const auto& w : windows) {
    for (auto g : w.golds) {
      ++counts[static_cast<std::size_t>(g)];
    }
  }
  std::array<double, kNumLabels> weights{};
  double sum = 0.0;
  std::size_t present = 0;
  for (auto label : kConsideredLabels) {
    const auto k = static_cast<std::size_t>(label);
    if (counts[k] > 0) {
      weights[k] = 1.0 / static_cast<double>(counts[k]);
      sum += weights[k];
      ++present;
    }
  }
  if (present > 0) {
    for (auto& w : weights) {
      w *= static_cast<double>(present) / sum;
    }
  }
  return weights;
}

Var weighted_cross_entropy(const Var& logits, std::span<const EmotionLabel> golds,
                           std::span<const double, kNumLabels> weights) {
  std::vector<std::size_t> idx;
  idx.reserve(golds.size());
  for (auto g : golds) {
    idx.push_back(static_cast<std::size_t>(g));
  }
  return ad::weighted_cross_entropy(logits, idx, std::span<const double>(weights.data(), weights.size()));
}

void adam_step(TensorMap& params, const TensorMap& grads, AdamState& state, double lr, const AdamOptions& options) {
  for (const auto& [name, g] : grads) {
    const auto it = params.find(name);
    if (it == params.end()) {
      throw std::invalid_argument("adam_step: no parameter named " + name);
    }
    if (it->second.shape() != g.shape()) {
      throw ad::ShapeError("adam_step: " + name + " has shape " + ad::to_string(it->second.shape()) +
                           " but its gradient is " + ad::to_string(g.shape()));
    }
    if (!g.all_finite()) {
      throw std::domain_error("adam_step: non-finite gradient for " + name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto& m = state.m.try_emplace(name, g.shape()).first->second;
    auto& v = state.v.try_emplace(name, g.shape()).first->second;
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options.eps);
    }
  }
}

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j{{"epoch", epoch}, {"lr", lr}, {"train_loss", train_loss}};
  j["train"] = train ? train->to_json() : nlohmann::ordered_json(nullptr);
  j["valid"] = valid ? valid->to_json() : nlohmann::ordered_json(nullptr);
  return j;
}

std::vector<EmotionLabel> predict(const ModelParams& params, const ModelConfig& cfg, const EncodedWindow& window) {
  ad::Tape tape;
  const auto bound = bind_params(tape, params, cfg, nullptr);
  CounterRng unused;
  const Var logits = forward_window(bound, window, cfg, ad::Mode::Eval, unused);
  std::vector<EmotionLabel> out;
  out.reserve(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    out.push_back(predict_label(logits.value().row(i)));
  }
  return out;
}

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, std::span<const EncodedWindow> windows) {
  ConfusionMatrix cm;
  for (const auto& w : windows) {
    const auto preds = predict(params, cfg, w);
    cm += confusion(preds, w.golds);
  }
  return make_report(cm);
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566666c65;
constexpr std::uint64_t kDropoutStream = 0x64726f706f7574;

struct Step {
  std::vector<const EncodedWindow*> windows;
  std::vector<std::pair<std::size_t, std::size_t>> utterances;  // (window, index)
};

std::vector<Step> plan_epoch(const std::vector<EncodedWindow>& train, const ModelConfig& mcfg,
                             const TrainConfig& tcfg, std::size_t epoch) {
  std::vector<Step> steps;
  CounterRng rng = CounterRng(tcfg.seed, kShuffleStream).split(epoch);
  if (mcfg.variant == Variant::SaBiLstm) {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = i;
    }
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); i += tcfg.batch_size) {
      Step s;
      for (std::size_t j = i; j < std::min(order.size(), i + tcfg.batch_size); ++j) {
        s.windows.push_back(&train[order[j]]);
      }
      steps.push_back(std::move(s));
    }
    return steps;
  }
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t w = 0; w < train.size(); ++w) {
    for (std::size_t u = 0; u < train[w].size(); ++u) {
      all.emplace_back(w, u);
    }
  }
  rng.shuffle(all);
  for (std::size_t i = 0; i < all.size(); i += tcfg.batch_size) {
    Step s;
    s.utterances.assign(all.begin() + static_cast<std::ptrdiff_t>(i),
                        all.begin() + static_cast<std::ptrdiff_t>(std::min(all.size(), i + tcfg.batch_size)));
    steps.push_back(std::move(s));
  }
  return steps;
}

double weight_sum(std::span<const EmotionLabel> golds, const std::array<double, kNumLabels>& w) {
  double s = 0.0;
  for (auto g : golds) {
    s += w[static_cast<std::size_t>(g)];
  }
  return s;
}

void clip(TensorMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads) {
    for (double x : g.values()) {
      sq += x * x;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [_, g] : grads) {
      for (double& x : g.values()) {
        x *= f;
      }
    }
  }
}

std::optional<EvalReport> maybe_evaluate(const ModelParams& params, const ModelConfig& cfg,
                                         std::span<const EncodedWindow> windows) {
  ConfusionMatrix cm;
  for (const auto& w : windows) {
    cm += confusion(predict(params, cfg, w), w.golds);
  }
  if (cm.total() == 0) {
    return std::nullopt;
  }
  return make_report(cm);
}

}  // namespace

TrainResult train(const TrainInputs& data, const ModelConfig& mcfg, const TrainConfig& tcfg, ModelParams initial,
                  const Vocab& vocab, const EpochCallback& on_epoch) {
  mcfg.validate();
  tcfg.validate();
  if (data.train.empty()) {
    throw std::invalid_argument("train: no training windows");
  }
  initial.check_shapes(mcfg, vocab.size());

  ModelParams params = std::move(initial);
  AdamState adam;
  TrainResult result;
  std::optional<double> best_uwa;
  std::uint64_t global_step = 0;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr = learning_rate(tcfg, epoch);
    double loss_weighted = 0.0;
    double weight_total = 0.0;
    for (const auto& step : plan_epoch(data.train, mcfg, tcfg, epoch)) {
      CounterRng rng = CounterRng(tcfg.seed, kDropoutStream).split(global_step++);
      ad::Tape tape;
      TensorMap grads;
      const auto bound = bind_params(tape, params, mcfg, &grads, tcfg.train_embeddings);
      std::vector<Var> logits;
      std::vector<EmotionLabel> golds;
      if (!step.windows.empty()) {
        for (const auto* w : step.windows) {
          logits.push_back(forward_window(bound, *w, mcfg, ad::Mode::Train, rng));
          golds.insert(golds.end(), w->golds.begin(), w->golds.end());
        }
      } else {
        std::vector<std::vector<TokenId>> utts;
        for (const auto& [w, u] : step.utterances) {
          utts.push_back(data.train[w].utterances[u]);
          golds.push_back(data.train[w].golds[u]);
        }
        const Var u = ad::dropout(encode_batch(bound, utts, mcfg), mcfg.dropout, ad::Mode::Train, rng);
        logits.push_back(classify(u, bound, mcfg, ad::Mode::Train, rng));
      }
      const double wsum = weight_sum(golds, tcfg.class_weights);
      if (wsum == 0.0) {
        continue;
      }
      const Var all = logits.size() == 1 ? logits.front() : ad::concat(logits, 0);
      const Var loss = weighted_cross_entropy(all, golds, tcfg.class_weights);
      tape.backward(loss);
      loss_weighted += loss.value().item() * wsum;
      weight_total += wsum;
      if (auto it = grads.find(param::kEmbedding); it != grads.end()) {
        for (double& x : it->second.row(Vocab::kPadId)) {
          x = 0.0;
        }
      }
      if (tcfg.clip_norm > 0.0) {
        clip(grads, tcfg.clip_norm);
      }
      adam_step(params.tensors(), grads, adam, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = weight_total > 0.0 ? loss_weighted / weight_total : 0.0;
    if (tcfg.track_train_metrics) {
      rec.train = maybe_evaluate(params, mcfg, data.train);
    }
    if (!data.valid.empty()) {
      rec.valid = maybe_evaluate(params, mcfg, data.valid);
    }
    result.history.push_back(rec);

    const bool improved = rec.valid && (!best_uwa || rec.valid->uwa > *best_uwa);
    if (improved) {
      best_uwa = rec.valid->uwa;
      result.best_epoch = epoch;
      result.best.params = params;
    }
    if (on_epoch) {
      on_epoch(rec);
    }
  }

  nlohmann::ordered_json history = nlohmann::ordered_json::array();
  for (const auto& rec : result.history) {
    history.push_back(rec.to_json());
  }
  auto metadata = [&](std::size_t epoch) {
    return nlohmann::ordered_json{{"version", kVersion},
                                  {"epoch", epoch},
                                  {"seed", tcfg.seed},
                                  {"train_config", tcfg.to_json()},
                                  {"history", history}};
  };

  result.last.config = mcfg;
  result.last.params = params;
  result.last.vocab_hash = vocab.hash();
  result.last.metadata = metadata(tcfg.epochs - 1);
  if (!best_uwa) {
    result.best_epoch = tcfg.epochs - 1;
    result.best = result.last;
  } else {
    result.best.config = mcfg;
    result.best.vocab_hash = vocab.hash();
    result.best.metadata = metadata(result.best_epoch);
    result.best.metadata["selected_by"] = "valid_uwa";
  }
  return result;
}

}  // namespace dialoglow
