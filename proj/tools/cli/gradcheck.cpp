#include "cli/gradcheck.hpp"

#include <chrono>

#include "dialoglow/train.hpp"

namespace dialoglow::cli {

ToyGradCheck toy_gradcheck(std::uint64_t seed, double eps) {
  ToyGradCheck out;
  auto& cfg = out.config;
  cfg.embedding_dim = 8;
  cfg.hidden = 4;
  cfg.fc_dims = {6};
  cfg.variant = Variant::SaBiLstm;
  constexpr std::size_t kVocab = 12;

  ModelParams params = ModelParams::initialize(cfg, kVocab, seed);
  CounterRng rng(seed, 0x746f79);
  EncodedWindow window;
  for (std::size_t len : {5, 3, 4}) {
    std::vector<TokenId> ids;
    for (std::size_t t = 0; t < len; ++t) {
      ids.push_back(static_cast<TokenId>(1 + rng.below(kVocab - 1)));
    }
    window.utterances.push_back(std::move(ids));
  }
  window.golds = {EmotionLabel::Joy, EmotionLabel::Anger, EmotionLabel::Neutral};
  const auto weights = TrainConfig::default_class_weights();

  std::vector<ad::Tensor*> tensors;
  for (const auto& name : ModelParams::names(cfg)) {
    tensors.push_back(&params.at(name));
  }
  const ad::Objective objective = [&](ad::Tape&, std::span<const ad::Var> leaves) {
    const auto bound = bind_params(leaves, cfg);
    CounterRng unused;
    const auto logits = forward_window(bound, window, cfg, ad::Mode::Eval, unused);
    return weighted_cross_entropy(logits, window.golds, weights);
  };

  ad::GradCheckOptions opts;
  opts.eps = eps;
  opts.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  out.result = ad::grad_check(objective, tensors, opts);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace dialoglow::cli
