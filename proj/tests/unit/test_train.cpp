#include <doctest.h>

#include <cmath>

#include "dialoglow/checkpoint.hpp"
#include "dialoglow/train.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace dialoglow;
using ad::Tensor;

namespace {

struct Prepared {
  Vocab vocab;
  TrainInputs inputs;
};

Prepared prepare(const testing::SyntheticOptions& opts, std::size_t n_max = 25) {
  const auto ds = testing::synthetic_dataset(opts);
  std::vector<TokenSequence> seqs;
  for (const auto& d : ds.dialogues) {
    for (const auto& u : d.utterances) {
      seqs.push_back(normalize(u.raw_text));
    }
  }
  Prepared p{build_vocab(seqs, 1), {}};
  p.inputs.train = encode_dataset(ds, n_max, TextCleaner{}, p.vocab);
  return p;
}

TensorMap model_grads(const ModelParams& params, const ModelConfig& cfg, const EncodedWindow& w,
                      const std::array<double, kNumLabels>& weights, double* loss_out = nullptr) {
  ad::Tape tape;
  TensorMap grads;
  const auto bound = bind_params(tape, params, cfg, &grads);
  CounterRng rng;
  const auto loss = weighted_cross_entropy(forward_window(bound, w, cfg, ad::Mode::Eval, rng), w.golds, weights);
  tape.backward(loss);
  if (loss_out != nullptr) {
    *loss_out = loss.value().item();
  }
  return grads;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  const TrainConfig cfg;
  CHECK(learning_rate(cfg, 0) == 0.0002);
  CHECK(learning_rate(cfg, 1) == 0.0002 * 0.99);
  CHECK(std::abs(learning_rate(cfg, 1) - 0.000198) < 1e-18);
  CHECK(std::abs(learning_rate(cfg, 5) - 1.9019800998e-4) <= 1e-19);
}

TEST_CASE("variant defaults") {
  const auto bi = TrainConfig::defaults_for(Variant::BiLstm);
  CHECK(bi.epochs == 10);
  CHECK(bi.batch_size == 16);
  const auto sa = TrainConfig::defaults_for(Variant::SaBiLstm);
  CHECK(sa.epochs == 20);
  CHECK(sa.batch_size == 1);
  CHECK(sa.lr0 == 0.0002);
  CHECK(sa.decay == 0.99);
}

TEST_CASE("class weights are zero outside the considered labels") {
  const auto w = TrainConfig::default_class_weights();
  for (auto label : kAllLabels) {
    CHECK(w[index_of(label)] == (is_considered(label) ? 1.0 : 0.0));
  }
  TrainConfig cfg;
  cfg.class_weights[index_of(EmotionLabel::Fear)] = 0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.class_weights[0] = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("inverse-frequency weights") {
  EncodedWindow w;
  w.golds = {EmotionLabel::Neutral, EmotionLabel::Neutral, EmotionLabel::Neutral, EmotionLabel::Joy,
             EmotionLabel::Fear};
  const std::vector<EncodedWindow> ws = {w};
  const auto weights = inverse_frequency_weights(ws);
  CHECK(weights[index_of(EmotionLabel::Neutral)] == doctest::Approx(0.5));
  CHECK(weights[index_of(EmotionLabel::Joy)] == doctest::Approx(1.5));
  CHECK(weights[index_of(EmotionLabel::Sadness)] == 0.0);
  CHECK(weights[index_of(EmotionLabel::Fear)] == 0.0);
}

TEST_CASE("adam") {
  SUBCASE("first step on a scalar with unit gradient") {
    TensorMap p{{"x", Tensor::scalar(0.0)}};
    const TensorMap g{{"x", Tensor::scalar(1.0)}};
    AdamState s;
    adam_step(p, g, s, 0.0002);
    CHECK(std::abs(p["x"].item() - (-0.0002 / (1.0 + 1e-8))) < 1e-12);
    CHECK(s.step == 1);
  }
  SUBCASE("zero gradient leaves parameters alone") {
    TensorMap p{{"x", Tensor::row_vector({1.5, -2.0})}};
    const TensorMap g{{"x", Tensor(ad::Shape{1, 2})}};
    AdamState s;
    adam_step(p, g, s, 0.1);
    CHECK(p["x"][0] == 1.5);
    CHECK(p["x"][1] == -2.0);
    CHECK(s.step == 1);
  }
  SUBCASE("matches a hand-rolled two-step trace") {
    TensorMap p{{"x", Tensor::scalar(1.0)}};
    AdamState s;
    double x = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      const double g = t == 1 ? 0.5 : -2.0;
      adam_step(p, TensorMap{{"x", Tensor::scalar(g)}}, s, 0.01);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(std::abs(p["x"].item() - x) < 1e-15);
  }
  SUBCASE("non-finite gradient fails before any update") {
    TensorMap p{{"a", Tensor::scalar(1.0)}, {"b", Tensor::scalar(1.0)}};
    const TensorMap g{{"a", Tensor::scalar(1.0)}, {"b", Tensor::scalar(NAN)}};
    AdamState s;
    CHECK_THROWS_AS(adam_step(p, g, s, 0.1), std::domain_error);
    CHECK(p["a"].item() == 1.0);
    CHECK(s.step == 0);
  }
}

TEST_CASE("loss weighting through the whole model") {
  auto cfg = testing::tiny_config();
  const auto params = ModelParams::initialize(cfg, 20, 3);
  const auto weights = TrainConfig::default_class_weights();
  EncodedWindow w;
  w.utterances = {{2, 3}, {4, 5, 6}, {7}};

  SUBCASE("non-considered golds give zero loss and zero gradient everywhere") {
    w.golds = {EmotionLabel::Fear, EmotionLabel::Surprise, EmotionLabel::NonNeutral};
    double loss = -1;
    const auto grads = model_grads(params, cfg, w, weights, &loss);
    CHECK(loss == 0.0);
    for (const auto& [name, g] : grads) {
      for (double v : g.values()) {
        CHECK(v == 0.0);
      }
    }
  }
  SUBCASE("mixed batch equals the weighted mean of per-utterance losses") {
    w.golds = {EmotionLabel::Joy, EmotionLabel::Disgust, EmotionLabel::Anger};
    auto ww = weights;
    ww[index_of(EmotionLabel::Anger)] = 2.5;
    ad::Tape tape;
    const auto bound = bind_params(tape, params, cfg, nullptr);
    CounterRng rng;
    const auto logits = forward_window(bound, w, cfg, ad::Mode::Eval, rng);
    const double loss = weighted_cross_entropy(logits, w.golds, ww).value().item();
    auto row = [&](std::size_t r) {
      const auto s = logits.value().row(r);
      return std::vector<double>(s.begin(), s.end());
    };
    const double expect =
        (1.0 * testing::cross_entropy(row(0), 1) + 2.5 * testing::cross_entropy(row(2), 3)) / 3.5;
    CHECK(std::abs(loss - expect) < 1e-12);
  }
  SUBCASE("zero-weight utterances contribute no gradient") {
    cfg.variant = Variant::BiLstm;
    w.golds = {EmotionLabel::Joy, EmotionLabel::Fear, EmotionLabel::Anger};
    const auto with = model_grads(params, cfg, w, weights);
    EncodedWindow without;
    without.utterances = {w.utterances[0], w.utterances[2]};
    without.golds = {w.golds[0], w.golds[2]};
    const auto wo = model_grads(params, cfg, without, weights);
    for (const auto& [name, g] : with) {
      CHECK(ad::max_abs_diff(g, wo.at(name)) < 1e-12);
    }
  }
}

TEST_CASE("training reduces loss and is deterministic") {
  testing::SyntheticOptions opts;
  opts.dialogues = 8;
  auto data = prepare(opts);
  const auto cfg = testing::tiny_config();
  TrainConfig tcfg;
  tcfg.epochs = 3;
  tcfg.lr0 = 0.005;
  tcfg.track_train_metrics = true;
  const auto init = ModelParams::initialize(cfg, data.vocab.size(), 1);
  std::size_t calls = 0;
  const auto a = train(data.inputs, cfg, tcfg, init, data.vocab, [&](const EpochRecord&) { ++calls; });
  const auto b = train(data.inputs, cfg, tcfg, init, data.vocab);
  CHECK(calls == 3);
  REQUIRE(a.history.size() == 3);
  CHECK(a.history[2].train_loss < a.history[0].train_loss);
  CHECK(a.history[1].lr == 0.005 * 0.99);
  CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
  CHECK(a.best.metadata.dump() == b.best.metadata.dump());
  CHECK(a.best_epoch == 2);
  CHECK(a.best.params == a.last.params);
  for (double v : a.best.params.at(param::kEmbedding).row(0)) {
    CHECK(v == 0.0);
  }
  tcfg.seed = 8;
  const auto c = train(data.inputs, cfg, tcfg, init, data.vocab);
  CHECK_FALSE(c.last.params == a.last.params);
}

TEST_CASE("BiLSTM regime trains on utterance batches") {
  testing::SyntheticOptions opts;
  opts.dialogues = 6;
  auto data = prepare(opts);
  const auto cfg = testing::tiny_config(Variant::BiLstm);
  auto tcfg = TrainConfig::defaults_for(Variant::BiLstm);
  tcfg.epochs = 4;
  tcfg.lr0 = 0.01;
  tcfg.track_train_metrics = true;
  const auto r = train(data.inputs, cfg, tcfg, ModelParams::initialize(cfg, data.vocab.size(), 2), data.vocab);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
  CHECK(r.history.back().train.has_value());
}

TEST_CASE("frozen embeddings stay put") {
  testing::SyntheticOptions opts;
  opts.dialogues = 3;
  auto data = prepare(opts);
  const auto cfg = testing::tiny_config();
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.train_embeddings = false;
  const auto init = ModelParams::initialize(cfg, data.vocab.size(), 2);
  const auto r = train(data.inputs, cfg, tcfg, init, data.vocab);
  CHECK(ad::bit_equal(r.last.params.at(param::kEmbedding), init.at(param::kEmbedding)));
  CHECK_FALSE(ad::bit_equal(r.last.params.at(param::kOutWeight), init.at(param::kOutWeight)));
}

TEST_CASE("best checkpoint follows validation UWA") {
  testing::SyntheticOptions opts;
  opts.dialogues = 10;
  auto data = prepare(opts);
  testing::SyntheticOptions vopts = opts;
  vopts.seed = 99;
  vopts.dialogues = 4;
  const auto vds = testing::synthetic_dataset(vopts);
  data.inputs.valid = encode_dataset(vds, 25, TextCleaner{}, data.vocab);
  const auto cfg = testing::tiny_config();
  TrainConfig tcfg;
  tcfg.epochs = 4;
  tcfg.lr0 = 0.003;
  const auto r = train(data.inputs, cfg, tcfg, ModelParams::initialize(cfg, data.vocab.size(), 2), data.vocab);
  double best = -1;
  std::size_t at = 0;
  for (const auto& rec : r.history) {
    REQUIRE(rec.valid.has_value());
    if (rec.valid->uwa > best) {
      best = rec.valid->uwa;
      at = rec.epoch;
    }
  }
  CHECK(r.best_epoch == at);
  CHECK(evaluate(r.best.params, cfg, data.inputs.valid).uwa == best);
  CHECK(r.best.vocab_hash == data.vocab.hash());
  CHECK(r.best.metadata["epoch"] == at);
}

TEST_CASE("predict emits one considered label per utterance") {
  const auto cfg = testing::tiny_config();
  const auto params = ModelParams::initialize(cfg, 10, 1);
  EncodedWindow w;
  w.utterances = {{3}};
  w.golds = {EmotionLabel::Fear};
  const auto p = predict(params, cfg, w);
  REQUIRE(p.size() == 1);
  CHECK(is_considered(p[0]));
  CHECK(predict(params, cfg, w) == p);
}

TEST_CASE("train rejects bad input") {
  const auto cfg = testing::tiny_config();
  const Vocab v;
  CHECK_THROWS_AS(train({}, cfg, TrainConfig{}, ModelParams::initialize(cfg, v.size(), 1), v), std::invalid_argument);
  TrainInputs in;
  in.train.push_back({"0", 0, {{2}}, {EmotionLabel::Joy}});
  CHECK_THROWS_AS(train(in, cfg, TrainConfig{}, ModelParams::initialize(cfg, v.size() + 1, 1), v),
                  std::invalid_argument);
}
