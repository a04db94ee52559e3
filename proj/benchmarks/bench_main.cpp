#include <benchmark/benchmark.h>

#include "dialoglow/model.hpp"
#include "dialoglow/preprocess.hpp"
#include "dialoglow/train.hpp"

using namespace dialoglow;

namespace {

ad::Tensor filled(std::size_t r, std::size_t c) {
  ad::Tensor t(ad::Shape{r, c});
  CounterRng rng(1);
  for (auto& v : t.values()) {
    v = rng.uniform(-1, 1);
  }
  return t;
}

EncodedWindow window(std::size_t n, std::size_t len, std::size_t vocab) {
  EncodedWindow w;
  CounterRng rng(2);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<TokenId> ids(len);
    for (auto& id : ids) {
      id = static_cast<TokenId>(1 + rng.below(vocab - 1));
    }
    w.utterances.push_back(ids);
    w.golds.push_back(label_at(i % kNumConsidered));
  }
  return w;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n, n);
  const auto b = filled(n, n);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(ad::matmul(tape.constant(a), tape.constant(b)).value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_EncodeSentence(benchmark::State& state) {
  ModelConfig cfg;
  const auto params = ModelParams::initialize(cfg, 2000, 1);
  const auto w = window(1, static_cast<std::size_t>(state.range(0)), 2000);
  for (auto _ : state) {
    ad::Tape tape;
    const auto bound = bind_params(tape, params, cfg, nullptr);
    benchmark::DoNotOptimize(encode_sentence(bound, w.utterances[0], w.utterances[0].size(), cfg).value()[0]);
  }
}
BENCHMARK(BM_EncodeSentence)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_WindowForwardBackward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.embedding_dim = 64;
  cfg.hidden = 64;
  cfg.fc_dims = {64, 64};
  const auto params = ModelParams::initialize(cfg, 2000, 1);
  const auto w = window(static_cast<std::size_t>(state.range(0)), 12, 2000);
  const auto weights = TrainConfig::default_class_weights();
  for (auto _ : state) {
    ad::Tape tape;
    TensorMap grads;
    const auto bound = bind_params(tape, params, cfg, &grads);
    CounterRng rng(3);
    const auto loss =
        weighted_cross_entropy(forward_window(bound, w, cfg, ad::Mode::Train, rng), w.golds, weights);
    tape.backward(loss);
    benchmark::DoNotOptimize(grads.begin()->second[0]);
  }
}
BENCHMARK(BM_WindowForwardBackward)->Arg(5)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_Normalize(benchmark::State& state) {
  const TextCleaner cleaner;
  const std::string text =
      "Ross!!! I can't believe you went to Vegas... sooo cool \xF0\x9F\x99\x82 see www.friends.com at 10";
  for (auto _ : state) {
    benchmark::DoNotOptimize(normalize(text, cleaner).tokens.size());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Normalize);

}  // namespace

BENCHMARK_MAIN();
