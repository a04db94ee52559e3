// Acceptance gate: one PASS / FAIL / SKIPPED line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "cli/commands.hpp"
#include "cli/gradcheck.hpp"
#include "dialoglow/checkpoint.hpp"
#include "dialoglow/metrics.hpp"
#include "dialoglow/preprocess.hpp"
#include "dialoglow/train.hpp"
#include "support/golden_preprocess.hpp"
#include "support/metric_cases.hpp"
#include "support/synthetic.hpp"

using namespace dialoglow;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 10.0;
constexpr double kStochasticTol = 1e-12;
constexpr double kAttentionSeconds = 1.0;
constexpr double kLossTol = 1e-12;
constexpr double kAdamTol = 1e-12;
constexpr double kOverfitTarget = 0.95;
constexpr std::size_t kOverfitEpochs = 200;
constexpr double kOverfitSeconds = 120.0;
constexpr double kOverfitLr = 0.002;
constexpr double kOverfitDropout = 0.0;
constexpr double kUwaBand = 8.0;

enum class Verdict { Pass, Fail, Skipped };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome pass_if(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

ad::Tensor random_matrix(CounterRng& rng, std::size_t r, std::size_t c, double scale) {
  ad::Tensor t(ad::Shape{r, c});
  for (auto& v : t.values()) {
    v = rng.uniform(-scale, scale);
  }
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dialoglow");
  std::vector<const char*> argv;
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

struct Prepared {
  Vocab vocab;
  TrainInputs inputs;
};

Prepared prepare(const Dataset& train_ds, const Dataset& valid_ds) {
  const TextCleaner cleaner;
  std::vector<TokenSequence> seqs;
  for (const auto& d : train_ds.dialogues) {
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      seqs.push_back(normalize(d.utterances[i].raw_text, cleaner, i));
    }
  }
  Prepared p{build_vocab(seqs, 1), {}};
  p.inputs.train = encode_dataset(train_ds, 25, cleaner, p.vocab);
  p.inputs.valid = encode_dataset(valid_ds, 25, cleaner, p.vocab);
  return p;
}

// 1 -------------------------------------------------------------------------
Outcome gradient_fidelity() {
  const auto g = cli::toy_gradcheck(7);
  return pass_if(g.result.max_rel_error < kGradTol && g.seconds < kGradSeconds,
                 fmt("max rel error %.3g (< %.0e) over %zu coords, %.2f s (< %.0f s)", g.result.max_rel_error,
                     kGradTol, g.result.coords_checked, g.seconds, kGradSeconds));
}

// 2 -------------------------------------------------------------------------
Outcome attention_correctness() {
  const auto start = Clock::now();
  CounterRng rng(2);
  bool identity = true, fixed = true, symmetric = true, stochastic = true, padding = true;

  {
    ad::Tape tape;
    const auto u = tape.constant(random_matrix(rng, 1, 8, 1.0));
    identity = ad::max_abs_diff(self_attend(u, 1, 8).value(), u.value()) == 0.0;
  }
  {
    ad::Tape tape;
    ad::Tensor t(ad::Shape{5, 4});
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t k = 0; k < 4; ++k) {
        t.at(r, k) = 0.25 * static_cast<double>(k) - 0.4;
      }
    }
    fixed = ad::max_abs_diff(self_attend(tape.constant(t), 5, 4).value(), t) < 1e-15;
  }
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(25);
    ad::Tape tape;
    const auto u = tape.constant(random_matrix(rng, n, 8, 2.0));
    const auto f = attention_scores(u, n, 8).value();
    const auto a = attention_weights(u, n, 8).value();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        symmetric = symmetric && f.at(i, j) == f.at(j, i);
        s += a.at(i, j);
      }
      stochastic = stochastic && std::abs(s - 1.0) < kStochasticTol;
    }
  }
  ModelConfig cfg;
  cfg.embedding_dim = 6;
  cfg.hidden = 4;
  cfg.fc_dims = {5};
  const auto params = ModelParams::initialize(cfg, 15, 2);
  for (std::size_t n : {1, 3, 11, 25}) {
    EncodedWindow w;
    for (std::size_t i = 0; i < n; ++i) {
      w.utterances.push_back({static_cast<TokenId>(2 + i % 13), static_cast<TokenId>(1 + (i * 7) % 14)});
      w.golds.push_back(EmotionLabel::Neutral);
    }
    for (auto mode : {ad::Mode::Eval, ad::Mode::Train}) {
      ad::Tape tape;
      const auto bound = bind_params(tape, params, cfg, nullptr);
      CounterRng r1(5), r2(5);
      const auto a = forward_window(bound, w, cfg, mode, r1, n).value();
      const auto b = forward_window(bound, w, cfg, mode, r2, 25).value();
      padding = padding && ad::bit_equal(a, b);
    }
  }
  const double secs = since(start);
  return pass_if(identity && fixed && symmetric && stochastic && padding && secs < kAttentionSeconds,
                 fmt("identity=%d fixed-point=%d symmetric=%d row-stochastic(1e-12)=%d padding{n,25}=%d, %.3f s",
                     identity, fixed, symmetric, stochastic, padding, secs));
}

// 3 -------------------------------------------------------------------------
Outcome loss_weighting() {
  auto cfg = testing::tiny_config();
  const auto params = ModelParams::initialize(cfg, 20, 3);
  const auto weights = TrainConfig::default_class_weights();
  EncodedWindow w;
  w.utterances = {{2, 3}, {4, 5, 6}, {7}, {8, 9}};

  w.golds = {EmotionLabel::Fear, EmotionLabel::Surprise, EmotionLabel::Disgust, EmotionLabel::NonNeutral};
  ad::Tape tape;
  TensorMap grads;
  CounterRng rng(1);
  auto bound = bind_params(tape, params, cfg, &grads);
  const auto loss = weighted_cross_entropy(forward_window(bound, w, cfg, ad::Mode::Train, rng), w.golds, weights);
  tape.backward(loss);
  bool zero = loss.value().item() == 0.0;
  std::size_t checked = 0;
  for (const auto& [name, g] : grads) {
    for (double v : g.values()) {
      zero = zero && v == 0.0;
      ++checked;
    }
  }

  w.golds = {EmotionLabel::Joy, EmotionLabel::Fear, EmotionLabel::Anger, EmotionLabel::Neutral};
  ad::Tape tape2;
  bound = bind_params(tape2, params, cfg, nullptr);
  CounterRng unused;
  const auto logits = forward_window(bound, w, cfg, ad::Mode::Eval, unused);
  const double mixed = weighted_cross_entropy(logits, w.golds, weights).value().item();
  double expect = 0.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto row = logits.value().row(i);
    double m = row[0];
    for (double v : row) {
      m = std::max(m, v);
    }
    double z = 0.0;
    for (double v : row) {
      z += std::exp(v - m);
    }
    const auto g = index_of(w.golds[i]);
    expect += weights[g] * -(row[g] - m - std::log(z));
    wsum += weights[g];
  }
  expect /= wsum;
  const double err = std::abs(mixed - expect);
  return pass_if(zero && err < kLossTol,
                 fmt("non-considered batch: loss 0 and %zu gradient entries exactly 0: %s; mixed |diff| %.2g (< 1e-12)",
                     checked, zero ? "yes" : "no", err));
}

// 4 -------------------------------------------------------------------------
Outcome optimizer() {
  TensorMap p{{"x", ad::Tensor::scalar(0.0)}};
  AdamState s;
  adam_step(p, TensorMap{{"x", ad::Tensor::scalar(1.0)}}, s, 0.0002);
  const double step_err = std::abs(p["x"].item() - (-0.0002 / (1.0 + 1e-8)));
  const TrainConfig cfg;
  // Closed form, bit for bit, and within one ulp of the decimal value.
  const auto exact = [&](std::size_t e, double decimal) {
    const double lr = learning_rate(cfg, e);
    const double ulp = std::nextafter(decimal, 1.0) - decimal;
    return lr == cfg.lr0 * std::pow(cfg.decay, static_cast<double>(e)) && std::abs(lr - decimal) <= ulp;
  };
  const bool e0 = exact(0, 0.0002);
  const bool e1 = exact(1, 0.000198);
  const bool e5 = exact(5, 0.00019019800998);
  return pass_if(step_err < kAdamTol && e0 && e1 && e5,
                 fmt("first step |diff| %.2g (< 1e-12); lr(0)=%.17g lr(1)=%.17g lr(5)=%.17g exact=%d%d%d", step_err,
                     learning_rate(cfg, 0), learning_rate(cfg, 1), learning_rate(cfg, 5), e0, e1, e5));
}

// 5 -------------------------------------------------------------------------
Outcome synthetic_overfit() {
  const auto start = Clock::now();
  auto data = prepare(testing::synthetic_dataset(), Dataset{});
  auto cfg = testing::tiny_config(Variant::SaBiLstm);
  cfg.dropout = kOverfitDropout;
  TrainConfig tcfg = TrainConfig::defaults_for(Variant::SaBiLstm);
  tcfg.epochs = kOverfitEpochs;
  tcfg.lr0 = kOverfitLr;
  tcfg.track_train_metrics = true;
  std::optional<std::size_t> reached;
  const auto result = train(data.inputs, cfg, tcfg, ModelParams::initialize(cfg, data.vocab.size(), 7), data.vocab,
                            [&](const EpochRecord& rec) {
                              if (!reached && rec.train && rec.train->wa >= kOverfitTarget &&
                                  rec.train->uwa >= kOverfitTarget) {
                                reached = rec.epoch + 1;
                              }
                            });
  const double secs = since(start);
  const auto& h = result.history;
  const bool decreasing = h.size() >= 3 && h[2].train_loss < h[0].train_loss;
  const auto& last = *h.back().train;
  return pass_if(reached.has_value() && decreasing && secs < kOverfitSeconds,
                 fmt("lr0 %g, dropout %g: WA/UWA >= 0.95 first at epoch %s (final %.3f/%.3f); loss e1 %.4f > e3 %.4f: %s; %.1f s (< 120 s)",
                     kOverfitLr, kOverfitDropout, reached ? std::to_string(*reached).c_str() : "never", last.wa, last.uwa, h[0].train_loss,
                     h[2].train_loss, decreasing ? "yes" : "no", secs));
}

// 6 -------------------------------------------------------------------------
Outcome metrics_oracle() {
  std::size_t exact = 0;
  const auto cases = testing::metric_cases();
  for (const auto& c : cases) {
    const auto cm = confusion(c.preds, c.golds);
    exact += wa(cm) == c.wa && uwa(cm) == c.uwa && cm.ignored == c.ignored;
  }
  CounterRng rng(6);
  std::size_t holds = 0;
  for (int i = 0; i < 1000; ++i) {
    ConfusionMatrix cm;
    std::uint64_t trace = 0, total = 0;
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        cm.counts[r][c] = rng.below(500);
        total += cm.counts[r][c];
        trace += r == c ? cm.counts[r][c] : 0;
      }
    }
    if (total == 0) {
      cm.counts[0][0] = total = trace = 1;
    }
    holds += wa(cm) == static_cast<double>(trace) / static_cast<double>(total);
  }
  return pass_if(exact == cases.size() && cases.size() >= 5 && holds == 1000,
                 fmt("%zu/%zu hand-enumerated matrices exact; wa = trace/total on %zu/1000 random matrices", exact,
                     cases.size(), holds));
}

// 7 -------------------------------------------------------------------------
Outcome preprocessing_golden() {
  auto joined = [](const std::vector<std::string>& t) {
    std::string s;
    for (const auto& x : t) {
      s += (s.empty() ? "" : " ") + x;
    }
    return s;
  };
  const bool dup = joined(normalize("oooooh").tokens) == "oh <duplicate>" &&
                     joined(normalize("oh!!!!!!").tokens) == "oh ! <duplicate>";
  std::size_t ok = 0, idempotent = 0;
  for (const auto& c : testing::kGoldenCases) {
    const auto once = joined(normalize(c.raw).tokens);
    ok += once == c.tokens;
    const auto cleaned = clean_text(c.raw);
    const auto collapsed = collapse_duplicates(cleaned);
    idempotent += clean_text(cleaned) == cleaned && collapse_duplicates(collapsed) == collapsed &&
                  joined(normalize(once).tokens) == once;
  }
  const auto n = testing::kGoldenCases.size();
  return pass_if(dup && ok == n && idempotent == n && n >= 22,
                 fmt("duplicate-run examples: %s; %zu/%zu golden cases byte-exact; idempotent on %zu/%zu",
                     dup ? "ok" : "MISMATCH", ok, n, idempotent, n));
}

// 8 -------------------------------------------------------------------------
Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "dialoglow_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "train.json") << testing::synthetic_json();
    std::ofstream(dir / "run.cfg") << "[model]\nembedding_dim = 8\nhidden = 8\nfc_dims = 8, 8\n[train]\nepochs = 3\n"
                                      "[data]\nvalid_fraction = 0.2\n";
  }
  int codes = 0;
  for (const char* out : {"a", "b"}) {
    codes += run_cli({"train", (dir / "train.json").string(), "--config", (dir / "run.cfg").string(), "--seed", "7",
                      "--out", (dir / out).string()});
  }
  bool same = codes == 0;
  for (const char* f : {"model.ckpt", "last.ckpt", "history.json", "vocab.txt"}) {
    same = same && fs::exists(dir / "a" / f) && slurp(dir / "a" / f) == slurp(dir / "b" / f);
  }
  return pass_if(same, fmt("two seeded runs: checkpoints, history and vocabulary %s",
                           same ? "bit-identical" : "DIFFER (or a run failed)"));
}

// 9 -------------------------------------------------------------------------
Outcome emotionx_sanity() {
  const char* root = std::getenv("DIALOGLOW_DATA_DIR");
  const fs::path base = root != nullptr ? fs::path(root) / "emotionx" : fs::path();
  const fs::path friends = base / "friends_train.json";
  const fs::path push = base / "emotionpush_train.json";
  if (root == nullptr || !fs::exists(friends) || !fs::exists(push)) {
    return {Verdict::Skipped,
            "EmotionX corpus not available locally (expected $DIALOGLOW_DATA_DIR/emotionx/"
            "{friends,emotionpush}_train.json)"};
  }
  const auto start = Clock::now();
  const auto f = load_dataset(friends, Split::Train);
  const auto p = load_dataset(push, Split::Train);
  const std::size_t dialogues = f.dialogues.size() + p.dialogues.size();
  const std::size_t utterances = f.utterance_count() + p.utterance_count();
  const bool counts = dialogues == 1440 && utterances == 21294;

  Dataset train_ds = f, valid_ds;
  std::tie(train_ds, valid_ds) = holdout_split(f, 80.0 / static_cast<double>(f.dialogues.size()), 7);
  auto data = prepare(train_ds, valid_ds);
  const ModelConfig cfg;
  const auto tcfg = TrainConfig::defaults_for(Variant::SaBiLstm);
  const auto result = train(data.inputs, cfg, tcfg, ModelParams::initialize(cfg, data.vocab.size(), tcfg.seed),
                            data.vocab);
  const double uwa = 100.0 * evaluate(result.best.params, cfg, data.inputs.valid).uwa;
  const double hours = since(start) / 3600.0;
  return pass_if(counts && std::abs(uwa - 62.8) <= kUwaBand && hours <= 2.0,
                 fmt("%zu dialogues / %zu utterances (want 1440 / 21294); Friends held-out UWA %.1f (62.8 +/- 8); "
                     "%.2f h",
                     dialogues, utterances, uwa, hours));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"attention correctness", attention_correctness},
      {"loss weighting", loss_weighting},
      {"optimizer", optimizer},
      {"synthetic overfit", synthetic_overfit},
      {"metrics oracle", metrics_oracle},
      {"preprocessing golden suite", preprocessing_golden},
      {"determinism", determinism},
      {"EmotionX sanity (conditional)", emotionx_sanity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIPPED";
    std::printf("[%s] %zu. %s: %s\n", tag, i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += o.verdict == Verdict::Fail;
  }
  return failures == 0 ? 0 : 1;
}
