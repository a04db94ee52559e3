#include "cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cli/gradcheck.hpp"
#include "cli/run_config.hpp"
#include "dialoglow/checkpoint.hpp"
#include "dialoglow/corpus.hpp"
#include "dialoglow/embeddings.hpp"
#include "dialoglow/metrics.hpp"
#include "dialoglow/preprocess.hpp"
#include "dialoglow/train.hpp"
#include "dialoglow/version.hpp"
#include "dialoglow/vocab.hpp"

namespace dialoglow::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kGradCheckTolerance = 1e-4;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw UsageError("cannot open " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json provenance(const json& config) { return {{"tool", "dialoglow"}, {"version", kVersion}, {"config", config}}; }

fs::path default_vocab(const fs::path& checkpoint) { return checkpoint.parent_path() / "vocab.txt"; }

// --- preprocess ---------------------------------------------------------------

struct PreprocessArgs {
  std::string input;
  std::string out;
  std::size_t min_count = 1;
};

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  const auto ds = load_dataset(resolve_input(a.input), Split::Train);
  const TextCleaner cleaner;
  std::vector<TokenSequence> seqs;
  for (const auto& d : ds.dialogues) {
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      seqs.push_back(normalize(d.utterances[i].raw_text, cleaner, i));
    }
  }
  const Vocab vocab = build_vocab(seqs, a.min_count);
  const json config{{"input", a.input}, {"min_count", a.min_count}};

  json dialogues = json::array();
  std::size_t k = 0;
  for (const auto& d : ds.dialogues) {
    json dj = json::array();
    for (const auto& u : d.utterances) {
      const auto& seq = seqs[k++];
      dj.push_back({{"speaker", u.speaker_id},
                    {"emotion", to_string(u.gold)},
                    {"tokens", seq.tokens},
                    {"ids", encode(seq, vocab)}});
    }
    dialogues.push_back({{"id", d.id}, {"utterances", std::move(dj)}});
  }

  const auto stats = corpus_stats(ds, [&](std::string_view raw) { return normalize(raw, cleaner).tokens; });
  const fs::path dir(a.out);
  fs::create_directories(dir);
  vocab.save(dir / "vocab.txt");
  json encoded = provenance(config);
  encoded["vocab_hash"] = vocab.hash();
  encoded["dialogues"] = std::move(dialogues);
  write_json(dir / "encoded.json", encoded);
  json stats_doc = provenance(config);
  stats_doc["vocab_size"] = vocab.size();
  stats_doc["stats"] = stats.to_json();
  write_json(dir / "stats.json", stats_doc);

  out << "dialogues " << stats.dialogues << ", utterances " << stats.utterances << ", unique tokens "
      << stats.unique_tokens << ", vocabulary " << vocab.size() << "\n";
  return kOk;
}

// --- train ----------------------------------------------------------------------

struct TrainArgs {
  std::string input;
  std::string out;
  std::string config;
  std::optional<std::string> variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::string> embeddings;
  std::optional<std::string> valid;
  bool freeze = false;
};

RunConfig effective_config(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(resolve_input(a.config));
  KeyValues kv;
  if (a.variant) {
    kv["model.variant"] = *a.variant;
  }
  cfg.apply(kv);
  if (a.seed) {
    cfg.train.seed = *a.seed;
  }
  if (a.epochs) {
    cfg.train.epochs = *a.epochs;
  }
  if (a.lr) {
    cfg.train.lr0 = *a.lr;
  }
  if (a.embeddings) {
    cfg.embeddings = *a.embeddings;
  }
  if (a.valid) {
    cfg.valid = *a.valid;
  }
  if (a.freeze) {
    cfg.train.train_embeddings = false;
  }
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = effective_config(a);
  Dataset train_ds = load_dataset(resolve_input(a.input), Split::Train);
  Dataset valid_ds;
  if (!cfg.valid.empty()) {
    valid_ds = load_dataset(resolve_input(cfg.valid), Split::Validation);
  } else if (cfg.valid_fraction > 0.0) {
    std::tie(train_ds, valid_ds) = holdout_split(train_ds, cfg.valid_fraction, cfg.train.seed);
  }
  if (train_ds.dialogues.empty()) {
    throw UsageError("training set is empty");
  }

  const TextCleaner cleaner;
  std::vector<TokenSequence> seqs;
  for (const auto& d : train_ds.dialogues) {
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
      seqs.push_back(normalize(d.utterances[i].raw_text, cleaner, i));
    }
  }
  const Vocab vocab = build_vocab(seqs, cfg.min_count);

  TrainInputs inputs;
  inputs.train = encode_dataset(train_ds, cfg.model.n_max, cleaner, vocab);
  inputs.valid = encode_dataset(valid_ds, cfg.model.n_max, cleaner, vocab);
  if (cfg.weighting == ClassWeighting::InverseFrequency) {
    cfg.train.class_weights = inverse_frequency_weights(inputs.train);
  }
  cfg.train.track_train_metrics = inputs.valid.empty();

  ModelParams init = ModelParams::initialize(cfg.model, vocab.size(), cfg.train.seed);
  if (!cfg.embeddings.empty()) {
    const auto table = load_pretrained(resolve_input(cfg.embeddings), vocab, cfg.model.embedding_dim, cfg.train.seed);
    init.at(param::kEmbedding) = table.matrix;
    out << "embeddings: " << table.oov_count << " of " << vocab.size() << " rows not in " << cfg.embeddings.string()
        << "\n";
  }

  const bool on_valid = !inputs.valid.empty();
  out << "variant " << to_string(cfg.model.variant) << ", " << inputs.train.size() << " training windows, "
      << inputs.valid.size() << " validation windows, vocabulary " << vocab.size() << "\n";
  out << "epoch      lr      loss" << table_header() << (on_valid ? "  (validation)" : "  (train)") << "\n";
  const auto result = train(inputs, cfg.model, cfg.train, std::move(init), vocab, [&](const EpochRecord& rec) {
    char head[64];
    std::snprintf(head, sizeof head, "%5zu %9.3g %9.4f", rec.epoch + 1, rec.lr, rec.train_loss);
    const auto& r = on_valid ? rec.valid : rec.train;
    out << head << (r ? table_row(*r) : std::string("  (no scored utterances)")) << "\n" << std::flush;
  });

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Checkpoint best = result.best;
  best.metadata["run_config"] = cfg.to_json();
  Checkpoint last = result.last;
  last.metadata["run_config"] = cfg.to_json();
  save_checkpoint(best, dir / "model.ckpt");
  save_checkpoint(last, dir / "last.ckpt");
  vocab.save(dir / "vocab.txt");
  json history = provenance(cfg.to_json());
  history["vocab_hash"] = vocab.hash();
  history["best_epoch"] = result.best_epoch;
  history["epochs"] = json::array();
  for (const auto& rec : result.history) {
    history["epochs"].push_back(rec.to_json());
  }
  write_json(dir / "history.json", history);
  out << "best epoch " << result.best_epoch + 1 << "; wrote " << (dir / "model.ckpt").string() << "\n";
  return kOk;
}

// --- eval / predict ---------------------------------------------------------------

struct ModelArgs {
  std::string checkpoint;
  std::string input;
  std::string vocab;
  std::string out;
};

std::pair<Checkpoint, Vocab> load_model(const ModelArgs& a) {
  const fs::path ckpt_path = resolve_input(a.checkpoint);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const fs::path vocab_path = a.vocab.empty() ? default_vocab(ckpt_path) : resolve_input(a.vocab);
  if (!fs::exists(vocab_path)) {
    throw UsageError("vocabulary file not found: " + vocab_path.string());
  }
  Vocab vocab = Vocab::load(vocab_path);
  check_compatible(ckpt, vocab);
  return {std::move(ckpt), std::move(vocab)};
}

int cmd_eval(const ModelArgs& a, std::ostream& out) {
  const auto [ckpt, vocab] = load_model(a);
  const auto ds = load_dataset(resolve_input(a.input), Split::Test);
  const auto windows = encode_dataset(ds, ckpt.config.n_max, TextCleaner{}, vocab);
  const EvalReport r = evaluate(ckpt.params, ckpt.config, windows);
  json doc = provenance({{"checkpoint", a.checkpoint}, {"dataset", a.input}, {"model", ckpt.config.to_json()}});
  doc["vocab_hash"] = vocab.hash();
  doc["report"] = r.to_json();
  out << table_header() << "\n" << table_row(r) << "\n";
  if (a.out.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    write_json(a.out, doc);
  }
  return kOk;
}

int cmd_predict(const ModelArgs& a, std::ostream& out) {
  const auto [ckpt, vocab] = load_model(a);
  const fs::path in_path = resolve_input(a.input);
  const std::string text = read_text(in_path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorpusError(in_path.string() + ": malformed JSON at byte " + std::to_string(e.byte), e.byte);
  }
  if (!doc.is_array()) {
    throw CorpusError(in_path.string() + ": top-level JSON value must be an array of dialogues");
  }
  const TextCleaner cleaner;
  for (std::size_t di = 0; di < doc.size(); ++di) {
    auto& dj = doc[di];
    if (!dj.is_array() || dj.empty()) {
      throw CorpusError(in_path.string() + ": dialogue " + std::to_string(di) + " must be a non-empty array",
                        CorpusError::kNone, di);
    }
    Dialogue d;
    d.id = std::to_string(di);
    for (std::size_t ui = 0; ui < dj.size(); ++ui) {
      const auto& uj = dj[ui];
      if (!uj.is_object() || !uj.contains("utterance") || !uj["utterance"].is_string()) {
        throw CorpusError(in_path.string() + ": dialogue " + std::to_string(di) + ", utterance " +
                              std::to_string(ui) + ": missing string field 'utterance'",
                          CorpusError::kNone, di);
      }
      d.utterances.push_back({"", uj["utterance"].get<std::string>(), EmotionLabel::Neutral});
    }
    for (const auto& w : split_windows(d, ckpt.config.n_max)) {
      const auto preds = predict(ckpt.params, ckpt.config, encode_window(w, cleaner, vocab));
      for (std::size_t i = 0; i < preds.size(); ++i) {
        dj[w.start_index + i]["predicted_emotion"] = to_string(preds[i]);
      }
    }
  }
  const std::string rendered = doc.dump(2) + "\n";
  if (a.out.empty()) {
    out << rendered;
    return kOk;
  }
  write_text(a.out, rendered);
  json meta = provenance({{"checkpoint", a.checkpoint}, {"input", a.input}, {"model", ckpt.config.to_json()}});
  meta["vocab_hash"] = vocab.hash();
  write_json(a.out + ".meta.json", meta);
  return kOk;
}

// --- gradcheck ------------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  const auto g = toy_gradcheck(seed);
  const bool ok = g.result.max_rel_error < kGradCheckTolerance;
  json doc = provenance({{"seed", seed}, {"eps", 1e-5}, {"tolerance", kGradCheckTolerance}, {"model", g.config.to_json()}});
  doc["max_rel_error"] = g.result.max_rel_error;
  doc["coords_checked"] = g.result.coords_checked;
  doc["worst"] = {{"tensor", ModelParams::names(g.config).at(g.result.worst_tensor)},
                  {"index", g.result.worst_index},
                  {"analytic", g.result.worst_analytic},
                  {"numeric", g.result.worst_numeric}};
  doc["seconds"] = g.seconds;
  doc["passed"] = ok;
  if (out_path.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    write_json(out_path, doc);
    out << (ok ? "PASS" : "FAIL") << " max relative error " << g.result.max_rel_error << " over "
        << g.result.coords_checked << " coordinates\n";
  }
  return ok ? kOk : kRuntimeError;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue emotion classification (BiLSTM / SA-BiLSTM)", "dialoglow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Clean, tokenize and index a corpus");
  pre_cmd->add_option("input", pre.input, "Dataset JSON")->required();
  pre_cmd->add_option("--out", pre.out, "Output directory")->required();
  pre_cmd->add_option("--min-count", pre.min_count, "Drop tokens seen fewer times");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("input", tr.input, "Training dataset JSON")->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--config", tr.config, "Run config file");
  train_cmd->add_option("--variant", tr.variant, "bilstm or sa-bilstm");
  train_cmd->add_option("--seed", tr.seed, "Random seed");
  train_cmd->add_option("--epochs", tr.epochs, "Number of epochs");
  train_cmd->add_option("--lr", tr.lr, "Initial learning rate");
  train_cmd->add_option("--embeddings", tr.embeddings, "Pretrained vectors (token v1 ... vd per line)");
  train_cmd->add_option("--valid", tr.valid, "Validation dataset JSON");
  train_cmd->add_flag("--freeze-embeddings", tr.freeze, "Keep the embedding matrix fixed");

  ModelArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a labelled dataset");
  eval_cmd->add_option("checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("dataset", ev.input)->required();
  eval_cmd->add_option("--vocab", ev.vocab, "Vocabulary file (default: next to the checkpoint)");
  eval_cmd->add_option("--out", ev.out, "Write the JSON report here instead of stdout");

  ModelArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Annotate dialogues with predicted emotions");
  predict_cmd->add_option("checkpoint", pr.checkpoint)->required();
  predict_cmd->add_option("dialogues", pr.input)->required();
  predict_cmd->add_option("--vocab", pr.vocab, "Vocabulary file (default: next to the checkpoint)");
  predict_cmd->add_option("--out", pr.out, "Output JSON (default stdout)");

  std::uint64_t gc_seed = 7;
  std::string gc_out;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  gc_cmd->add_option("--seed", gc_seed, "Random seed");
  gc_cmd->add_option("--out", gc_out, "Write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (pre_cmd->parsed()) {
      return cmd_preprocess(pre, out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(tr, out);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(ev, out);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(pr, out);
    }
    return cmd_gradcheck(gc_seed, gc_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const CorpusError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const EmbeddingError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const MetricsError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace dialoglow::cli
