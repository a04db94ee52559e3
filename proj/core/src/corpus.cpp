#include "dialoglow/corpus.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "dialoglow/rng.hpp"

namespace dialoglow {

using nlohmann::json;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "validation";
    case Split::Test:
      return "test";
  }
  return "unknown";
}

std::size_t Dataset::utterance_count() const {
  return std::accumulate(dialogues.begin(), dialogues.end(), std::size_t{0},
                         [](std::size_t acc, const Dialogue& d) { return acc + d.utterances.size(); });
}

namespace {

const std::string& required_string(const json& obj, const char* field, std::size_t dialogue,
                                   std::size_t utterance) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    throw CorpusError("dialogue " + std::to_string(dialogue) + ", utterance " + std::to_string(utterance) +
                          ": missing string field '" + field + "'",
                      CorpusError::kNone, dialogue);
  }
  return it->get_ref<const std::string&>();
}

}  // namespace

Dataset parse_dataset(std::string_view json_text, Split split) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw CorpusError(std::string("malformed JSON at byte ") + std::to_string(e.byte) + ": " + e.what(),
                      e.byte);
  }
  if (!root.is_array()) {
    throw CorpusError("top-level JSON value must be an array of dialogues");
  }

  Dataset ds;
  ds.split = split;
  ds.dialogues.reserve(root.size());
  for (std::size_t di = 0; di < root.size(); ++di) {
    const json& dj = root[di];
    if (!dj.is_array()) {
      throw CorpusError("dialogue " + std::to_string(di) + " is not an array", CorpusError::kNone, di);
    }
    if (dj.empty()) {
      throw CorpusError("dialogue " + std::to_string(di) + " is empty", CorpusError::kNone, di);
    }
    Dialogue d;
    d.id = std::to_string(di);
    d.utterances.reserve(dj.size());
    for (std::size_t ui = 0; ui < dj.size(); ++ui) {
      const json& uj = dj[ui];
      if (!uj.is_object()) {
        throw CorpusError("dialogue " + std::to_string(di) + ", utterance " + std::to_string(ui) +
                              " is not an object",
                          CorpusError::kNone, di);
      }
      Utterance u;
      u.speaker_id = required_string(uj, "speaker", di, ui);
      u.raw_text = required_string(uj, "utterance", di, ui);
      const std::string& emotion = required_string(uj, "emotion", di, ui);
      auto label = parse_label(emotion);
      if (!label) {
        throw CorpusError("unknown emotion \"" + emotion + "\" in dialogue " + std::to_string(di) +
                              ", utterance " + std::to_string(ui),
                          CorpusError::kNone, di);
      }
      u.gold = *label;
      d.utterances.push_back(std::move(u));
    }
    ds.dialogues.push_back(std::move(d));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError("cannot open dataset file " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_dataset(text, split);
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what(), e.byte_offset(), e.dialogue_index());
  }
}

nlohmann::ordered_json serialize(const Dataset& ds) {
  auto root = nlohmann::ordered_json::array();
  for (const auto& d : ds.dialogues) {
    auto dj = nlohmann::ordered_json::array();
    for (const auto& u : d.utterances) {
      dj.push_back({{"speaker", u.speaker_id}, {"utterance", u.raw_text}, {"emotion", to_string(u.gold)}});
    }
    root.push_back(std::move(dj));
  }
  return root;
}

std::vector<DialogueWindow> split_windows(const Dialogue& dialogue, std::size_t n_max) {
  if (n_max == 0) {
    throw std::invalid_argument("split_windows: n_max must be positive");
  }
  std::vector<DialogueWindow> windows;
  for (std::size_t start = 0; start < dialogue.utterances.size(); start += n_max) {
    const std::size_t end = std::min(start + n_max, dialogue.utterances.size());
    DialogueWindow w;
    w.source_dialogue_id = dialogue.id;
    w.start_index = start;
    w.utterances.assign(dialogue.utterances.begin() + static_cast<std::ptrdiff_t>(start),
                        dialogue.utterances.begin() + static_cast<std::ptrdiff_t>(end));
    windows.push_back(std::move(w));
  }
  return windows;
}

std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("holdout_split: fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(ds.dialogues.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, 0x686f6c646f7574ULL);
  rng.shuffle(order);
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));

  std::vector<bool> is_held(order.size(), false);
  for (std::size_t i = 0; i < held; ++i) {
    is_held[order[i]] = true;
  }
  Dataset rest{{}, ds.split};
  Dataset out{{}, Split::Validation};
  for (std::size_t i = 0; i < ds.dialogues.size(); ++i) {
    (is_held[i] ? out : rest).dialogues.push_back(ds.dialogues[i]);
  }
  return {std::move(rest), std::move(out)};
}

double CorpusStats::label_percent(EmotionLabel label) const {
  if (utterances == 0) {
    return 0.0;
  }
  return 100.0 * static_cast<double>(label_counts[index_of(label)]) / static_cast<double>(utterances);
}

nlohmann::ordered_json CorpusStats::to_json() const {
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (auto label : kAllLabels) {
    hist[std::string(to_string(label))] = {{"count", label_counts[index_of(label)]},
                                           {"percent", label_percent(label)}};
  }
  return {{"dialogues", dialogues},
          {"utterances", utterances},
          {"unique_tokens", unique_tokens},
          {"label_histogram", std::move(hist)}};
}

CorpusStats corpus_stats(const Dataset& ds, const TokenizerFn& tokenizer) {
  CorpusStats stats;
  stats.dialogues = ds.dialogues.size();
  std::unordered_set<std::string> seen;
  for (const auto& d : ds.dialogues) {
    for (const auto& u : d.utterances) {
      ++stats.utterances;
      ++stats.label_counts[index_of(u.gold)];
      if (tokenizer) {
        for (auto& tok : tokenizer(u.raw_text)) {
          seen.insert(std::move(tok));
        }
      }
    }
  }
  stats.unique_tokens = seen.size();
  return stats;
}

}  // namespace dialoglow
