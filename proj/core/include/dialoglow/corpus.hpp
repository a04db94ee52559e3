#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialoglow/emotion.hpp"

namespace dialoglow {

enum class Split { Train, Validation, Test };

std::string_view to_string(Split split);

struct Utterance {
  std::string speaker_id;
  std::string raw_text;  // byte-exact copy of the input field
  EmotionLabel gold = EmotionLabel::Neutral;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
};

struct DialogueWindow {
  std::string source_dialogue_id;
  std::size_t start_index = 0;
  std::vector<Utterance> utterances;
};

struct Dataset {
  std::vector<Dialogue> dialogues;
  Split split = Split::Train;

  std::size_t utterance_count() const;
};

/// Raised for malformed corpus files. `byte_offset` is set for JSON syntax
/// errors, `dialogue_index` for content errors.
class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& what, std::size_t byte_offset = kNone,
                       std::size_t dialogue_index = kNone)
      : std::runtime_error(what), byte_offset_(byte_offset), dialogue_index_(dialogue_index) {}

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t byte_offset() const { return byte_offset_; }
  std::size_t dialogue_index() const { return dialogue_index_; }

 private:
  std::size_t byte_offset_;
  std::size_t dialogue_index_;
};

// Input shape: a JSON array of dialogues, each an array of objects with
// string fields `speaker`, `utterance`, `emotion`. Extra fields are ignored.
// Dialogue ids are the zero-based position in the file.
Dataset parse_dataset(std::string_view json_text, Split split);
Dataset load_dataset(const std::filesystem::path& path, Split split);

nlohmann::ordered_json serialize(const Dataset& ds);

/// Greedy contiguous chunking into windows of at most `n_max` utterances.
std::vector<DialogueWindow> split_windows(const Dialogue& dialogue, std::size_t n_max);

/// Seeded random hold-out: returns (remaining, held_out) with
/// round(fraction * dialogues) dialogues held out.
std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction, std::uint64_t seed);

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  std::size_t unique_tokens = 0;
  std::array<std::size_t, kNumLabels> label_counts{};

  double label_percent(EmotionLabel label) const;
  nlohmann::ordered_json to_json() const;
};

using TokenizerFn = std::function<std::vector<std::string>(std::string_view)>;

CorpusStats corpus_stats(const Dataset& ds, const TokenizerFn& tokenizer);

}  // namespace dialoglow
