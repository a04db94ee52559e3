#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dialoglow {

namespace token {
inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kName = "<name>";
inline constexpr std::string_view kLocation = "<location>";
inline constexpr std::string_view kNumber = "<number>";
inline constexpr std::string_view kUrl = "<url>";
inline constexpr std::string_view kDuplicate = "<duplicate>";
}  // namespace token

struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t source_utterance_index = 0;
};

/// Codepoint -> textual meaning, e.g. U+1F642 -> "slightly smiling face".
class EmojiTable {
 public:
  EmojiTable() = default;

  /// Two tab-separated columns: hex codepoint, meaning. '#' starts a comment line.
  static EmojiTable from_tsv(std::string_view text);
  static const EmojiTable& bundled();

  const std::string* find(char32_t codepoint) const;
  std::size_t size() const { return meanings_.size(); }

 private:
  std::unordered_map<char32_t, std::string> meanings_;
};

/// Person-name and location gazetteer. Entries may span several words.
class EntityLexicon {
 public:
  enum class Kind { Name, Location };

  EntityLexicon() = default;

  /// Two tab-separated columns: lowercase surface form, `name` or `location`.
  static EntityLexicon from_tsv(std::string_view text);
  static const EntityLexicon& bundled();

  void add(std::string_view surface, Kind kind);
  std::size_t size() const { return size_; }

  /// Length in bytes of the longest entry that starts at `pos` of `text` and
  /// ends at a word boundary; 0 when nothing matches. `text` is lowercase
  /// with single spaces between words.
  std::size_t match(std::string_view text, std::size_t pos, Kind& kind) const;

 private:
  // Keyed by the entry's first word; candidates sorted by descending length.
  std::unordered_map<std::string, std::vector<std::pair<std::string, Kind>>> by_head_;
  std::size_t size_ = 0;
};

/// The cleaning stage: Unicode filtering, emoji meanings, lowercasing and
/// placeholder substitution for websites, numerals, names and locations.
class TextCleaner {
 public:
  TextCleaner();  // bundled tables
  TextCleaner(EmojiTable emoji, EntityLexicon entities);

  std::string clean(std::string_view raw) const;

 private:
  EmojiTable emoji_;
  EntityLexicon entities_;
};

std::string clean_text(std::string_view raw);

/// Collapses letter runs of 3+ to one letter (marker after the token) and
/// punctuation runs of 2+ to one mark followed by the marker.
std::string collapse_duplicates(std::string_view text);

TokenSequence tokenize(std::string_view text, std::size_t source_utterance_index = 0);

/// clean_text -> collapse_duplicates -> tokenize.
TokenSequence normalize(std::string_view raw, const TextCleaner& cleaner,
                        std::size_t source_utterance_index = 0);
TokenSequence normalize(std::string_view raw, std::size_t source_utterance_index = 0);

/// Placeholders the tokenizer keeps atomic (every special except `<pad>`).
bool is_placeholder(std::string_view token);

}  // namespace dialoglow
