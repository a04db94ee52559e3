#include "dialoglow/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <stdexcept>

namespace dialoglow {

namespace bundled {
std::string_view emoji_tsv();
std::string_view entities_tsv();
}  // namespace bundled

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

constexpr std::array<std::string_view, 6> kAtomic = {token::kUnk,    token::kName, token::kLocation,
                                                     token::kNumber, token::kUrl,  token::kDuplicate};

// Length of the placeholder starting at text[pos], or 0.
std::size_t placeholder_at(std::string_view text, std::size_t pos) {
  if (pos >= text.size() || text[pos] != '<') {
    return 0;
  }
  for (auto p : kAtomic) {
    if (text.substr(pos, p.size()) == p) {
      return p.size();
    }
  }
  return 0;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

// Decodes one UTF-8 sequence at text[i]; malformed bytes decode to U+FFFD
// and advance by one.
char32_t next_codepoint(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    ++i;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > text.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

// ASCII stand-ins for typographic punctuation, so "don’t" keeps its apostrophe.
std::string_view typographic_ascii(char32_t cp) {
  switch (cp) {
    case 0x2018: case 0x2019: case 0x201B: case 0x2032:
      return "'";
    case 0x201C: case 0x201D: case 0x201F: case 0x2033:
      return "\"";
    case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015:
      return "-";
    case 0x2026:
      return "...";
    case 0x00A0: case 0x2002: case 0x2003: case 0x2009: case 0x200A: case 0x3000:
      return " ";
    default:
      return {};
  }
}

std::string squeeze_spaces(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending = false;
  for (char c : text) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) {
      out.push_back(' ');
      pending = false;
    }
    out.push_back(c);
  }
  return out;
}

bool word_start(std::string_view s, std::size_t i) { return i == 0 || !is_alnum(s[i - 1]); }

std::size_t url_length(std::string_view s, std::size_t i) {
  static constexpr std::array<std::string_view, 4> kPrefixes = {"http://", "https://", "ftp://", "www."};
  static const std::regex kDomain(R"(^[a-z0-9-]+(\.[a-z0-9-]+)*\.(com|net|org|edu|gov|io|tw|co|uk|ly|me)(/.*)?$)");

  if (!word_start(s, i) || !is_alnum(s[i])) {
    return 0;
  }
  std::size_t end = i;
  while (end < s.size() && !is_space(s[end])) {
    ++end;
  }
  static constexpr std::string_view kTrailing = ".,!?;:)]}'\"";
  while (end > i && kTrailing.find(s[end - 1]) != std::string_view::npos) {
    --end;
  }
  auto candidate = s.substr(i, end - i);
  for (auto p : kPrefixes) {
    if (candidate.size() > p.size() && candidate.substr(0, p.size()) == p) {
      return candidate.size();
    }
  }
  if (candidate.find('.') != std::string_view::npos && candidate.find('<') == std::string_view::npos &&
      std::regex_match(candidate.begin(), candidate.end(), kDomain)) {
    return candidate.size();
  }
  return 0;
}

std::string replace_urls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (auto p = placeholder_at(s, i)) {
      out.append(s.substr(i, p));
      i += p;
    } else if (auto u = url_length(s, i)) {
      out.append(token::kUrl);
      i += u;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

std::string replace_numbers(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (auto p = placeholder_at(s, i)) {
      out.append(s.substr(i, p));
      i += p;
      continue;
    }
    if (!is_digit(s[i]) || !word_start(s, i)) {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) {
      ++j;
    }
    while (j + 1 < s.size() && (s[j] == '.' || s[j] == ',') && is_digit(s[j + 1])) {
      j += 1;
      while (j < s.size() && is_digit(s[j])) {
        ++j;
      }
    }
    if (j == s.size() || !is_alnum(s[j])) {
      out.append(token::kNumber);
    } else {
      out.append(s.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

}  // namespace

bool is_placeholder(std::string_view t) {
  return std::find(kAtomic.begin(), kAtomic.end(), t) != kAtomic.end();
}

// --- EmojiTable -------------------------------------------------------------

EmojiTable EmojiTable::from_tsv(std::string_view text) {
  EmojiTable table;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (line.empty() || line.front() == '#') {
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw std::invalid_argument("emoji table line " + std::to_string(line_no) + ": expected two columns");
    }
    auto cp = static_cast<char32_t>(std::stoul(std::string(line.substr(0, tab)), nullptr, 16));
    table.meanings_[cp] = std::string(line.substr(tab + 1));
  }
  return table;
}

const EmojiTable& EmojiTable::bundled() {
  static const EmojiTable table = from_tsv(bundled::emoji_tsv());
  return table;
}

const std::string* EmojiTable::find(char32_t codepoint) const {
  auto it = meanings_.find(codepoint);
  return it == meanings_.end() ? nullptr : &it->second;
}

// --- EntityLexicon ----------------------------------------------------------

EntityLexicon EntityLexicon::from_tsv(std::string_view text) {
  EntityLexicon lex;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (line.empty() || line.front() == '#') {
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw std::invalid_argument("entity lexicon line " + std::to_string(line_no) + ": expected two columns");
    }
    auto kind = line.substr(tab + 1);
    if (kind == "name") {
      lex.add(line.substr(0, tab), Kind::Name);
    } else if (kind == "location") {
      lex.add(line.substr(0, tab), Kind::Location);
    } else {
      throw std::invalid_argument("entity lexicon line " + std::to_string(line_no) + ": unknown kind '" +
                                  std::string(kind) + "'");
    }
  }
  return lex;
}

const EntityLexicon& EntityLexicon::bundled() {
  static const EntityLexicon lex = from_tsv(bundled::entities_tsv());
  return lex;
}

void EntityLexicon::add(std::string_view surface, Kind kind) {
  std::string normalized;
  for (char c : surface) {
    normalized.push_back(lower(c));
  }
  normalized = squeeze_spaces(normalized);
  if (normalized.empty()) {
    return;
  }
  auto head = normalized.substr(0, normalized.find(' '));
  auto& bucket = by_head_[head];
  bucket.emplace_back(std::move(normalized), kind);
  std::stable_sort(bucket.begin(), bucket.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  ++size_;
}

std::size_t EntityLexicon::match(std::string_view text, std::size_t pos, Kind& kind) const {
  if (!word_start(text, pos) || pos >= text.size() || !is_alnum(text[pos])) {
    return 0;
  }
  std::size_t head_end = pos;
  while (head_end < text.size() && is_alnum(text[head_end])) {
    ++head_end;
  }
  auto it = by_head_.find(std::string(text.substr(pos, head_end - pos)));
  if (it == by_head_.end()) {
    return 0;
  }
  for (const auto& [surface, k] : it->second) {
    const std::size_t end = pos + surface.size();
    if (text.substr(pos, surface.size()) == surface && (end == text.size() || !is_alnum(text[end]))) {
      kind = k;
      return surface.size();
    }
  }
  return 0;
}

// --- TextCleaner ------------------------------------------------------------

TextCleaner::TextCleaner() : TextCleaner(EmojiTable::bundled(), EntityLexicon::bundled()) {}

TextCleaner::TextCleaner(EmojiTable emoji, EntityLexicon entities)
    : emoji_(std::move(emoji)), entities_(std::move(entities)) {}

std::string TextCleaner::clean(std::string_view raw) const {
  // Unicode filtering, emoji meanings and lowercasing.
  std::string ascii;
  ascii.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size();) {
    const char32_t cp = next_codepoint(raw, i);
    if (cp < 0x80) {
      const char c = static_cast<char>(cp);
      ascii.push_back((cp < 0x20 || cp == 0x7F) ? ' ' : lower(c));
    } else if (auto ascii_form = typographic_ascii(cp); !ascii_form.empty()) {
      ascii.append(ascii_form);
    } else if (const std::string* meaning = emoji_.find(cp)) {
      ascii.push_back(' ');
      for (char c : *meaning) {
        ascii.push_back(lower(c));
      }
      ascii.push_back(' ');
    }
  }

  std::string text = squeeze_spaces(replace_numbers(replace_urls(ascii)));

  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    EntityLexicon::Kind kind{};
    if (auto p = placeholder_at(text, i)) {
      out.append(text, i, p);
      i += p;
    } else if (auto m = entities_.match(text, i, kind)) {
      out.append(kind == EntityLexicon::Kind::Name ? token::kName : token::kLocation);
      i += m;
    } else {
      out.push_back(text[i++]);
    }
  }
  return squeeze_spaces(out);
}

std::string clean_text(std::string_view raw) {
  static const TextCleaner cleaner;
  return cleaner.clean(raw);
}

// --- collapse_duplicates ----------------------------------------------------

std::string collapse_duplicates(std::string_view text) {
  std::vector<std::string> pieces;
  std::string word;
  bool word_has_run = false;
  auto flush = [&] {
    if (!word.empty()) {
      pieces.push_back(std::move(word));
      if (word_has_run) {
        pieces.emplace_back(token::kDuplicate);
      }
    }
    word.clear();
    word_has_run = false;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      flush();
      ++i;
      continue;
    }
    if (auto p = placeholder_at(text, i)) {
      flush();
      pieces.emplace_back(text.substr(i, p));
      i += p;
      continue;
    }
    const char c = text[i];
    std::size_t j = i + 1;
    while (j < text.size() && text[j] == c && placeholder_at(text, j) == 0) {
      ++j;
    }
    const std::size_t run = j - i;
    if (is_alpha(c) && run >= 3) {
      word.push_back(c);
      word_has_run = true;
    } else if (is_punct(c) && run >= 2) {
      flush();
      pieces.emplace_back(1, c);
      pieces.emplace_back(token::kDuplicate);
    } else {
      word.append(run, c);
    }
    i = j;
  }
  flush();

  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) {
      out.push_back(' ');
    }
    out += p;
  }
  return out;
}

// --- tokenize ---------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 10> kEmoticons = {":'(", ":-)", ":-(", ";-)", ":)",
                                                         ":(",  ";)",  ":d",  ":p",  ":o"};

std::size_t emoticon_at(std::string_view s, std::size_t i) {
  if (i > 0 && is_alnum(s[i - 1])) {
    return 0;
  }
  for (auto e : kEmoticons) {
    if (s.substr(i, e.size()) == e) {
      const std::size_t end = i + e.size();
      if (is_alpha(e.back()) && end < s.size() && is_alnum(s[end])) {
        continue;
      }
      return e.size();
    }
  }
  return 0;
}

bool is_word_char(char c) { return is_alnum(c) || c == '_'; }

std::size_t utf8_length(unsigned char b) {
  if (b >= 0xF0) return 4;
  if (b >= 0xE0) return 3;
  if (b >= 0xC0) return 2;
  return 1;
}

}  // namespace

TokenSequence tokenize(std::string_view text, std::size_t source_utterance_index) {
  TokenSequence seq;
  seq.source_utterance_index = source_utterance_index;
  auto emit = [&](std::string_view t) {
    std::string tok;
    tok.reserve(t.size());
    for (char c : t) {
      tok.push_back(lower(c));
    }
    seq.tokens.push_back(std::move(tok));
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (auto p = placeholder_at(text, i)) {
      emit(text.substr(i, p));
      i += p;
      continue;
    }
    if (auto e = emoticon_at(text, i)) {
      emit(text.substr(i, e));
      i += e;
      continue;
    }
    if ((c == '@' || c == '#') && i + 1 < text.size() && is_word_char(text[i + 1]) &&
        (i == 0 || !is_alnum(text[i - 1]))) {
      std::size_t j = i + 1;
      while (j < text.size() && is_word_char(text[j])) {
        ++j;
      }
      emit(text.substr(i, j - i));
      i = j;
      continue;
    }
    if (is_alnum(c)) {
      std::size_t j = i + 1;
      while (j < text.size()) {
        if (is_word_char(text[j])) {
          ++j;
        } else if ((text[j] == '\'' || text[j] == '-') && j + 1 < text.size() && is_alnum(text[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
      emit(text.substr(i, j - i));
      i = j;
      continue;
    }
    const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(c)), text.size() - i);
    emit(text.substr(i, len));
    i += len;
  }
  if (seq.tokens.empty()) {
    seq.tokens.emplace_back(token::kUnk);
  }
  return seq;
}

TokenSequence normalize(std::string_view raw, const TextCleaner& cleaner, std::size_t source_utterance_index) {
  return tokenize(collapse_duplicates(cleaner.clean(raw)), source_utterance_index);
}

TokenSequence normalize(std::string_view raw, std::size_t source_utterance_index) {
  return tokenize(collapse_duplicates(clean_text(raw)), source_utterance_index);
}

}  // namespace dialoglow
