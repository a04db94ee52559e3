#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dialoglow/preprocess.hpp"

namespace dialoglow {

using TokenId = std::uint32_t;

class Vocab {
 public:
  static constexpr TokenId kPadId = 0;
  static constexpr TokenId kUnkId = 1;

  /// Fixed special order: <pad> <unk> <name> <location> <number> <url> <duplicate>.
  static const std::vector<std::string>& specials();

  Vocab();  // specials only

  static Vocab from_tokens(std::vector<std::string> id_to_token);

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t special_count() const { return specials().size(); }

  bool contains(std::string_view token) const;
  TokenId id(std::string_view token) const;  // <unk> when absent
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// FNV-1a 64 over the token list with each token followed by a newline (the bytes of vocab.txt), as 16 hex digits.
  std::string hash() const;

  /// One token per line; line number (from 0) is the id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  void assign(std::vector<std::string> id_to_token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Specials first, then tokens by descending count with lexicographic
/// tie-break; tokens seen fewer than `min_count` times are dropped.
Vocab build_vocab(std::span<const TokenSequence> corpus, std::size_t min_count);

std::vector<TokenId> encode(const TokenSequence& seq, const Vocab& vocab);

}  // namespace dialoglow
