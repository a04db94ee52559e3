#include "dialoglow/vocab.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dialoglow {

const std::vector<std::string>& Vocab::specials() {
  static const std::vector<std::string> kSpecials = {
      std::string(token::kPad),    std::string(token::kUnk), std::string(token::kName),
      std::string(token::kLocation), std::string(token::kNumber), std::string(token::kUrl),
      std::string(token::kDuplicate)};
  return kSpecials;
}

Vocab::Vocab() { assign(specials()); }

Vocab Vocab::from_tokens(std::vector<std::string> id_to_token) {
  Vocab v;
  v.assign(std::move(id_to_token));
  return v;
}

void Vocab::assign(std::vector<std::string> id_to_token) {
  const auto& sp = specials();
  if (id_to_token.size() < sp.size() || !std::equal(sp.begin(), sp.end(), id_to_token.begin())) {
    throw std::invalid_argument("vocabulary must start with the special tokens in canonical order");
  }
  Vocab& v = *this;
  v.token_to_id_.clear();
  v.id_to_token_ = std::move(id_to_token);
  v.token_to_id_.reserve(v.id_to_token_.size());
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    const auto& tok = v.id_to_token_[i];
    if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos) {
      throw std::invalid_argument("vocabulary token " + std::to_string(i) + " is empty or contains whitespace");
    }
    if (!v.token_to_id_.emplace(tok, static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + tok + "'");
    }
  }
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }

TokenId Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(TokenId id) const { return id_to_token_.at(id); }

std::string Vocab::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& tok : id_to_token_) {
    for (char c : tok) {
      feed(static_cast<unsigned char>(c));
    }
    feed('\n');
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write vocabulary file " + path.string());
  }
  for (const auto& tok : id_to_token_) {
    out << tok << '\n';
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open vocabulary file " + path.string());
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

Vocab build_vocab(std::span<const TokenSequence> corpus, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& seq : corpus) {
    for (const auto& tok : seq.tokens) {
      ++freq[tok];
    }
  }
  const auto& sp = Vocab::specials();
  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(freq.size());
  for (auto& [tok, count] : freq) {
    if (count >= min_count && std::find(sp.begin(), sp.end(), tok) == sp.end()) {
      ranked.emplace_back(tok, count);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens = sp;
  for (auto& [tok, count] : ranked) {
    tokens.push_back(std::move(tok));
  }
  return Vocab::from_tokens(std::move(tokens));
}

std::vector<TokenId> encode(const TokenSequence& seq, const Vocab& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(seq.tokens.size());
  for (const auto& tok : seq.tokens) {
    ids.push_back(vocab.id(tok));
  }
  return ids;
}

}  // namespace dialoglow
