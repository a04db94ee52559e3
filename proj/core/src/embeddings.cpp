#include "dialoglow/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "dialoglow/rng.hpp"

namespace dialoglow {

namespace {

void fill_random_row(ad::Tensor& m, std::size_t row, std::uint64_t seed) {
  CounterRng rng(seed, 0x656d6265640000ULL + row);
  for (double& v : m.row(row)) {
    v = rng.uniform(-kOovInitRange, kOovInitRange);
  }
}

}  // namespace

ad::Tensor random_embedding_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  ad::Tensor m({rows, dim});
  for (std::size_t r = 0; r < rows; ++r) {
    if (r != Vocab::kPadId) {
      fill_random_row(m, r, seed);
    }
  }
  return m;
}

EmbeddingTable random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.matrix = random_embedding_matrix(vocab.size(), dim, seed);
  table.oov_count = vocab.size() - 1;
  return table;
}

EmbeddingTable load_pretrained(const std::filesystem::path& path, const Vocab& vocab, std::size_t dim,
                               std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw EmbeddingError("cannot open embedding file " + path.string());
  }
  EmbeddingTable table;
  table.matrix = ad::Tensor({vocab.size(), dim});
  std::vector<bool> found(vocab.size(), false);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto space = line.find(' ');
    if (space == std::string::npos) {
      throw EmbeddingError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                           " values, found 0");
    }
    const std::string_view rest(line.data() + space + 1, line.size() - space - 1);
    std::size_t fields = rest.empty() ? 0 : 1;
    for (char c : rest) {
      fields += c == ' ' ? 1 : 0;
    }
    if (fields != dim) {
      throw EmbeddingError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                           " values, found " + std::to_string(fields));
    }
    const std::string_view token(line.data(), space);
    if (!vocab.contains(token)) {
      continue;
    }
    const TokenId id = vocab.id(token);
    if (id == Vocab::kPadId || found[id]) {
      continue;
    }
    auto row = table.matrix.row(id);
    const char* p = rest.data();
    const char* end = rest.data() + rest.size();
    for (std::size_t k = 0; k < dim; ++k) {
      auto [next, ec] = std::from_chars(p, end, row[k]);
      if (ec != std::errc() || !std::isfinite(row[k])) {
        throw EmbeddingError(path.string() + ":" + std::to_string(line_no) + ": bad value at column " +
                             std::to_string(k + 1));
      }
      p = next;
      if (p < end && *p == ' ') {
        ++p;
      }
    }
    found[id] = true;
  }
  if (in.bad()) {
    throw EmbeddingError("I/O error reading " + path.string());
  }

  for (std::size_t r = 0; r < vocab.size(); ++r) {
    if (r != Vocab::kPadId && !found[r]) {
      fill_random_row(table.matrix, r, seed);
      ++table.oov_count;
    }
  }
  return table;
}

ad::Var lookup(const ad::Var& table, std::span<const TokenId> ids) { return ad::gather_rows(table, ids); }

}  // namespace dialoglow
