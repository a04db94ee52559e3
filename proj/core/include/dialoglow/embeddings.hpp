#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>

#include "dialoglow/ops.hpp"
#include "dialoglow/tensor.hpp"
#include "dialoglow/vocab.hpp"

namespace dialoglow {

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmbeddingTable {
  ad::Tensor matrix;  // |V| x d; row 0 (<pad>) is zero
  bool trainable = true;
  std::size_t oov_count = 0;
};

inline constexpr double kOovInitRange = 0.05;

/// [rows x dim] matrix with row 0 zero and every other row uniform in
/// [-0.05, 0.05]; row r uses its own stream of `seed`.
ad::Tensor random_embedding_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed);

/// Every row except <pad> drawn uniformly from [-0.05, 0.05]. Row r uses its
/// own stream of `seed`, so results do not depend on vocabulary order.
EmbeddingTable random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed);

/// Reads `token v1 ... vd` lines. Vocabulary rows found in the file are
/// copied; the rest (and every special except <pad>) are random as above and
/// counted in oov_count.
EmbeddingTable load_pretrained(const std::filesystem::path& path, const Vocab& vocab,
                               std::size_t dim, std::uint64_t seed);

/// Rows of `table` selected by `ids` ([m x d]). Throws std::out_of_range for ids >= |V|.
ad::Var lookup(const ad::Var& table, std::span<const TokenId> ids);

}  // namespace dialoglow
