#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dialoglow/rng.hpp"
#include "dialoglow/tape.hpp"

// Differentiable primitives. Every function records its output on the tape
// of its first operand together with the matching backward rule. Shape
// mismatches throw ShapeError naming both shapes.
namespace dialoglow::ad {

enum class Mode { Train, Eval };

// Linear algebra
Var matmul(const Var& a, const Var& b);     // [p x q] . [q x r]
Var matmul_nt(const Var& a, const Var& b);  // [p x q] . [r x q]^T
Var affine(const Var& x, const Var& weight, const Var& bias);  // x W^T + b, W is [out x in]

// Elementwise
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_row(const Var& a, const Var& row);  // adds a [1 x c] row to every row of [r x c]
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);

// Structure
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var pad_rows(const Var& a, std::size_t total_rows);  // appends zero rows
Var gather_rows(const Var& table, std::span<const std::uint32_t> ids);

// Reductions
Var sum(const Var& a);

/// Column-wise maximum over the first `valid_len` rows, as a [1 x cols] row.
/// The gradient goes to the first row attaining each maximum.
Var max_over_time(const Var& h, std::size_t valid_len);

/// Softmax over the entries where `mask` is true; masked entries are exactly
/// zero. `scores` is a single row. Throws when no entry is unmasked.
Var masked_softmax(const Var& scores, const std::vector<bool>& mask);

/// Row-wise masked softmax of an [r x c] matrix with a row-major [r x c]
/// mask. Rows without any unmasked entry come out as all zeros.
Var masked_softmax_rows(const Var& scores, const std::vector<bool>& mask);

/// Inverted dropout: in Train mode each element is zeroed with probability p
/// and survivors are scaled by 1/(1-p). Identity in Eval mode or when p == 0.
/// Element i of the mask depends only on (stream drawn from rng, i).
Var dropout(const Var& x, double p, Mode mode, CounterRng& rng);

/// sum_i w[g_i] * -log softmax(logits_i)[g_i] / sum_i w[g_i]; zero (with a
/// zero gradient) when the batch weight sum is zero. `golds` index the
/// logit columns, `class_weights` has one entry per column.
Var weighted_cross_entropy(const Var& logits, std::span<const std::size_t> golds,
                           std::span<const double> class_weights);

}  // namespace dialoglow::ad
