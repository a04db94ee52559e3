#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "dialoglow/tape.hpp"

namespace dialoglow::ad {

class GradCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Coordinates sampled per tensor; 0 checks every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Lower bound on the relative-error denominator, so coordinates whose
  /// true gradient is ~0 are judged by absolute error instead.
  double denominator_floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Builds a scalar objective on `tape` from leaves bound to `params` (same order).
using Objective = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares reverse-mode gradients with central differences
/// (f(x+eps) - f(x-eps)) / 2eps. Relative error per coordinate is
/// |a - n| / max(|a|, |n|, denominator_floor). Throws GradCheckError when the
/// objective is stochastic or produces non-finite values.
GradCheckResult grad_check(const Objective& f, std::span<Tensor* const> params,
                           const GradCheckOptions& options = {});

}  // namespace dialoglow::ad
