#include "dialoglow/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dialoglow/rng.hpp"

namespace dialoglow::ad {

namespace {

double evaluate(const Objective& f, std::span<Tensor* const> params, std::vector<Tensor>* grads) {
  Tape tape;
  tape.set_check_finite(true);
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    leaves.push_back(tape.parameter(*params[i], grads != nullptr ? &(*grads)[i] : nullptr));
  }
  Var loss;
  try {
    loss = f(tape, leaves);
  } catch (const std::domain_error& e) {
    throw GradCheckError(std::string("objective produced a non-finite value: ") + e.what());
  }
  if (tape.stochastic()) {
    throw GradCheckError("objective is stochastic (train-mode dropout); gradient checks need a deterministic f");
  }
  const double value = loss.value().item();
  if (!std::isfinite(value)) {
    throw GradCheckError("objective value is not finite");
  }
  if (grads != nullptr) {
    tape.backward(loss);
  }
  return value;
}

}  // namespace

GradCheckResult grad_check(const Objective& f, std::span<Tensor* const> params, const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) {
    analytic.emplace_back(p->shape());
  }
  evaluate(f, params, &analytic);
  for (const auto& g : analytic) {
    if (!g.all_finite()) {
      throw GradCheckError("analytic gradient is not finite");
    }
  }

  GradCheckResult result;
  CounterRng rng(options.seed, 0x67636865636bULL);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor != 0 && coords.size() > options.max_coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const double original = p[idx];
      p[idx] = original + options.eps;
      const double plus = evaluate(f, params, nullptr);
      p[idx] = original - options.eps;
      const double minus = evaluate(f, params, nullptr);
      p[idx] = original;

      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[t][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (rel > result.max_rel_error || result.coords_checked == 1) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        result.worst_tensor = t;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dialoglow::ad
