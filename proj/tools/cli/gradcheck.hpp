#pragma once

#include <cstdint>

#include "dialoglow/grad_check.hpp"
#include "dialoglow/model.hpp"

namespace dialoglow::cli {

struct ToyGradCheck {
  ModelConfig config;
  ad::GradCheckResult result;
  double seconds = 0.0;
};

/// Full SA-BiLSTM forward and weighted loss on a 3-utterance window
/// (at most 5 tokens each, d=8, l=4), checked coordinate by coordinate.
ToyGradCheck toy_gradcheck(std::uint64_t seed, double eps = 1e-5);

}  // namespace dialoglow::cli
