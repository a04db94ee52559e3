#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "dialoglow/emotion.hpp"

namespace dialoglow {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Counts over the four considered labels: rows are gold, columns predicted.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumConsidered>, kNumConsidered> counts{};
  std::uint64_t ignored = 0;  // golds outside the considered set

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t gold_count(std::size_t cls) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Predictions must be considered labels; golds outside the set are counted
/// in `ignored` only.
ConfusionMatrix confusion(std::span<const EmotionLabel> preds, std::span<const EmotionLabel> golds);

/// Overall accuracy on scored utterances (trace / total).
double wa(const ConfusionMatrix& cm);

/// Mean recall over classes present in gold.
double uwa(const ConfusionMatrix& cm);

/// Recall per considered class; empty for classes absent from gold.
std::array<std::optional<double>, kNumConsidered> per_class_accuracy(const ConfusionMatrix& cm);

struct EvalReport {
  double wa = 0.0;
  double uwa = 0.0;
  std::array<std::optional<double>, kNumConsidered> per_class{};
  ConfusionMatrix counts;

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

EvalReport make_report(const ConfusionMatrix& cm);
EvalReport report(std::span<const EmotionLabel> preds, std::span<const EmotionLabel> golds);

/// "WA UWA Neutral Joy Sadness Anger" header and a matching row of
/// percentages with one decimal.
std::string table_header();
std::string table_row(const EvalReport& r);

}  // namespace dialoglow
