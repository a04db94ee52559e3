#include "dialoglow/emotion.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace dialoglow {

namespace {

constexpr std::array<std::string_view, kNumLabels> kNames = {
    "neutral", "joy", "sadness", "anger", "fear", "surprise", "disgust", "non-neutral"};

constexpr std::array<std::string_view, kNumLabels> kDisplay = {
    "Neutral", "Joy", "Sadness", "Anger", "Fear", "Surprise", "Disgust", "Non-neutral"};

}  // namespace

std::string_view to_string(EmotionLabel label) { return kNames[index_of(label)]; }

std::string_view display_name(EmotionLabel label) { return kDisplay[index_of(label)]; }

std::optional<EmotionLabel> parse_label(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered == "nonneutral") {
    return EmotionLabel::NonNeutral;
  }
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (lowered == kNames[i]) {
      return kAllLabels[i];
    }
  }
  return std::nullopt;
}

}  // namespace dialoglow
