#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace dialoglow {

// The eight gold labels of the corpus. The first four are the scored
// ("considered") emotions; their order doubles as the metric column order.
enum class EmotionLabel : std::uint8_t {
  Neutral = 0,
  Joy,
  Sadness,
  Anger,
  Fear,
  Surprise,
  Disgust,
  NonNeutral,
};

inline constexpr std::size_t kNumLabels = 8;
inline constexpr std::size_t kNumConsidered = 4;

inline constexpr std::array<EmotionLabel, kNumLabels> kAllLabels = {
    EmotionLabel::Neutral, EmotionLabel::Joy,      EmotionLabel::Sadness,
    EmotionLabel::Anger,   EmotionLabel::Fear,     EmotionLabel::Surprise,
    EmotionLabel::Disgust, EmotionLabel::NonNeutral};

inline constexpr std::array<EmotionLabel, kNumConsidered> kConsideredLabels = {
    EmotionLabel::Neutral, EmotionLabel::Joy, EmotionLabel::Sadness, EmotionLabel::Anger};

constexpr std::size_t index_of(EmotionLabel label) { return static_cast<std::size_t>(label); }

constexpr bool is_considered(EmotionLabel label) { return index_of(label) < kNumConsidered; }

constexpr EmotionLabel label_at(std::size_t index) { return kAllLabels.at(index); }

/// Canonical lowercase name ("neutral", ..., "non-neutral").
std::string_view to_string(EmotionLabel label);

/// Display name used in report tables ("Neutral", "Joy", ...).
std::string_view display_name(EmotionLabel label);

/// Case-insensitive. Accepts "non-neutral" and "nonneutral" for NonNeutral.
std::optional<EmotionLabel> parse_label(std::string_view text);

}  // namespace dialoglow
