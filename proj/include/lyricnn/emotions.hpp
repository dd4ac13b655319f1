#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lyricnn {

inline constexpr std::size_t kEmotionCount = 8;

// Canonical index order. Label vectors, model output units, serialized files
// and tie-breaking all use this order; it never changes.
enum class Emotion : std::uint8_t {
  anger = 0,
  confusion = 1,
  desire = 2,
  fear = 3,
  grief = 4,
  excitement = 5,
  love = 6,
  sadness = 7,
};

inline const std::array<std::string_view, kEmotionCount>& emotion_names() {
  static const std::array<std::string_view, kEmotionCount> names = {
      "anger", "confusion", "desire", "fear", "grief", "excitement", "love", "sadness"};
  return names;
}

inline std::string_view to_string(Emotion e) { return emotion_names()[static_cast<std::size_t>(e)]; }

inline std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }

// Case-insensitive on input; unknown names yield nullopt.
inline std::optional<Emotion> parse_emotion(std::string_view name) {
  std::string lowered(name);
  for (char& c : lowered) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  const auto& names = emotion_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (lowered == names[i]) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

}  // namespace lyricnn
