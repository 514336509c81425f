#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace simfl {

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kPixels = kImageSide * kImageSide;
inline constexpr std::size_t kClasses = 10;
inline constexpr std::size_t kWeightCount = kPixels * kClasses;  // 7840
inline constexpr std::size_t kParamCount = kWeightCount + kClasses;  // 7850

// Which parameter view a client uploads for similarity analysis.
enum class UpdateType : std::uint8_t {
  WW = 0,   // weights
  WBW = 1,  // weights + bias
  WG = 2,   // weight gradient
  WBG = 3,  // weight gradient + bias gradient
};

constexpr bool includes_bias(UpdateType t) {
  return t == UpdateType::WBW || t == UpdateType::WBG;
}

constexpr bool uses_gradient(UpdateType t) {
  return t == UpdateType::WG || t == UpdateType::WBG;
}

constexpr std::size_t update_length(UpdateType t) {
  return includes_bias(t) ? kParamCount : kWeightCount;
}

std::string to_string(UpdateType t);
UpdateType parse_update_type(std::string_view s);  // throws ConfigError

}  // namespace simfl
