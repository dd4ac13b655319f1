#pragma once

namespace lyricnn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace lyricnn
