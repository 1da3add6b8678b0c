#pragma once

namespace rastercast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rastercast
