#pragma once

namespace qkdlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qkdlab
