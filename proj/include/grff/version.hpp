#pragma once

namespace grff {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace grff
