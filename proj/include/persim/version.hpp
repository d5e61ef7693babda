#pragma once

namespace persim {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace persim
