#pragma once

namespace nexrl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nexrl
