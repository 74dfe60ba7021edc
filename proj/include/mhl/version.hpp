#pragma once

namespace mhl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mhl
