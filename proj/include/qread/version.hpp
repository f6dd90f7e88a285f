#pragma once

namespace qread {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qread
