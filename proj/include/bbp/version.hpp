#pragma once

namespace bbp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bbp
