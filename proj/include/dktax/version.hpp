#pragma once

namespace dktax {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dktax
