#pragma once

namespace sppb {

inline constexpr const char* version = "0.1.0";

} // namespace sppb
