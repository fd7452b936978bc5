#pragma once

namespace mrgd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mrgd
