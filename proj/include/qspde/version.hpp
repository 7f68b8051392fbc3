#pragma once

namespace qspde {

inline constexpr const char* version_string = "1.0.0";

} // namespace qspde
