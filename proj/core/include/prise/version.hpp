#pragma once

namespace prise {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace prise
