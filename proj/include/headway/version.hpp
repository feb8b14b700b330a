#pragma once

namespace headway {
inline constexpr const char* kVersion = "0.1.0";
}
