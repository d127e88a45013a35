#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace baa {

/// Shortest round-trip decimal representation; locale-independent and stable.
inline std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

}  // namespace baa
