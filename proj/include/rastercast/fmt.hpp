#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <system_error>

#include "rastercast/error.hpp"

namespace rastercast {

// Shortest decimal string that parses back to exactly the same double.
inline std::string format_exact(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Fixed 9-significant-digit form for human-facing report files.
inline std::string format_g9(double v) {
    char buf[64];
    int n = std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf, static_cast<std::size_t>(n));
}

// Parse a whole token as a double; the entire token must be consumed.
inline bool parse_double(std::string_view tok, double& out) {
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

inline bool parse_long(std::string_view tok, long long& out) {
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return res.ec == std::errc{} && res.ptr == tok.data() + tok.size();
}

}  // namespace rastercast
