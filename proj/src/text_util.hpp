#pragma once

#include <charconv>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ctd3 {

// Shortest-exact is not what we want here: checkpoints and metrics pin the
// format to 17 significant digits so files are byte-stable across writers.
inline std::string_view format_double(char (&buf)[40], double v) {
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return {buf, static_cast<std::size_t>(res.ptr - buf)};
}

inline std::string format_double(double v) {
    char buf[40];
    return std::string(format_double(buf, v));
}

inline double parse_double(std::string_view token, std::string_view what) {
    double v = 0.0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw std::runtime_error("bad " + std::string(what) + ": '" + std::string(token) + "'");
    return v;
}

inline long long parse_int(std::string_view token, std::string_view what) {
    long long v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw std::runtime_error("bad " + std::string(what) + ": '" + std::string(token) + "'");
    return v;
}

} // namespace ctd3
