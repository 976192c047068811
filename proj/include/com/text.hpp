#pragma once

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "com/error.hpp"

namespace com {

/// Shortest text that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename E = ConfigError>
double parse_double(std::string_view s, std::string_view what) {
    const std::string str(trim(s));
    if (str.empty()) throw E("empty value for " + std::string(what));
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(str.c_str(), &end);
    if (end != str.c_str() + str.size() || errno == ERANGE)
        throw E("invalid number '" + str + "' for " + std::string(what));
    return v;
}

template <typename E = ConfigError>
long long parse_int(std::string_view s, std::string_view what) {
    const auto t = trim(s);
    long long v = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw E("invalid integer '" + std::string(t) + "' for " + std::string(what));
    return v;
}

template <typename E = ConfigError>
std::vector<double> parse_double_list(std::string_view s, std::string_view what) {
    std::vector<double> out;
    if (trim(s).empty() || trim(s) == "none") return out;
    for (const auto& item : split(s, ',')) out.push_back(parse_double<E>(item, what));
    return out;
}

inline std::string join_doubles(const std::vector<double>& values) {
    if (values.empty()) return "none";
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

}  // namespace com
