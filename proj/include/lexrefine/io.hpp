#pragma once

// File, TSV, hashing and timestamp helpers shared by every module.

#include <lexrefine/error.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace lexrefine {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

// Writes through a temporary sibling so readers never observe a partial file.
inline void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io, "cannot write file: " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(Errc::io, "write failed: " + path.string());
    }
    fs::rename(tmp, path);
}

struct Line {
    std::size_t number;  // 1-based
    std::string_view text;
};

// Splits on '\n'; a trailing '\r' is dropped and a final empty line is not reported.
// Lines view into `content`, which must outlive the result.
std::vector<Line> split_lines(std::string&&) = delete;

inline std::vector<Line> split_lines(std::string_view content) {
    std::vector<Line> lines;
    std::size_t pos = 0, number = 1;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? content.size() : nl;
        std::string_view text = content.substr(pos, end - pos);
        if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
        lines.push_back({number++, text});
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t tab = line.find('\t', pos);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Fixed-point rendering used for every real-valued TSV column.
inline std::string fixed(double v, int decimals) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(decimals) << v;
    return ss.str();
}

// Shortest round-trip-ish rendering: integers print without a fraction.
inline std::string compact(double v) {
    std::ostringstream ss;
    ss << std::setprecision(15) << v;
    return ss.str();
}

// Whole-string parse; leading '+', whitespace and overflow are rejected.
inline std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
    return v;
}

// Finite decimal or scientific notation only.
inline std::optional<double> parse_double(std::string_view s) {
    double v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// ISO-8601 timestamps

using UtcTime = std::chrono::sys_seconds;

namespace detail {
// days_from_civil, proleptic Gregorian.
constexpr long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

inline bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        out = out * 10 + (s[i] - '0');
    }
    return true;
}
}  // namespace detail

// Accepts YYYY-MM-DD[THH:MM[:SS[.frac]]][Z|+HH:MM|+HHMM]; no zone means UTC.
// Fractional seconds are accepted and truncated.
inline std::optional<UtcTime> parse_iso8601(std::string_view s) {
    int y, mo, d, h = 0, mi = 0, sec = 0;
    if (!detail::digits(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || s[7] != '-' ||
        !detail::digits(s, 5, 2, mo) || !detail::digits(s, 8, 2, d))
        return std::nullopt;
    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == 't' || s[pos] == ' ')) {
        if (!detail::digits(s, pos + 1, 2, h) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
            !detail::digits(s, pos + 4, 2, mi))
            return std::nullopt;
        pos += 6;
        if (pos < s.size() && s[pos] == ':') {
            if (!detail::digits(s, pos + 1, 2, sec)) return std::nullopt;
            pos += 3;
            if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
                ++pos;
                std::size_t start = pos;
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
                if (pos == start) return std::nullopt;
            }
        }
    }
    long long offset = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' || s[pos] == 'z') {
            ++pos;
        } else if (s[pos] == '+' || s[pos] == '-') {
            int oh, om;
            int sign = s[pos] == '-' ? -1 : 1;
            if (!detail::digits(s, pos + 1, 2, oh)) return std::nullopt;
            std::size_t p2 = pos + 3;
            if (p2 < s.size() && s[p2] == ':') ++p2;
            if (!detail::digits(s, p2, 2, om)) return std::nullopt;
            pos = p2 + 2;
            if (oh > 23 || om > 59) return std::nullopt;
            offset = sign * (oh * 3600LL + om * 60LL);
        } else {
            return std::nullopt;
        }
    }
    if (pos != s.size()) return std::nullopt;
    if (mo < 1 || mo > 12 || d < 1 || h > 23 || mi > 59 || sec > 60) return std::nullopt;
    static constexpr int mdays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    int maxd = mdays[mo - 1] + (mo == 2 && leap ? 1 : 0);
    if (d > maxd) return std::nullopt;
    long long days = detail::days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
    long long secs = days * 86400LL + h * 3600LL + mi * 60LL + sec - offset;
    return UtcTime{std::chrono::seconds{secs}};
}

inline std::string format_iso8601(UtcTime t) {
    long long secs = t.time_since_epoch().count();
    long long days = secs >= 0 ? secs / 86400 : -((-secs + 86399) / 86400);
    long long rem = secs - days * 86400;
    // civil_from_days
    long long z = days + 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long long y = static_cast<long long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
    const int hh = static_cast<int>(rem / 3600), mm = static_cast<int>((rem % 3600) / 60), ss = static_cast<int>(rem % 60);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02d:%02d:%02dZ", y, m, d, hh, mm, ss);
    return buf;
}

inline std::string now_iso8601() {
    return format_iso8601(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
}

}  // namespace lexrefine
