#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "rastercast/error.hpp"

namespace rastercast {

// Seconds since the Unix epoch, UTC. Sub-second precision is irrelevant at
// daily resolution and is parsed but discarded.
struct UtcTime {
    std::int64_t seconds = 0;
    friend bool operator==(const UtcTime&, const UtcTime&) = default;
};

struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;
    friend bool operator==(const CivilDate&, const CivilDate&) = default;
};

namespace detail {

// Howard Hinnant's civil-from-days companion: days since 1970-01-01 for a
// proleptic Gregorian date.
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;  // [0, 365]
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// Inverse of days_from_civil, same source.
inline void civil_from_days(std::int64_t z, int& year, int& month, int& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);            // [0, 146096]
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;  // [0, 399]
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);            // [0, 365]
    const unsigned mp = (5 * doy + 2) / 153;                                 // [0, 11]
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    year = static_cast<int>(y + (month <= 2));
}

inline bool is_leap(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline int days_in_month(int y, int m) {
    static constexpr int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return lengths[m - 1];
}

inline bool parse_fixed_uint(std::string_view s, std::size_t pos, int digits, int& out) {
    if (pos + digits > s.size()) return false;
    int v = 0;
    for (int i = 0; i < digits; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace detail

inline bool valid_date(const CivilDate& d) {
    return d.month >= 1 && d.month <= 12 && d.day >= 1 &&
           d.day <= detail::days_in_month(d.year, d.month);
}

// Seconds at 00:00:00Z on the given date.
inline std::int64_t midnight_utc(const CivilDate& d) {
    return detail::days_from_civil(d.year, d.month, d.day) * 86400;
}

// "YYYY-MM-DD"
inline bool try_parse_date(std::string_view s, CivilDate& out) {
    CivilDate d;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    if (!detail::parse_fixed_uint(s, 0, 4, d.year) ||
        !detail::parse_fixed_uint(s, 5, 2, d.month) ||
        !detail::parse_fixed_uint(s, 8, 2, d.day))
        return false;
    if (!valid_date(d)) return false;
    out = d;
    return true;
}

inline CivilDate parse_date(std::string_view s) {
    CivilDate d;
    if (!try_parse_date(s, d))
        throw ParseError("invalid date (want YYYY-MM-DD): '" + std::string(s) + "'");
    return d;
}

// ISO-8601 instant with an explicit offset: YYYY-MM-DDTHH:MM:SS[.fff](Z|±HH:MM|±HHMM).
inline bool try_parse_instant(std::string_view s, UtcTime& out) {
    CivilDate date;
    if (s.size() < 20) return false;
    if (!try_parse_date(s.substr(0, 10), date)) return false;
    if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return false;
    int hh, mm, ss;
    if (s[13] != ':' || s[16] != ':') return false;
    if (!detail::parse_fixed_uint(s, 11, 2, hh) ||
        !detail::parse_fixed_uint(s, 14, 2, mm) ||
        !detail::parse_fixed_uint(s, 17, 2, ss))
        return false;
    if (hh > 23 || mm > 59 || ss > 59) return false;
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) return false;
    }
    if (pos >= s.size()) return false;  // offset is mandatory
    std::int64_t offset_sec = 0;
    char c = s[pos];
    if (c == 'Z' || c == 'z') {
        ++pos;
    } else if (c == '+' || c == '-') {
        int sign = c == '+' ? 1 : -1;
        ++pos;
        int oh, om = 0;
        if (!detail::parse_fixed_uint(s, pos, 2, oh)) return false;
        pos += 2;
        if (pos < s.size() && s[pos] == ':') ++pos;
        if (pos < s.size()) {
            if (!detail::parse_fixed_uint(s, pos, 2, om)) return false;
            pos += 2;
        }
        if (oh > 23 || om > 59) return false;
        offset_sec = sign * (oh * 3600 + om * 60);
    } else {
        return false;
    }
    if (pos != s.size()) return false;
    out.seconds = midnight_utc(date) + hh * 3600 + mm * 60 + ss - offset_sec;
    return true;
}

inline UtcTime parse_instant(std::string_view s) {
    UtcTime t;
    if (!try_parse_instant(s, t))
        throw ParseError("invalid ISO-8601 instant: '" + std::string(s) + "'");
    return t;
}

// Whole UTC days elapsed since midnight of the epoch date. Instants before
// the epoch are outside the modeled window.
inline int day_index(UtcTime ts, const CivilDate& epoch) {
    std::int64_t delta = ts.seconds - midnight_utc(epoch);
    if (delta < 0)
        throw std::out_of_range("instant precedes the epoch date");
    return static_cast<int>(delta / 86400);
}

// Non-throwing variant for filtering: may be negative.
inline std::int64_t day_offset(UtcTime ts, const CivilDate& epoch) {
    std::int64_t delta = ts.seconds - midnight_utc(epoch);
    // floor division for negative deltas
    return delta >= 0 ? delta / 86400 : -((-delta + 86399) / 86400);
}

}  // namespace rastercast
