#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "enspost/errors.hpp"

namespace enspost {

using Date = std::chrono::sys_days;
using DateTime = std::chrono::sys_seconds;

inline Date make_date(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) {
        throw InputError("invalid calendar date " + std::to_string(year) + "-" +
                         std::to_string(month) + "-" + std::to_string(day));
    }
    return Date{ymd};
}

inline Date add_days(Date d, long n) { return d + std::chrono::days{n}; }

inline long days_between(Date from, Date to) { return (to - from).count(); }

inline unsigned month_of(Date d) {
    return static_cast<unsigned>(std::chrono::year_month_day{d}.month());
}

inline int year_of(Date d) { return static_cast<int>(std::chrono::year_month_day{d}.year()); }

/// Day of year in 1..365. Feb 29 shares Feb 28's slot and later days of a
/// leap year are shifted back by one, so every calendar day maps to the same
/// slot in leap and common years.
inline int day_of_year(Date d) {
    const std::chrono::year_month_day ymd{d};
    const Date jan1{ymd.year() / std::chrono::January / 1};
    int doy = static_cast<int>((d - jan1).count()) + 1;
    if (ymd.year().is_leap() && doy >= 60) {
        doy -= 1;
    }
    return doy;
}

inline std::string to_iso(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

inline std::string to_iso(DateTime t) {
    const Date d = std::chrono::floor<std::chrono::days>(t);
    const auto secs = (t - DateTime{d}).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lld", to_iso(d).c_str(),
                  static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                  static_cast<long long>(secs % 60));
    return buf;
}

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t k = pos; k < pos + len; ++k) {
        const char c = s[k];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace detail

/// Parses `YYYY-MM-DD`.
inline Date parse_iso_date(std::string_view s) {
    int y = 0, m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !detail::parse_fixed_int(s, 0, 4, y) ||
        !detail::parse_fixed_int(s, 5, 2, m) || !detail::parse_fixed_int(s, 8, 2, d)) {
        throw FormatError("malformed date '" + std::string(s) + "', expected YYYY-MM-DD");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw FormatError("invalid calendar date '" + std::string(s) + "'");
    return Date{ymd};
}

/// Parses `YYYY-MM-DDTHH:MM[:SS][Z]` (a space may replace the `T`). Naive UTC.
inline DateTime parse_iso_datetime(std::string_view s) {
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() != 16 && s.size() != 19) {
        throw FormatError("malformed datetime '" + std::string(s) + "'");
    }
    const Date d = parse_iso_date(s.substr(0, 10));
    int hh = 0, mm = 0, ss = 0;
    const bool ok = (s[10] == 'T' || s[10] == ' ') && detail::parse_fixed_int(s, 11, 2, hh) &&
                    s[13] == ':' && detail::parse_fixed_int(s, 14, 2, mm) &&
                    (s.size() == 16 || (s[16] == ':' && detail::parse_fixed_int(s, 17, 2, ss)));
    if (!ok || hh > 23 || mm > 59 || ss > 59) {
        throw FormatError("malformed datetime '" + std::string(s) + "'");
    }
    return DateTime{d} + std::chrono::hours{hh} + std::chrono::minutes{mm} +
           std::chrono::seconds{ss};
}

/// Inclusive date span.
struct DateRange {
    Date first;
    Date last;

    bool contains(Date d) const { return first <= d && d <= last; }
    long length() const { return days_between(first, last) + 1; }
    bool overlaps(const DateRange& o) const { return first <= o.last && o.first <= last; }
};

}  // namespace enspost
