#pragma once

// Plain CSV readers and writers for observations, forcing and forecast
// archives. Data files carry 17 significant digits so a write/read cycle
// reproduces every double exactly; reports use 9.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "enspost/calendar.hpp"
#include "enspost/errors.hpp"
#include "enspost/hydro_core.hpp"

namespace enspost {

inline constexpr int kDataDigits = 17;
inline constexpr int kReportDigits = 9;

/// %.<digits>g, with "nan" for missing values.
inline std::string format_number(double v, int digits) {
    if (is_missing(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}
inline std::string data_number(double v) { return format_number(v, kDataDigits); }
inline std::string report_number(double v) { return format_number(v, kReportDigits); }

namespace csv {

/// Reads one CSV stream line by line, checking the header and the column
/// count and tracking line numbers for error messages.
class Reader {
public:
    Reader(std::istream& in, std::string source, std::string_view expected_header)
        : in_(in), source_(std::move(source)) {
        std::string header;
        if (!next_line(header)) fail("empty file, expected header '" + std::string(expected_header) + "'");
        if (header != expected_header) {
            fail("bad header '" + header + "', expected '" + std::string(expected_header) + "'");
        }
        columns_ = static_cast<std::size_t>(std::count(expected_header.begin(), expected_header.end(), ',')) + 1;
    }

    /// Next data row split into fields; false at end of input. Blank lines
    /// are skipped.
    bool next(std::vector<std::string_view>& fields) {
        while (next_line(line_)) {
            if (line_.empty()) continue;
            fields.clear();
            std::string_view rest(line_);
            for (;;) {
                const auto comma = rest.find(',');
                fields.push_back(trim(rest.substr(0, comma)));
                if (comma == std::string_view::npos) break;
                rest.remove_prefix(comma + 1);
            }
            if (fields.size() != columns_) {
                fail("expected " + std::to_string(columns_) + " fields, got " + std::to_string(fields.size()));
            }
            return true;
        }
        return false;
    }

    std::size_t line() const { return line_no_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(source_ + ":" + std::to_string(line_no_) + ": " + what);
    }

    double number(std::string_view s) const {
        double v = 0.0;
        if (s == "nan" || s == "NaN" || s == "NA" || s.empty()) return kMissing;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) fail("malformed number '" + std::string(s) + "'");
        return v;
    }

    long integer(std::string_view s) const {
        long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) fail("malformed integer '" + std::string(s) + "'");
        return v;
    }

    Date date(std::string_view s) const {
        try {
            return parse_iso_date(s);
        } catch (const FormatError& e) {
            fail(e.what());
        }
    }

    DateTime datetime(std::string_view s) const {
        try {
            return parse_iso_datetime(s);
        } catch (const FormatError& e) {
            fail(e.what());
        }
    }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        return s;
    }

    bool next_line(std::string& out) {
        if (!std::getline(in_, out)) return false;
        ++line_no_;
        if (!out.empty() && out.back() == '\r') out.pop_back();
        return true;
    }

    std::istream& in_;
    std::string source_;
    std::string line_;
    std::size_t line_no_ = 0;
    std::size_t columns_ = 0;
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return in;
}

}  // namespace csv

inline constexpr std::string_view kObservationHeader = "date,flow_cms";
inline constexpr std::string_view kDailyForecastHeader = "issue_date,lead_days,member,flow_cms";
inline constexpr std::string_view kSubdailyForecastHeader = "issue_datetime,valid_datetime,member,flow_cms";
inline constexpr std::string_view kForcingHeader = "date,precip_mm,temperature_c";
inline constexpr std::string_view kForcingForecastHeader = "issue_date,lead_days,member,precip_mm,temperature_c";

struct ObservationIngest {
    DailySeries series;
    /// Dates inside the span with no row, or with an empty/nan value.
    std::vector<Date> gaps;
};

/// Rows must be in strictly increasing date order. Missing dates become
/// missing values and are reported.
inline ObservationIngest read_observations(std::istream& in, const std::string& source = "observations") {
    csv::Reader reader(in, source, kObservationHeader);
    std::vector<std::string_view> f;
    std::vector<std::pair<Date, double>> rows;
    while (reader.next(f)) {
        const Date d = reader.date(f[0]);
        const double v = reader.number(f[1]);
        if (!is_missing(v) && !std::isfinite(v)) reader.fail("non-finite flow");
        if (v < 0.0) reader.fail("negative flow " + std::string(f[1]) + " on " + to_iso(d));
        if (!rows.empty() && d <= rows.back().first) {
            reader.fail("date " + to_iso(d) + " is not after the previous row " + to_iso(rows.back().first));
        }
        rows.emplace_back(d, v);
    }
    ObservationIngest out;
    if (rows.empty()) throw InputError(source + ": no data rows");
    const Date first = rows.front().first;
    std::vector<double> values(static_cast<std::size_t>(days_between(first, rows.back().first) + 1), kMissing);
    for (const auto& [d, v] : rows) values[static_cast<std::size_t>(days_between(first, d))] = v;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (is_missing(values[k])) out.gaps.push_back(add_days(first, static_cast<long>(k)));
    }
    out.series = DailySeries(first, std::move(values));
    return out;
}

inline ObservationIngest ingest_observations(const std::string& path) {
    auto in = csv::open_input(path);
    return read_observations(in, path);
}

namespace detail {

inline std::string cell_name(Date issue, int lead, int member) {
    return "(issue " + to_iso(issue) + ", lead " + std::to_string(lead) + ", member " + std::to_string(member) + ")";
}

inline void check_lead_member(const csv::Reader& reader, long lead, long member) {
    if (lead < kMinLead || lead > kMaxLead) {
        reader.fail("lead " + std::to_string(lead) + " outside 1..7");
    }
    if (member < 0 || member >= kNumMembers) {
        reader.fail("member " + std::to_string(member) + " outside 0..10");
    }
}

inline ForecastArchive read_daily_forecasts(std::istream& in, const std::string& source) {
    csv::Reader reader(in, source, kDailyForecastHeader);
    std::vector<std::string_view> f;
    ForecastArchive archive;
    while (reader.next(f)) {
        const Date issue = reader.date(f[0]);
        const long lead = reader.integer(f[1]);
        const long member = reader.integer(f[2]);
        check_lead_member(reader, lead, member);
        const int l = static_cast<int>(lead), m = static_cast<int>(member);
        const double v = reader.number(f[3]);
        if (is_missing(v)) reader.fail("missing flow for " + cell_name(issue, l, m));
        if (!is_missing(archive.value_or_missing(issue, l, m))) {
            reader.fail("duplicate cell " + cell_name(issue, l, m));
        }
        try {
            archive.set(issue, l, m, v);
        } catch (const InputError& e) {
            reader.fail(e.what());
        }
    }
    return archive;
}

inline ForecastArchive read_subdaily_forecasts(std::istream& in, const std::string& source) {
    csv::Reader reader(in, source, kSubdailyForecastHeader);
    std::vector<std::string_view> f;
    using Key = std::pair<Date, int>;
    std::map<Key, std::map<DateTime, double>> groups;
    std::map<Key, DateTime> issue_times;
    while (reader.next(f)) {
        const DateTime issue_time = reader.datetime(f[0]);
        const DateTime valid_time = reader.datetime(f[1]);
        const long member = reader.integer(f[2]);
        if (member < 0 || member >= kNumMembers) {
            reader.fail("member " + std::to_string(member) + " outside 0..10");
        }
        const double v = reader.number(f[3]);
        if (is_missing(v) || v < 0.0) reader.fail("flow must be a non-negative number");
        const Date issue = std::chrono::floor<std::chrono::days>(issue_time);
        const Key key{issue, static_cast<int>(member)};
        const auto [it, inserted] = issue_times.emplace(key, issue_time);
        if (!inserted && it->second != issue_time) {
            reader.fail("issue " + to_iso(issue) + " member " + std::to_string(member) +
                        " has more than one issue time");
        }
        if (!groups[key].emplace(valid_time, v).second) {
            reader.fail("duplicate value for issue " + to_iso(issue_time) + ", valid " + to_iso(valid_time) +
                        ", member " + std::to_string(member));
        }
    }
    ForecastArchive archive;
    for (const auto& [key, values] : groups) {
        const auto& [issue, member] = key;
        std::vector<std::pair<DateTime, double>> series(values.begin(), values.end());
        DailyAggregation agg;
        try {
            agg = aggregate_to_daily(series);
        } catch (const FormatError& e) {
            throw FormatError(source + ": issue " + to_iso(issue) + " member " + std::to_string(member) + ": " +
                              e.what());
        }
        if (agg.series.size() == 0) continue;
        for (Date d = agg.series.start(); d <= agg.series.last(); d = add_days(d, 1)) {
            const auto v = agg.series.get(d);
            if (!v) continue;
            const long lead = days_between(issue, d);
            if (lead < kMinLead || lead > kMaxLead) {
                throw FormatError(source + ": issue " + to_iso(issue) + " member " + std::to_string(member) +
                                  ": valid day " + to_iso(d) + " gives lead " + std::to_string(lead) +
                                  " outside 1..7");
            }
            archive.set(issue, static_cast<int>(lead), member, *v);
        }
    }
    return archive;
}

}  // namespace detail

/// Daily rows are stored as given; sub-daily rows are grouped per (issue
/// date, member), averaged to daily means and assigned lead = valid day -
/// issue day.
inline ForecastArchive read_forecasts(std::istream& in, bool subdaily, const std::string& source = "forecasts") {
    return subdaily ? detail::read_subdaily_forecasts(in, source) : detail::read_daily_forecasts(in, source);
}

inline ForecastArchive ingest_forecasts(const std::string& path, bool subdaily = false) {
    auto in = csv::open_input(path);
    return read_forecasts(in, subdaily, path);
}

inline Forcing read_forcing(std::istream& in, const std::string& source = "forcing") {
    csv::Reader reader(in, source, kForcingHeader);
    std::vector<std::string_view> f;
    std::vector<Date> dates;
    std::vector<double> p, t;
    while (reader.next(f)) {
        const Date d = reader.date(f[0]);
        if (!dates.empty() && d != add_days(dates.back(), 1)) reader.fail("forcing dates must be consecutive");
        dates.push_back(d);
        p.push_back(reader.number(f[1]));
        t.push_back(reader.number(f[2]));
        if (p.back() < 0.0) reader.fail("negative precipitation");
    }
    if (dates.empty()) throw InputError(source + ": no data rows");
    return {DailySeries(dates.front(), std::move(p)), DailySeries(dates.front(), std::move(t), ValueDomain::Real)};
}

inline ForcingForecast read_forcing_forecast(std::istream& in, const std::string& source = "forcing_forecast") {
    csv::Reader reader(in, source, kForcingForecastHeader);
    std::vector<std::string_view> f;
    ForcingForecast out;
    while (reader.next(f)) {
        const Date issue = reader.date(f[0]);
        const long lead = reader.integer(f[1]);
        const long member = reader.integer(f[2]);
        detail::check_lead_member(reader, lead, member);
        const int l = static_cast<int>(lead), m = static_cast<int>(member);
        if (!is_missing(out.precip.value_or_missing(issue, l, m))) {
            reader.fail("duplicate cell " + detail::cell_name(issue, l, m));
        }
        try {
            out.precip.set(issue, l, m, reader.number(f[3]));
            out.temperature.set(issue, l, m, reader.number(f[4]));
        } catch (const InputError& e) {
            reader.fail(e.what());
        }
    }
    return out;
}

inline void write_observations(std::ostream& out, const DailySeries& series) {
    out << kObservationHeader << '\n';
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double v = series.values()[k];
        if (is_missing(v)) continue;
        out << to_iso(add_days(series.start(), static_cast<long>(k))) << ',' << data_number(v) << '\n';
    }
}

inline void write_forecasts(std::ostream& out, const ForecastArchive& archive) {
    out << kDailyForecastHeader << '\n';
    for (const auto& [issue, block] : archive.blocks()) {
        const std::string date = to_iso(issue);
        for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
            for (int m = 0; m < kNumMembers; ++m) {
                const double v = block[static_cast<std::size_t>(lead - 1)][static_cast<std::size_t>(m)];
                if (is_missing(v)) continue;
                out << date << ',' << lead << ',' << m << ',' << data_number(v) << '\n';
            }
        }
    }
}

inline void write_forcing(std::ostream& out, const Forcing& forcing) {
    out << kForcingHeader << '\n';
    for (std::size_t k = 0; k < forcing.precip.size(); ++k) {
        const Date d = add_days(forcing.precip.start(), static_cast<long>(k));
        out << to_iso(d) << ',' << data_number(forcing.precip.values()[k]) << ','
            << data_number(forcing.temperature.value_or_missing(d)) << '\n';
    }
}

inline void write_forcing_forecast(std::ostream& out, const ForcingForecast& fc) {
    out << kForcingForecastHeader << '\n';
    for (const auto& [issue, block] : fc.precip.blocks()) {
        const std::string date = to_iso(issue);
        for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
            for (int m = 0; m < kNumMembers; ++m) {
                const double p = block[static_cast<std::size_t>(lead - 1)][static_cast<std::size_t>(m)];
                if (is_missing(p)) continue;
                out << date << ',' << lead << ',' << m << ',' << data_number(p) << ','
                    << data_number(fc.temperature.value_or_missing(issue, lead, m)) << '\n';
            }
        }
    }
}

}  // namespace enspost
