#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "enspost/calendar.hpp"
#include "enspost/errors.hpp"

namespace enspost {

inline constexpr int kMinLead = 1;
inline constexpr int kMaxLead = 7;
inline constexpr int kNumLeads = 7;
inline constexpr int kNumMembers = 11;

/// Marker stored in place of a missing value. Missing cells are skipped by
/// consumers and never imputed.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Flows must be non-negative; forcing features such as temperature may not be.
enum class ValueDomain { NonNegative, Real };

namespace detail {

template <class Where>
void check_value(double v, ValueDomain domain, Where&& where) {
    if (is_missing(v)) return;
    if (!std::isfinite(v)) throw InputError("non-finite value at " + where());
    if (domain == ValueDomain::NonNegative && v < 0.0) {
        throw InputError("negative value " + std::to_string(v) + " at " + where());
    }
}

}  // namespace detail

/// Contiguous daily series starting at `start`. Entries may be explicitly
/// missing (kMissing); everything else is finite and, for the default
/// domain, non-negative.
class DailySeries {
public:
    DailySeries() = default;

    DailySeries(Date start, std::vector<double> values,
                ValueDomain domain = ValueDomain::NonNegative)
        : start_(start), values_(std::move(values)) {
        for (std::size_t k = 0; k < values_.size(); ++k) {
            detail::check_value(values_[k], domain,
                                [&] { return to_iso(add_days(start_, static_cast<long>(k))); });
        }
    }

    Date start() const { return start_; }
    /// Last covered date; only meaningful when non-empty.
    Date last() const { return add_days(start_, static_cast<long>(values_.size()) - 1); }
    DateRange range() const { return {start(), last()}; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    const std::vector<double>& values() const { return values_; }

    bool covers(Date d) const {
        const long k = days_between(start_, d);
        return k >= 0 && k < static_cast<long>(values_.size());
    }

    /// True when `d` is covered and not missing.
    bool has(Date d) const { return covers(d) && !is_missing(values_[index_of(d)]); }

    /// Value at `d`, or kMissing when outside the series.
    double value_or_missing(Date d) const { return covers(d) ? values_[index_of(d)] : kMissing; }

    double at(Date d) const {
        if (!has(d)) throw InputError("no value on " + to_iso(d));
        return values_[index_of(d)];
    }

    std::optional<double> get(Date d) const {
        if (!has(d)) return std::nullopt;
        return values_[index_of(d)];
    }

    std::size_t missing_count() const {
        return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), is_missing));
    }

    /// Non-missing values whose dates fall in `range`.
    std::vector<double> present_values(std::optional<DateRange> range = std::nullopt) const {
        std::vector<double> out;
        out.reserve(values_.size());
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (is_missing(values_[k])) continue;
            if (range && !range->contains(add_days(start_, static_cast<long>(k)))) continue;
            out.push_back(values_[k]);
        }
        return out;
    }

    /// Copy restricted to the intersection with `range`.
    DailySeries slice(DateRange range) const {
        const Date lo = std::max(range.first, start_);
        const Date hi = std::min(range.last, last());
        if (empty() || lo > hi) return DailySeries{lo, {}};
        const auto b = values_.begin() + days_between(start_, lo);
        const auto e = values_.begin() + days_between(start_, hi) + 1;
        DailySeries out;
        out.start_ = lo;
        out.values_.assign(b, e);
        return out;
    }

    bool operator==(const DailySeries& o) const {
        if (start_ != o.start_ || values_.size() != o.values_.size()) return false;
        for (std::size_t k = 0; k < values_.size(); ++k) {
            const double a = values_[k], b = o.values_[k];
            if (is_missing(a) != is_missing(b)) return false;
            if (!is_missing(a) && a != b) return false;
        }
        return true;
    }

private:
    std::size_t index_of(Date d) const { return static_cast<std::size_t>(days_between(start_, d)); }

    Date start_{};
    std::vector<double> values_;
};

using Ensemble = std::array<double, kNumMembers>;

/// (issue date x lead 1..7 x member 0..10) -> value. Member 0 is the
/// unperturbed control. Cells default to missing.
class ForecastArchive {
public:
    using Block = std::array<Ensemble, kNumLeads>;

    explicit ForecastArchive(ValueDomain domain = ValueDomain::NonNegative) : domain_(domain) {}

    static void check_coordinates(int lead, int member) {
        if (lead < kMinLead || lead > kMaxLead) {
            throw InputError("lead " + std::to_string(lead) + " outside 1..7");
        }
        if (member < 0 || member >= kNumMembers) {
            throw InputError("member " + std::to_string(member) + " outside 0..10");
        }
    }

    void set(Date issue, int lead, int member, double value) {
        check_coordinates(lead, member);
        detail::check_value(value, domain_, [&] {
            return "issue " + to_iso(issue) + " lead " + std::to_string(lead) + " member " +
                   std::to_string(member);
        });
        block_for(issue)[static_cast<std::size_t>(lead - 1)][static_cast<std::size_t>(member)] =
            value;
    }

    /// Adds an issue date with every cell missing (no-op if present).
    Block& block_for(Date issue) {
        auto [it, inserted] = blocks_.try_emplace(issue);
        if (inserted) {
            for (auto& ens : it->second) ens.fill(kMissing);
        }
        return it->second;
    }

    double value_or_missing(Date issue, int lead, int member) const {
        const auto it = blocks_.find(issue);
        if (it == blocks_.end()) return kMissing;
        return it->second[static_cast<std::size_t>(lead - 1)][static_cast<std::size_t>(member)];
    }

    std::optional<double> get(Date issue, int lead, int member) const {
        check_coordinates(lead, member);
        const double v = value_or_missing(issue, lead, member);
        if (is_missing(v)) return std::nullopt;
        return v;
    }

    /// The full ensemble, or nullopt when any member is missing.
    std::optional<Ensemble> ensemble(Date issue, int lead) const {
        const auto it = blocks_.find(issue);
        if (it == blocks_.end()) return std::nullopt;
        const Ensemble& e = it->second[static_cast<std::size_t>(lead - 1)];
        if (std::any_of(e.begin(), e.end(), is_missing)) return std::nullopt;
        return e;
    }

    bool has_issue(Date issue) const { return blocks_.count(issue) != 0; }

    std::vector<Date> issue_dates() const {
        std::vector<Date> out;
        out.reserve(blocks_.size());
        for (const auto& [d, b] : blocks_) out.push_back(d);
        return out;
    }

    std::size_t issue_count() const { return blocks_.size(); }
    const std::map<Date, Block>& blocks() const { return blocks_; }
    ValueDomain domain() const { return domain_; }

    std::size_t present_cells() const {
        std::size_t n = 0;
        for (const auto& [d, b] : blocks_) {
            for (const auto& e : b) n += static_cast<std::size_t>(std::count_if(
                                        e.begin(), e.end(), [](double v) { return !is_missing(v); }));
        }
        return n;
    }

    bool operator==(const ForecastArchive& o) const {
        if (blocks_.size() != o.blocks_.size()) return false;
        auto it = o.blocks_.begin();
        for (const auto& [d, b] : blocks_) {
            if (d != it->first) return false;
            for (std::size_t l = 0; l < b.size(); ++l) {
                for (std::size_t m = 0; m < kNumMembers; ++m) {
                    const double x = b[l][m], y = it->second[l][m];
                    if (is_missing(x) != is_missing(y)) return false;
                    if (!is_missing(x) && x != y) return false;
                }
            }
            ++it;
        }
        return true;
    }

private:
    ValueDomain domain_;
    std::map<Date, Block> blocks_;
};

/// Observed meteorological forcing: precipitation (mm/day, non-negative)
/// and a temperature proxy, on a common daily calendar.
struct Forcing {
    DailySeries precip;
    DailySeries temperature;

    bool has(Date d) const { return precip.has(d) && temperature.has(d); }
};

/// Ensemble forcing forecasts indexed like a ForecastArchive: the value at
/// (issue, lead, member) is the forecast for day issue + lead.
struct ForcingForecast {
    ForecastArchive precip{ValueDomain::NonNegative};
    ForecastArchive temperature{ValueDomain::Real};
};

enum class Season { Cool, Warm };

inline const char* to_string(Season s) { return s == Season::Cool ? "cool" : "warm"; }

/// Oct..Mar is cool, Apr..Sep warm. Callers pass the forecast valid date.
inline Season classify_season(Date valid_date) {
    const unsigned m = month_of(valid_date);
    return (m >= 4 && m <= 9) ? Season::Warm : Season::Cool;
}

enum class FlowCategory { LowModerate, High };

inline const char* to_string(FlowCategory c) {
    return c == FlowCategory::LowModerate ? "low_moderate" : "high";
}

/// Non-exceedance probability that defines each category's threshold.
inline double non_exceedance_level(FlowCategory c) {
    return c == FlowCategory::LowModerate ? 0.50 : 0.90;
}

/// Empirical quantile at non-exceedance probability `p`: linear
/// interpolation between order statistics placed at (k-1)/(n-1).
inline double empirical_quantile(std::vector<double> sample, double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InputError("non-exceedance probability must lie in (0,1), got " + std::to_string(p));
    }
    if (sample.size() < 2) {
        throw InputError("quantile needs at least 2 values, got " + std::to_string(sample.size()));
    }
    std::sort(sample.begin(), sample.end());
    const double h = p * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sample[lo] + frac * (sample[hi] - sample[lo]);
}

/// Flow threshold at non-exceedance probability `p` over the non-missing
/// values of a climatology sample.
inline double flow_threshold(const DailySeries& climatology_obs, double p) {
    return empirical_quantile(climatology_obs.present_values(), p);
}

struct DailyAggregation {
    DailySeries series;
    /// Days dropped because they had fewer than four 6-hourly values.
    std::vector<Date> excluded_days;
};

/// Averages 6-hourly values into daily means. Only days with exactly four
/// values contribute; incomplete days inside the span become missing, at the
/// edges they are trimmed, and both are listed in `excluded_days`.
inline DailyAggregation aggregate_to_daily(const std::vector<std::pair<DateTime, double>>& subdaily,
                                           ValueDomain domain = ValueDomain::NonNegative) {
    using namespace std::chrono;
    DailyAggregation out;
    if (subdaily.empty()) return out;

    for (std::size_t k = 0; k < subdaily.size(); ++k) {
        if (!std::isfinite(subdaily[k].second)) {
            throw FormatError("non-finite sub-daily value at " + to_iso(subdaily[k].first));
        }
        if (k > 0 && subdaily[k].first - subdaily[k - 1].first != hours{6}) {
            throw FormatError("sub-daily timestamps not at 6-hour spacing near " +
                              to_iso(subdaily[k].first));
        }
    }

    std::map<Date, std::pair<int, double>> days;
    for (const auto& [t, v] : subdaily) {
        auto& acc = days[floor<std::chrono::days>(t)];
        acc.first += 1;
        acc.second += v;
    }

    std::vector<std::pair<Date, double>> complete;
    for (const auto& [d, acc] : days) {
        if (acc.first == 4) {
            complete.emplace_back(d, acc.second / 4.0);
        } else {
            out.excluded_days.push_back(d);
        }
    }
    if (complete.empty()) return out;

    const Date first = complete.front().first;
    const Date last = complete.back().first;
    std::vector<double> values(static_cast<std::size_t>(days_between(first, last) + 1), kMissing);
    for (const auto& [d, v] : complete) values[static_cast<std::size_t>(days_between(first, d))] = v;
    out.series = DailySeries(first, std::move(values), domain);
    return out;
}

struct ForecastPair {
    Date valid_date;
    Ensemble ensemble;
    double observation;
};

/// Forecast-observation triples for a single lead, ordered by valid date.
struct PairSet {
    int lead = kMinLead;
    std::vector<ForecastPair> pairs;
    /// Issue dates dropped for a missing member or observation.
    std::size_t skipped = 0;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

inline double ensemble_mean(const Ensemble& e) {
    double s = 0.0;
    for (const double v : e) s += v;
    return s / static_cast<double>(e.size());
}

inline PairSet align_pairs(const ForecastArchive& archive, const DailySeries& obs, int lead,
                           std::optional<DateRange> valid_range = std::nullopt) {
    ForecastArchive::check_coordinates(lead, 0);
    PairSet out;
    out.lead = lead;
    for (const auto& [issue, block] : archive.blocks()) {
        const Date valid = add_days(issue, lead);
        if (valid_range && !valid_range->contains(valid)) continue;
        const auto ens = archive.ensemble(issue, lead);
        const auto y = obs.get(valid);
        if (!ens || !y) {
            ++out.skipped;
            continue;
        }
        out.pairs.push_back({valid, *ens, *y});
    }
    return out;
}

}  // namespace enspost
