#pragma once

#include <algorithm>
#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include "enspost/calendar.hpp"
#include "enspost/errors.hpp"
#include "enspost/hydro_core.hpp"
#include "enspost/lstm.hpp"

namespace enspost {

inline constexpr int kDaysPerYear = 365;

/// Pooled day-of-year climatology. Slot d holds every training observation
/// whose day of year lies within +-window_days of d (circularly), so the
/// same sample serves as a probability forecast and as a mean.
struct DayOfYearClimatology {
    int window_days = 15;
    std::array<std::vector<double>, kDaysPerYear> samples;
    std::array<double, kDaysPerYear> means{};

    const std::vector<double>& sample(Date d) const {
        return samples[static_cast<std::size_t>(day_of_year(d) - 1)];
    }
    double mean(Date d) const { return means[static_cast<std::size_t>(day_of_year(d) - 1)]; }
};

inline int circular_doy_distance(int a, int b) {
    const int d = std::abs(a - b);
    return std::min(d, kDaysPerYear - d);
}

inline DayOfYearClimatology build_climatology(const DailySeries& training_obs, int window_days = 15) {
    if (window_days < 0) throw InputError("climatology window must be >= 0");
    if (training_obs.size() < static_cast<std::size_t>(kDaysPerYear)) {
        throw InputError("climatology needs at least one full year of observations, got " +
                         std::to_string(training_obs.size()) + " days");
    }
    DayOfYearClimatology clim;
    clim.window_days = window_days;
    const int reach = std::min(window_days, kDaysPerYear / 2);
    for (std::size_t k = 0; k < training_obs.size(); ++k) {
        const double v = training_obs.values()[k];
        if (is_missing(v)) continue;
        const int doy = day_of_year(add_days(training_obs.start(), static_cast<long>(k)));
        for (int off = -reach; off <= reach; ++off) {
            const int slot = ((doy - 1 + off) % kDaysPerYear + kDaysPerYear) % kDaysPerYear;
            clim.samples[static_cast<std::size_t>(slot)].push_back(v);
        }
    }
    for (std::size_t s = 0; s < clim.samples.size(); ++s) {
        const auto& sample = clim.samples[s];
        if (sample.empty()) {
            throw InputError("climatology: no observations near day of year " + std::to_string(s + 1));
        }
        double sum = 0.0;
        for (const double v : sample) sum += v;
        clim.means[s] = sum / static_cast<double>(sample.size());
    }
    return clim;
}

/// Fraction of the valid date's pooled sample strictly above z.
inline double climatology_prob_forecast(const DayOfYearClimatology& clim, Date valid_date, double z) {
    const auto& sample = clim.sample(valid_date);
    const auto above = std::count_if(sample.begin(), sample.end(), [z](double v) { return v > z; });
    return static_cast<double>(above) / static_cast<double>(sample.size());
}

/// Observed flow at the issue date, for every lead.
inline double simple_persistence(const DailySeries& obs, Date issue_date, int lead) {
    ForecastArchive::check_coordinates(lead, 0);
    if (!obs.has(issue_date)) {
        throw InputError("persistence: no observation on issue date " + to_iso(issue_date));
    }
    return obs.at(issue_date);
}

/// Climatological mean at the valid date plus the issue-date anomaly,
/// floored at zero.
inline double anomaly_persistence(const DailySeries& obs, const DayOfYearClimatology& clim,
                                  Date issue_date, int lead) {
    const double y = simple_persistence(obs, issue_date, lead);
    const Date valid = add_days(issue_date, lead);
    return std::max(0.0, y + (clim.mean(valid) - clim.mean(issue_date)));
}

// ---------------------------------------------------------------------------
// Standalone LSTM: rainfall-runoff network driven by forcing only.

inline constexpr std::size_t kForcingFeatures = 2;

/// Windows of observed (precip, temperature) ending at each date t of
/// `train_range`, with observed flow at t as target. Dates lacking a full
/// window or an observation are skipped.
inline nn::TrainingSet standalone_training_set(const Forcing& forcing, const DailySeries& obs,
                                               DateRange train_range, std::size_t lookback) {
    nn::TrainingSet set(lookback, kForcingFeatures);
    std::vector<double> window(lookback * kForcingFeatures);
    for (Date t = train_range.first; t <= train_range.last; t = add_days(t, 1)) {
        if (!obs.has(t)) continue;
        bool ok = true;
        for (std::size_t s = 0; s < lookback && ok; ++s) {
            const Date d = add_days(t, static_cast<long>(s) - static_cast<long>(lookback) + 1);
            if (!forcing.has(d)) {
                ok = false;
                break;
            }
            window[s * 2] = forcing.precip.at(d);
            window[s * 2 + 1] = forcing.temperature.at(d);
        }
        if (ok) set.add(window, obs.at(t));
    }
    return set;
}

struct ArchiveBuildStats {
    /// (issue, lead, member) cells left missing for lack of input history.
    std::size_t skipped = 0;
    /// Cells whose raw prediction was negative and was set to zero.
    std::size_t floored = 0;
};

struct StandaloneForecast {
    ForecastArchive archive;
    ArchiveBuildStats stats;
};

/// Runs a forcing-driven model on ensemble forcing forecasts. For each
/// (issue, lead, member) the window ends at issue + lead: days up to the
/// issue date use observed forcing, later days use that member's forecast.
inline StandaloneForecast standalone_lstm_forecast(const nn::LstmModel& model,
                                                   const Forcing& observed,
                                                   const ForcingForecast& forecast) {
    if (model.params.input_size != kForcingFeatures) {
        throw ContractViolation("standalone model must take (precip, temperature) inputs");
    }
    const std::size_t L = model.lookback;
    StandaloneForecast out;
    nn::SequenceCache cache;
    std::vector<double> window(L * kForcingFeatures);
    for (const Date issue : forecast.precip.issue_dates()) {
        for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
            const Date valid = add_days(issue, lead);
            for (int m = 0; m < kNumMembers; ++m) {
                bool ok = true;
                for (std::size_t s = 0; s < L && ok; ++s) {
                    const Date d = add_days(valid, static_cast<long>(s) - static_cast<long>(L) + 1);
                    const long ahead = days_between(issue, d);
                    double p = kMissing, t = kMissing;
                    if (ahead <= 0) {
                        p = observed.precip.value_or_missing(d);
                        t = observed.temperature.value_or_missing(d);
                    } else {
                        p = forecast.precip.value_or_missing(issue, static_cast<int>(ahead), m);
                        t = forecast.temperature.value_or_missing(issue, static_cast<int>(ahead), m);
                    }
                    if (is_missing(p) || is_missing(t)) ok = false;
                    window[s * 2] = p;
                    window[s * 2 + 1] = t;
                }
                if (!ok) {
                    ++out.stats.skipped;
                    continue;
                }
                double y = model.predict(window, cache);
                if (y < 0.0) {
                    y = 0.0;
                    ++out.stats.floored;
                }
                out.archive.set(issue, lead, m, y);
            }
        }
    }
    return out;
}

}  // namespace enspost
