#pragma once

// Desk-scale stand-in for a forecast chain: a linear-reservoir "truth"
// catchment driven by seasonal intermittent rainfall, and an ensemble of
// forecasts from a reservoir with a different recession constant, started
// from the true storage and forced with lognormally perturbed rainfall.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "enspost/calendar.hpp"
#include "enspost/errors.hpp"
#include "enspost/hydro_core.hpp"
#include "enspost/random.hpp"

namespace enspost {

struct CatchmentConfig {
    std::uint64_t seed = 42;
    Date start_date = make_date(2004, 1, 1);
    int years = 9;
    int train_years = 6;
    /// Recession constant of the truth reservoir (1/day).
    double k_true = 0.2;
    /// Recession constant of the forecast reservoir (1/day).
    double k_forecast = 0.3;
    double wet_probability = 0.4;
    /// Mean wet-day rainfall (mm/day) and its seasonal modulation.
    double precip_mean = 6.0;
    double precip_amplitude = 0.5;
    double precip_phase_days = 0.0;
    /// Log-space forcing error grows as sigma1 * sqrt(lead).
    double sigma1 = 0.5;
    /// Share of the log forcing-error variance that is member-specific; the
    /// rest is one draw shared by members 1..10 for that issue and lead.
    /// 1 gives independent members, 0 identical perturbed members.
    double member_spread = 0.2;
    double temperature_mean = 10.0;
    double temperature_amplitude = 12.0;
    double temperature_noise = 2.0;
    /// Storage at the start; negative selects the long-run mean storage.
    double initial_storage = -1.0;

    void validate() const {
        auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
        if (!in_open_unit(k_true) || !in_open_unit(k_forecast)) {
            throw InputError("recession constants must lie in (0,1)");
        }
        if (!in_open_unit(wet_probability)) throw InputError("wet-day probability must lie in (0,1)");
        if (!(sigma1 >= 0.0)) throw InputError("sigma1 must be >= 0");
        if (!(member_spread >= 0.0 && member_spread <= 1.0)) throw InputError("member_spread must lie in [0,1]");
        if (!(precip_mean > 0.0) || !(precip_amplitude >= 0.0 && precip_amplitude < 1.0)) {
            throw InputError("precip_mean must be > 0 and precip_amplitude in [0,1)");
        }
        if (years < 2 || train_years < 1 || train_years >= years) {
            throw InputError("need years >= 2 and 1 <= train_years < years");
        }
    }

    double mean_storage() const {
        const double mean_precip = wet_probability * precip_mean;
        return mean_precip * (1.0 - k_true) / k_true;
    }

    Date end_date() const {
        const std::chrono::year_month_day ymd{start_date};
        return Date{std::chrono::year_month_day{ymd.year() + std::chrono::years{years}, ymd.month(), ymd.day()}} -
               std::chrono::days{1};
    }

    DateRange train_range() const {
        const std::chrono::year_month_day ymd{start_date};
        const Date split{std::chrono::year_month_day{ymd.year() + std::chrono::years{train_years}, ymd.month(),
                                                     ymd.day()}};
        return {start_date, split - std::chrono::days{1}};
    }

    DateRange verify_range() const { return {add_days(train_range().last, 1), end_date()}; }
};

struct SyntheticDataset {
    CatchmentConfig config;
    Forcing forcing;
    /// Truth outflow, the "observations".
    DailySeries flow;
    /// Truth storage at the end of each day.
    DailySeries storage;
    double initial_storage = 0.0;
    ForecastArchive raw;
    ForcingForecast forcing_forecast;
};

/// Standard deviation of the log forcing ratio of one member at `lead`.
inline double forcing_sigma(const CatchmentConfig& c, int lead, int member) {
    if (member == 0) return 0.0;
    return c.sigma1 * std::sqrt(static_cast<double>(lead));
}

namespace detail {
inline constexpr std::uint64_t kPrecipStream = 1;
inline constexpr std::uint64_t kTemperatureStream = 2;
inline constexpr std::uint64_t kForcingErrorStream = 3;
inline constexpr std::uint64_t kSharedErrorStream = 4;

inline double standard_normal(std::uint64_t seed) {
    SplitMix64 rng(seed);
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}
}  // namespace detail

inline SyntheticDataset generate(const CatchmentConfig& config) {
    config.validate();
    SyntheticDataset ds;
    ds.config = config;
    const Date first = config.start_date;
    const Date last = config.end_date();
    const auto n = static_cast<std::size_t>(days_between(first, last) + 1);

    std::vector<double> precip(n), temperature(n), flow(n), storage(n);
    SplitMix64 precip_rng(derive_seed(config.seed, {detail::kPrecipStream}));
    SplitMix64 temp_rng(derive_seed(config.seed, {detail::kTemperatureStream}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> temp_noise(0.0, 1.0);
    constexpr double kYear = 365.25;
    for (std::size_t t = 0; t < n; ++t) {
        const double doy = static_cast<double>(day_of_year(add_days(first, static_cast<long>(t))));
        const double mean =
            config.precip_mean *
            (1.0 + config.precip_amplitude * std::sin(2.0 * std::numbers::pi * (doy - config.precip_phase_days) / kYear));
        const bool wet = unit(precip_rng) < config.wet_probability;
        const double amount = std::exponential_distribution<double>(1.0 / mean)(precip_rng);
        precip[t] = wet ? amount : 0.0;
        temperature[t] = config.temperature_mean +
                         config.temperature_amplitude * std::sin(2.0 * std::numbers::pi * (doy - 105.0) / kYear) +
                         config.temperature_noise * temp_noise(temp_rng);
    }

    const double s0 = config.initial_storage >= 0.0 ? config.initial_storage : config.mean_storage();
    ds.initial_storage = s0;
    double s = s0;
    for (std::size_t t = 0; t < n; ++t) {
        const double inflow = s + precip[t];
        flow[t] = config.k_true * inflow;
        s = (1.0 - config.k_true) * inflow;
        storage[t] = s;
    }

    for (std::size_t i = 0; i + kMaxLead < n; ++i) {
        const Date issue = add_days(first, static_cast<long>(i));
        const auto issue_key = static_cast<std::uint64_t>(days_between(Date{}, issue));
        std::array<double, kMaxLead> shared{};
        for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
            shared[static_cast<std::size_t>(lead - 1)] = detail::standard_normal(derive_seed(
                config.seed, {detail::kSharedErrorStream, issue_key, static_cast<std::uint64_t>(lead)}));
        }
        const double w_shared = std::sqrt(1.0 - config.member_spread);
        const double w_member = std::sqrt(config.member_spread);
        for (int m = 0; m < kNumMembers; ++m) {
            double st = storage[i];
            for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
                const double sigma = forcing_sigma(config, lead, m);
                double eta = 0.0;
                if (sigma > 0.0) {
                    const double z_member = detail::standard_normal(
                        derive_seed(config.seed, {detail::kForcingErrorStream, issue_key,
                                                  static_cast<std::uint64_t>(lead), static_cast<std::uint64_t>(m)}));
                    const double z = w_shared * shared[static_cast<std::size_t>(lead - 1)] + w_member * z_member;
                    eta = -0.5 * sigma * sigma + sigma * z;
                }
                const std::size_t day = i + static_cast<std::size_t>(lead);
                const double p_hat = precip[day] * std::exp(eta);
                const double inflow = st + p_hat;
                ds.raw.set(issue, lead, m, config.k_forecast * inflow);
                st = (1.0 - config.k_forecast) * inflow;
                ds.forcing_forecast.precip.set(issue, lead, m, p_hat);
                ds.forcing_forecast.temperature.set(issue, lead, m, temperature[day]);
            }
        }
    }

    ds.forcing.precip = DailySeries(first, std::move(precip));
    ds.forcing.temperature = DailySeries(first, std::move(temperature), ValueDomain::Real);
    ds.flow = DailySeries(first, std::move(flow));
    ds.storage = DailySeries(first, std::move(storage));
    return ds;
}

struct MassBalance {
    double initial_storage = 0.0;
    double final_storage = 0.0;
    double total_precip = 0.0;
    double total_outflow = 0.0;

    /// |out + final - initial - precip| relative to the inflow budget.
    double relative_error() const {
        const double budget = initial_storage + total_precip;
        return std::abs(total_outflow + final_storage - budget) / std::max(budget, 1e-300);
    }
};

inline MassBalance mass_balance(const SyntheticDataset& ds) {
    MassBalance mb;
    mb.initial_storage = ds.initial_storage;
    mb.final_storage = ds.storage.values().back();
    for (const double p : ds.forcing.precip.values()) mb.total_precip += p;
    for (const double q : ds.flow.values()) mb.total_outflow += q;
    return mb;
}

struct LeadSpread {
    int lead = 0;
    /// RMSE of the unperturbed member against truth.
    double control_rmse = 0.0;
    /// Mean over issues of the (population) standard deviation across members.
    double ensemble_std = 0.0;
    /// Mean of log(p_hat / p) over perturbed members on wet days.
    double log_ratio_mean = 0.0;
    /// log_ratio_mean minus its design value -sigma_L^2 / 2.
    double log_ratio_bias = 0.0;
    /// Standard deviation of the log ratios.
    double log_ratio_std = 0.0;
    std::size_t log_ratio_samples = 0;
    /// Issue dates behind those samples; members of one issue share the
    /// common part of their error.
    std::size_t log_ratio_groups = 0;
};

inline std::vector<LeadSpread> ensemble_spread_audit(const SyntheticDataset& ds) {
    std::vector<LeadSpread> out;
    for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
        LeadSpread ls;
        ls.lead = lead;
        double sse = 0.0, std_sum = 0.0, lr_sum = 0.0, lr_sq = 0.0;
        std::size_t pairs = 0, lr_n = 0;
        for (const auto& [issue, block] : ds.raw.blocks()) {
            const Date valid = add_days(issue, lead);
            const auto ens = ds.raw.ensemble(issue, lead);
            if (!ens || !ds.flow.has(valid)) continue;
            const double e = (*ens)[0] - ds.flow.at(valid);
            sse += e * e;
            // Centred on the control so identical members give exactly zero.
            double shift_mean = 0.0;
            for (const double v : *ens) shift_mean += v - (*ens)[0];
            shift_mean /= static_cast<double>(kNumMembers);
            double var = 0.0;
            for (const double v : *ens) var += (v - (*ens)[0] - shift_mean) * (v - (*ens)[0] - shift_mean);
            std_sum += std::sqrt(var / static_cast<double>(kNumMembers));
            ++pairs;
            const double p = ds.forcing.precip.value_or_missing(valid);
            if (!(p > 0.0)) continue;
            ++ls.log_ratio_groups;
            for (int m = 1; m < kNumMembers; ++m) {
                const double lr = std::log(ds.forcing_forecast.precip.value_or_missing(issue, lead, m) / p);
                lr_sum += lr;
                lr_sq += lr * lr;
                ++lr_n;
            }
        }
        if (pairs > 0) {
            ls.control_rmse = std::sqrt(sse / static_cast<double>(pairs));
            ls.ensemble_std = std_sum / static_cast<double>(pairs);
        }
        if (lr_n > 0) {
            const double sigma = forcing_sigma(ds.config, lead, 1);
            ls.log_ratio_samples = lr_n;
            ls.log_ratio_mean = lr_sum / static_cast<double>(lr_n);
            ls.log_ratio_bias = ls.log_ratio_mean + 0.5 * sigma * sigma;
            ls.log_ratio_std = std::sqrt(std::max(0.0, lr_sq / static_cast<double>(lr_n) - ls.log_ratio_mean * ls.log_ratio_mean));
        }
        out.push_back(ls);
    }
    return out;
}

}  // namespace enspost
