#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "enspost/baselines.hpp"

using namespace enspost;

namespace {

DailySeries series_from(Date start, std::size_t n, auto&& f) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = f(add_days(start, static_cast<long>(k)));
    return DailySeries(start, std::move(v));
}

}  // namespace

TEST(Climatology, ConstantObservations) {
    const auto obs = series_from(make_date(2004, 1, 1), 3 * 365 + 1, [](Date) { return 6.5; });
    const auto clim = build_climatology(obs);
    for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        EXPECT_EQ(clim.means[d], 6.5);
        for (double v : clim.samples[d]) EXPECT_EQ(v, 6.5);
    }
}

TEST(Climatology, ZeroWindowOneYear) {
    const Date start = make_date(2011, 1, 1);
    const auto obs = series_from(start, 365, [&](Date d) { return static_cast<double>(days_between(start, d)); });
    const auto clim = build_climatology(obs, 0);
    for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        ASSERT_EQ(clim.samples[d].size(), 1u);
        EXPECT_EQ(clim.samples[d][0], static_cast<double>(d));
    }
}

TEST(Climatology, SinusoidMatchesDirectPooling) {
    const Date start = make_date(2005, 1, 1);
    const auto obs = series_from(start, 6 * 365, [](Date d) {
        return 10.0 + 5.0 * std::sin(2.0 * std::numbers::pi * day_of_year(d) / 365.0);
    });
    const auto clim = build_climatology(obs, 15);
    for (int slot = 1; slot <= kDaysPerYear; ++slot) {
        // Oracle: scan every observation and keep those within the window.
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < obs.size(); ++k) {
            const int doy = day_of_year(add_days(start, static_cast<long>(k)));
            int dist = std::abs(doy - slot);
            dist = std::min(dist, kDaysPerYear - dist);
            if (dist <= 15) {
                sum += obs.values()[k];
                ++n;
            }
        }
        EXPECT_NEAR(clim.means[static_cast<std::size_t>(slot - 1)], sum / static_cast<double>(n), 1e-12);
        // Smoothing of a sinusoid by a 31-day box filter shrinks its amplitude.
        const double exact = 10.0 + 5.0 * std::sin(2.0 * std::numbers::pi * slot / 365.0);
        EXPECT_NEAR(clim.means[static_cast<std::size_t>(slot - 1)], exact, 5.0 * (1.0 - std::sin(std::numbers::pi * 31 / 365.0) / (31 * std::sin(std::numbers::pi / 365.0))) + 1e-9);
    }
}

TEST(Climatology, EqualSampleSizesWithoutGaps) {
    // Six whole years, two of them leap years.
    const auto obs = series_from(make_date(2004, 1, 1), 6 * 365 + 2, [](Date) { return 1.0; });
    const auto clim = build_climatology(obs);
    // Leap days double up slot 59, which is the only deviation.
    const std::size_t ref = clim.samples[200].size();
    for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        if (circular_doy_distance(static_cast<int>(d) + 1, 59) <= 15) continue;
        EXPECT_EQ(clim.samples[d].size(), ref);
    }
    EXPECT_GE(ref, 180u);
}

TEST(Climatology, RejectsShortRecord) {
    const auto obs = series_from(make_date(2004, 1, 1), 100, [](Date) { return 1.0; });
    EXPECT_THROW(build_climatology(obs), InputError);
}

TEST(ClimatologyProb, Examples) {
    const Date start = make_date(2011, 1, 1);
    const auto obs = series_from(start, 365, [&](Date d) { return 1.0 + static_cast<double>(days_between(start, d) % 10); });
    const auto clim = build_climatology(obs, 0);
    // Build a slot holding exactly 1..10 by pooling with window 0 over ten years is heavy; use a hand sample.
    DayOfYearClimatology hand;
    for (auto& s : hand.samples) s = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    EXPECT_EQ(climatology_prob_forecast(hand, make_date(2012, 3, 3), 5.0), 0.5);
    EXPECT_EQ(climatology_prob_forecast(hand, make_date(2012, 3, 3), 0.0), 1.0);
    EXPECT_EQ(climatology_prob_forecast(hand, make_date(2012, 3, 3), 10.0), 0.0);
    double prev = 1.0;
    for (double z = 0.0; z < 12.0; z += 0.25) {
        const double p = climatology_prob_forecast(clim, make_date(2013, 6, 1), z);
        EXPECT_LE(p, prev);
        EXPECT_GE(p, 0.0);
        prev = p;
    }
}

TEST(Persistence, LeadInvariant) {
    const auto obs = series_from(make_date(2010, 1, 1), 30, [](Date d) { return static_cast<double>(day_of_year(d)); });
    const Date issue = make_date(2010, 1, 10);
    for (int lead = 1; lead <= 7; ++lead) EXPECT_EQ(simple_persistence(obs, issue, lead), 10.0);
    EXPECT_EQ(simple_persistence(obs, issue, 1), simple_persistence(obs, issue, 7));
}

TEST(Persistence, ConstantObservationsGiveZeroError) {
    const auto obs = series_from(make_date(2010, 1, 1), 30, [](Date) { return 12.0; });
    for (int lead = 1; lead <= 7; ++lead) {
        const Date issue = make_date(2010, 1, 5);
        EXPECT_EQ(simple_persistence(obs, issue, lead) - obs.at(add_days(issue, lead)), 0.0);
    }
}

TEST(Persistence, MissingIssueObservation) {
    DailySeries obs(make_date(2010, 1, 1), {1, kMissing, 3});
    EXPECT_THROW(simple_persistence(obs, make_date(2010, 1, 2), 1), InputError);
    EXPECT_THROW(simple_persistence(obs, make_date(2010, 1, 1), 8), InputError);
}

TEST(AnomalyPersistence, Examples) {
    DayOfYearClimatology clim;
    const Date issue = make_date(2010, 5, 1), valid = make_date(2010, 5, 3);
    clim.means.fill(0.0);
    clim.means[static_cast<std::size_t>(day_of_year(issue) - 1)] = 10.0;
    clim.means[static_cast<std::size_t>(day_of_year(valid) - 1)] = 8.0;
    DailySeries obs(issue, {12.0});
    EXPECT_EQ(anomaly_persistence(obs, clim, issue, 2), 10.0);
    DailySeries at_mean(issue, {10.0});
    EXPECT_EQ(anomaly_persistence(at_mean, clim, issue, 2), 8.0);
    DailySeries low(issue, {1.0});
    EXPECT_EQ(anomaly_persistence(low, clim, issue, 2), 0.0);  // 8 + (1 - 10) floored
}

TEST(AnomalyPersistence, ConstantClimatologyIsSimplePersistence) {
    std::mt19937_64 rng(4);
    std::exponential_distribution<double> e(0.1);
    std::vector<double> v(400);
    for (double& x : v) x = e(rng);
    DailySeries obs(make_date(2010, 1, 1), v);
    DayOfYearClimatology clim;
    clim.means.fill(7.25);
    for (Date issue = make_date(2010, 1, 1); issue < make_date(2011, 1, 20); issue = add_days(issue, 1)) {
        for (int lead = 1; lead <= 7; ++lead) {
            EXPECT_EQ(anomaly_persistence(obs, clim, issue, lead), simple_persistence(obs, issue, lead));
        }
    }
}

namespace {

struct StandaloneFixture {
    Forcing forcing;
    ForcingForecast forecast;
    DailySeries obs;
};

StandaloneFixture standalone_fixture(bool perturb) {
    const Date start = make_date(2010, 1, 1);
    const std::size_t n = 120;
    std::mt19937_64 rng(6);
    std::exponential_distribution<double> e(0.2);
    std::normal_distribution<double> nrm(0.0, 1.0);
    std::vector<double> p(n), t(n), q(n);
    for (std::size_t k = 0; k < n; ++k) {
        p[k] = e(rng);
        t[k] = 10.0 + nrm(rng);
        q[k] = 0.5 * p[k] + (k ? 0.5 * q[k - 1] : 0.0);
    }
    StandaloneFixture f;
    f.forcing = {DailySeries(start, p), DailySeries(start, t, ValueDomain::Real)};
    f.obs = DailySeries(start, q);
    for (std::size_t i = 0; i + 7 < n; ++i) {
        const Date issue = add_days(start, static_cast<long>(i));
        for (int lead = 1; lead <= 7; ++lead) {
            for (int m = 0; m < kNumMembers; ++m) {
                const double scale = perturb ? 1.0 + 0.1 * m : 1.0;
                f.forecast.precip.set(issue, lead, m, p[i + static_cast<std::size_t>(lead)] * scale);
                f.forecast.temperature.set(issue, lead, m, t[i + static_cast<std::size_t>(lead)]);
            }
        }
    }
    return f;
}

}  // namespace

TEST(Standalone, IdenticalForcingGivesIdenticalMembers) {
    const auto f = standalone_fixture(false);
    const auto data = standalone_training_set(f.forcing, f.obs, {make_date(2010, 1, 1), make_date(2010, 3, 31)}, 10);
    nn::TrainConfig cfg;
    cfg.lookback = 10;
    cfg.hidden_size = 4;
    cfg.epochs = 2;
    const auto model = nn::train(data, cfg).model;
    const auto out = standalone_lstm_forecast(model, f.forcing, f.forecast);
    EXPECT_GT(out.archive.present_cells(), 0u);
    for (const auto& [issue, block] : out.archive.blocks()) {
        for (const auto& ens : block) {
            if (is_missing(ens[0])) continue;
            for (double v : ens) EXPECT_EQ(v, ens[0]);
        }
    }
}

TEST(Standalone, ZeroEpochModelOutputsReadoutBias) {
    const auto f = standalone_fixture(true);
    const auto data = standalone_training_set(f.forcing, f.obs, {make_date(2010, 1, 1), make_date(2010, 3, 31)}, 10);
    nn::TrainConfig cfg;
    cfg.lookback = 10;
    cfg.epochs = 0;
    auto model = nn::train(data, cfg).model;
    // With all weights zero the network output is b_d whatever the input.
    for (auto t : model.params.tensors()) std::fill(t.begin(), t.end(), 0.0);
    model.params.readout_bias = 0.25;
    const double expected = std::max(0.0, model.output_scaler.inverse(0, 0.25));
    const auto out = standalone_lstm_forecast(model, f.forcing, f.forecast);
    for (const auto& [issue, block] : out.archive.blocks()) {
        for (const auto& ens : block) {
            for (double v : ens) {
                if (!is_missing(v)) {
                    EXPECT_EQ(v, expected);
                }
            }
        }
    }
}

TEST(Standalone, SkipsCellsWithoutHistory) {
    const auto f = standalone_fixture(false);
    const auto data = standalone_training_set(f.forcing, f.obs, {make_date(2010, 1, 1), make_date(2010, 3, 31)}, 10);
    EXPECT_EQ(data.size(), 90u - 9u);
    nn::TrainConfig cfg;
    cfg.lookback = 10;
    cfg.epochs = 0;
    const auto out = standalone_lstm_forecast(nn::train(data, cfg).model, f.forcing, f.forecast);
    // Windows ending before day 10 of the record have no forcing.
    EXPECT_GT(out.stats.skipped, 0u);
    EXPECT_FALSE(out.archive.get(make_date(2010, 1, 1), 1, 0).has_value());
    EXPECT_TRUE(out.archive.get(make_date(2010, 1, 9), 1, 0).has_value());
}
