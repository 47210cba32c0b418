#include <gtest/gtest.h>

#include <cmath>

#include "enspost/synthetic.hpp"

using namespace enspost;

namespace {

CatchmentConfig short_config() {
    CatchmentConfig c;
    c.years = 3;
    c.train_years = 2;
    return c;
}

}  // namespace

TEST(Synthetic, SameSeedSameDataset) {
    const auto a = generate(short_config());
    const auto b = generate(short_config());
    EXPECT_EQ(a.flow, b.flow);
    EXPECT_EQ(a.storage, b.storage);
    EXPECT_EQ(a.forcing.precip, b.forcing.precip);
    EXPECT_EQ(a.forcing.temperature, b.forcing.temperature);
    EXPECT_EQ(a.raw, b.raw);
    EXPECT_EQ(a.forcing_forecast.precip, b.forcing_forecast.precip);
    auto other = short_config();
    other.seed = 7;
    EXPECT_FALSE(generate(other).flow == a.flow);
}

TEST(Synthetic, MassBalance) {
    for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
        auto c = short_config();
        c.seed = seed;
        c.initial_storage = 5.0 * static_cast<double>(seed);
        const auto mb = mass_balance(generate(c));
        EXPECT_LT(mb.relative_error(), 1e-9);
    }
    EXPECT_LT(mass_balance(generate(CatchmentConfig{})).relative_error(), 1e-9);
}

TEST(Synthetic, NonNegativeAndComplete) {
    const auto ds = generate(short_config());
    for (double v : ds.flow.values()) EXPECT_GE(v, 0.0);
    for (double v : ds.forcing.precip.values()) EXPECT_GE(v, 0.0);
    EXPECT_EQ(ds.flow.size(), 1096u);
    EXPECT_EQ(ds.raw.issue_count(), ds.flow.size() - 7);
    EXPECT_EQ(ds.raw.present_cells(), ds.raw.issue_count() * 77);
    for (const auto& [issue, block] : ds.raw.blocks()) {
        for (const auto& ens : block) {
            for (double v : ens) EXPECT_GE(v, 0.0);
        }
    }
}

TEST(Synthetic, MatchingRecessionMakesControlExact) {
    auto c = short_config();
    c.k_forecast = c.k_true;
    const auto ds = generate(c);
    for (const auto& [issue, block] : ds.raw.blocks()) {
        for (int lead = 1; lead <= 7; ++lead) {
            EXPECT_NEAR(block[static_cast<std::size_t>(lead - 1)][0], ds.flow.at(add_days(issue, lead)), 1e-12);
        }
    }
}

TEST(Synthetic, NoForcingErrorNoSpread) {
    auto c = short_config();
    c.sigma1 = 0.0;
    const auto audit = ensemble_spread_audit(generate(c));
    for (const auto& l : audit) EXPECT_EQ(l.ensemble_std, 0.0);
}

TEST(Synthetic, MatchedModelAndNoForcingErrorIsExactEverywhere) {
    auto c = short_config();
    c.k_forecast = c.k_true;
    c.sigma1 = 0.0;
    const auto ds = generate(c);
    for (const auto& [issue, block] : ds.raw.blocks()) {
        for (int lead = 1; lead <= 7; ++lead) {
            for (double v : block[static_cast<std::size_t>(lead - 1)]) {
                EXPECT_NEAR(v, ds.flow.at(add_days(issue, lead)), 1e-12);
            }
        }
    }
}

TEST(Synthetic, ForcingPerturbationUnbiasedInExpectation) {
    for (const double share : {1.0, 0.3}) {
        CatchmentConfig c;
        c.member_spread = share;
        const auto ds = generate(c);
        for (const auto& l : ensemble_spread_audit(ds)) {
            const double sigma = forcing_sigma(ds.config, l.lead, 1);
            ASSERT_GT(l.log_ratio_samples, 1000u);
            // Standard error of the mean with the shared part counted once per issue.
            const double se = sigma * std::sqrt((1.0 - share) / static_cast<double>(l.log_ratio_groups) +
                                                share / static_cast<double>(l.log_ratio_samples));
            EXPECT_LT(std::abs(l.log_ratio_bias), 3.0 * se) << "share " << share << " lead " << l.lead;
            EXPECT_NEAR(l.log_ratio_std, sigma, 0.05 * sigma);
        }
    }
}

TEST(Synthetic, MemberSpreadSetsSharedErrorShare) {
    auto c = short_config();
    c.sigma1 = 0.5;
    c.member_spread = 0.0;
    const auto same = generate(c);
    for (const auto& [issue, block] : same.forcing_forecast.precip.blocks()) {
        for (const auto& ens : block) {
            for (int m = 2; m < kNumMembers; ++m) EXPECT_EQ(ens[static_cast<std::size_t>(m)], ens[1]);
        }
    }

    // Correlation of two perturbed members' log ratios equals 1 - member_spread.
    for (const double share : {1.0, 0.4}) {
        c.member_spread = share;
        const auto ds = generate(c);
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        std::size_t n = 0;
        for (const auto& [issue, block] : ds.forcing_forecast.precip.blocks()) {
            for (int lead = 1; lead <= 7; ++lead) {
                const double p = ds.forcing.precip.at(add_days(issue, lead));
                if (!(p > 0.0)) continue;
                const double s = c.sigma1 * std::sqrt(static_cast<double>(lead));
                const auto& ens = block[static_cast<std::size_t>(lead - 1)];
                const double a = std::log(ens[3] / p) / s, b = std::log(ens[7] / p) / s;
                sa += a;
                sb += b;
                saa += a * a;
                sbb += b * b;
                sab += a * b;
                ++n;
            }
        }
        const double dn = static_cast<double>(n);
        const double cov = sab / dn - (sa / dn) * (sb / dn);
        const double r = cov / std::sqrt((saa / dn - (sa / dn) * (sa / dn)) * (sbb / dn - (sb / dn) * (sb / dn)));
        EXPECT_NEAR(r, 1.0 - share, 4.0 / std::sqrt(dn)) << "share " << share;
    }
}

TEST(Synthetic, ControlMemberUsesUnperturbedForcing) {
    const auto ds = generate(short_config());
    for (const auto& [issue, block] : ds.forcing_forecast.precip.blocks()) {
        for (int lead = 1; lead <= 7; ++lead) {
            EXPECT_EQ(block[static_cast<std::size_t>(lead - 1)][0], ds.forcing.precip.at(add_days(issue, lead)));
        }
    }
}

// Member 0 runs with perfect forcing from the true storage, so its error is
// structural only and it shrinks with lead as the forecast reservoir drains
// towards the truth. Forcing error accumulates in the perturbed members: the
// spread and their mean absolute departure from the control grow at every
// lead. Squared errors are dominated by a few lognormal extremes, so RMSE
// growth is only checked end to end.
TEST(Synthetic, ErrorGrowthWithLead) {
    const auto ds = generate(CatchmentConfig{});
    const auto audit = ensemble_spread_audit(ds);
    for (std::size_t k = 1; k < audit.size(); ++k) {
        EXPECT_GT(audit[k].ensemble_std, audit[k - 1].ensemble_std);
        EXPECT_LE(audit[k].control_rmse, audit[k - 1].control_rmse);
    }
    struct Err {
        double rmse, departure;
    };
    auto member_error = [&](int lead) {
        double sse = 0.0, dep = 0.0;
        std::size_t n = 0;
        for (const auto& [issue, block] : ds.raw.blocks()) {
            const double y = ds.flow.at(add_days(issue, lead));
            const auto& ens = block[static_cast<std::size_t>(lead - 1)];
            for (int m = 1; m < kNumMembers; ++m) {
                const double e = ens[static_cast<std::size_t>(m)] - y;
                sse += e * e;
                dep += std::abs(ens[static_cast<std::size_t>(m)] - ens[0]);
                ++n;
            }
        }
        const double dn = static_cast<double>(n);
        return Err{std::sqrt(sse / dn), dep / dn};
    };
    for (int lead = 2; lead <= 7; ++lead) EXPECT_GT(member_error(lead).departure, member_error(lead - 1).departure);
    EXPECT_GT(member_error(7).rmse, member_error(1).rmse);
}

TEST(Synthetic, SplitRanges) {
    const CatchmentConfig c;
    EXPECT_EQ(c.train_range().first, make_date(2004, 1, 1));
    EXPECT_EQ(c.train_range().last, make_date(2009, 12, 31));
    EXPECT_EQ(c.verify_range().first, make_date(2010, 1, 1));
    EXPECT_EQ(c.verify_range().last, make_date(2012, 12, 31));
}

TEST(Synthetic, RejectsInvalidConfig) {
    CatchmentConfig c;
    c.k_true = 1.0;
    EXPECT_THROW(generate(c), InputError);
    c = CatchmentConfig{};
    c.wet_probability = 0.0;
    EXPECT_THROW(generate(c), InputError);
    c = CatchmentConfig{};
    c.train_years = 9;
    EXPECT_THROW(generate(c), InputError);
    c = CatchmentConfig{};
    c.member_spread = 1.5;
    EXPECT_THROW(generate(c), InputError);
}
