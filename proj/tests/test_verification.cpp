#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "enspost/verification.hpp"

using namespace enspost;

namespace {

std::vector<ProbForecast> pf(std::initializer_list<std::pair<double, int>> l) {
    std::vector<ProbForecast> out;
    for (auto [p, o] : l) out.push_back({p, o});
    return out;
}

}  // namespace

TEST(Nse, Examples) {
    const std::vector<double> y{1, 2, 3};
    EXPECT_EQ(nse(y, y), 1.0);
    EXPECT_EQ(nse(std::vector<double>{2, 2, 2}, y), 0.0);
    EXPECT_DOUBLE_EQ(nse(std::vector<double>{1, 2, 4}, y), 0.5);
    EXPECT_THROW(nse(y, std::vector<double>{5, 5, 5}), UndefinedScoreError);
    EXPECT_THROW(nse(std::vector<double>{}, std::vector<double>{}), InputError);
    EXPECT_THROW(nse(std::vector<double>{1}, y), InputError);
}

TEST(Rmse, Examples) {
    const std::vector<double> y{4, 1};
    EXPECT_EQ(rmse(y, y), 0.0);
    EXPECT_EQ(rmse(std::vector<double>{3}, std::vector<double>{1}), 2.0);
    EXPECT_NEAR(rmse(std::vector<double>{7, -3}, y), 3.5355339059327378, 1e-15);
}

TEST(Pbias, Examples) {
    const std::vector<double> y{2, 5, 9};
    EXPECT_EQ(pbias(y, y), 0.0);
    EXPECT_NEAR(pbias(std::vector<double>{2.2, 5.5, 9.9}, y), 10.0, 1e-12);
    EXPECT_EQ(pbias(std::vector<double>{1, 1}, std::vector<double>{2, 2}), -50.0);
    EXPECT_THROW(pbias(std::vector<double>{1, 1}, std::vector<double>{0, 0}), UndefinedScoreError);
}

TEST(Exceedance, Examples) {
    std::vector<double> ens(11);
    for (int k = 0; k < 11; ++k) ens[static_cast<std::size_t>(k)] = k + 1;
    EXPECT_EQ(exceedance_probability(ens, 0.5), 1.0);
    EXPECT_EQ(exceedance_probability(ens, 11.0), 0.0);
    EXPECT_EQ(exceedance_probability(ens, 5.0), 6.0 / 11.0);
    double prev = 1.0;
    for (double z = 0.0; z < 12.0; z += 0.1) {
        const double p = exceedance_probability(ens, z);
        EXPECT_LE(p, prev);
        prev = p;
    }
    EXPECT_EQ(outcome_indicator(5.0, 5.0), 0);
    EXPECT_EQ(outcome_indicator(5.0001, 5.0), 1);
}

TEST(Brier, Examples) {
    EXPECT_EQ(brier_score(pf({{1.0, 1}, {1.0, 1}})), 0.0);
    EXPECT_EQ(brier_score(pf({{0.0, 1}})), 1.0);
    EXPECT_DOUBLE_EQ(brier_score(pf({{0.5, 1}, {0.2, 0}})), 0.145);
}

TEST(Bss, Examples) {
    const auto set = pf({{0.3, 1}, {0.6, 0}, {0.9, 1}});
    EXPECT_EQ(brier_skill_score(set, set), 0.0);
    EXPECT_EQ(brier_skill_score(pf({{1.0, 1}, {0.0, 0}}), pf({{0.5, 1}, {0.5, 0}})), 1.0);
    EXPECT_DOUBLE_EQ(brier_skill_score_from(0.1, 0.2), 0.5);
    EXPECT_THROW(brier_skill_score_from(0.1, 0.0), UndefinedScoreError);
}

TEST(Metrics, RandomInstancesMatchDirectFormulas) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(2, 60);
    std::gamma_distribution<double> g(1.5, 8.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int inst = 0; inst < 1000; ++inst) {
        const auto n = static_cast<std::size_t>(len(rng));
        std::vector<double> f(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            f[k] = g(rng);
            y[k] = g(rng);
        }
        long double my = 0, sse = 0, sst = 0, sf = 0, sy = 0;
        for (double v : y) my += v;
        my /= n;
        for (std::size_t k = 0; k < n; ++k) {
            sse += (static_cast<long double>(f[k]) - y[k]) * (static_cast<long double>(f[k]) - y[k]);
            sst += (y[k] - my) * (y[k] - my);
            sf += f[k];
            sy += y[k];
        }
        EXPECT_NEAR(nse(f, y), static_cast<double>(1.0L - sse / sst), 1e-12);
        EXPECT_NEAR(rmse(f, y), static_cast<double>(std::sqrt(sse / n)), 1e-12);
        EXPECT_NEAR(pbias(f, y), static_cast<double>(100.0L * (sf - sy) / sy), 1e-12);

        std::vector<double> ens(11);
        for (double& v : ens) v = g(rng);
        const double z = g(rng);
        int above = 0;
        for (double v : ens) above += v > z ? 1 : 0;
        EXPECT_NEAR(exceedance_probability(ens, z), above / 11.0, 1e-12);

        std::vector<ProbForecast> a(n), b(n);
        long double bsa = 0, bsb = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const int o = u(rng) < 0.4 ? 1 : 0;
            a[k] = {u(rng), o};
            b[k] = {u(rng), o};
            bsa += (a[k].probability - o) * (a[k].probability - o);
            bsb += (b[k].probability - o) * (b[k].probability - o);
        }
        EXPECT_NEAR(brier_score(a), static_cast<double>(bsa / n), 1e-12);
        EXPECT_NEAR(brier_skill_score(a, b), static_cast<double>(1.0L - bsa / bsb), 1e-12);
    }
}

TEST(Reliability, SharpPerfectForecasts) {
    std::vector<ProbForecast> set(250, {1.0, 1});
    const auto curve = reliability_diagram(set);
    const auto pts = curve.points();
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].fcst_prob_avg, 1.0);
    EXPECT_EQ(pts[0].obs_freq, 1.0);
    EXPECT_EQ(pts[0].count, 250u);
}

TEST(Reliability, HandBinning) {
    const auto curve = reliability_diagram(pf({{0.05, 0}, {0.05, 0}, {0.95, 1}}));
    const auto pts = curve.points();
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_DOUBLE_EQ(pts[0].fcst_prob_avg, 0.05);
    EXPECT_EQ(pts[0].obs_freq, 0.0);
    EXPECT_EQ(pts[0].count, 2u);
    EXPECT_DOUBLE_EQ(pts[1].fcst_prob_avg, 0.95);
    EXPECT_EQ(pts[1].obs_freq, 1.0);
    EXPECT_EQ(pts[1].count, 1u);
    EXPECT_EQ(curve.bins.size(), 10u);
    EXPECT_TRUE(is_missing(curve.bins[4].obs_freq));
}

TEST(Reliability, CalibratedForecastsHugDiagonal) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ProbForecast> set;
    for (int k = 0; k < 10000; ++k) {
        const double p = u(rng);
        set.push_back({p, u(rng) < p ? 1 : 0});
    }
    const auto curve = reliability_diagram(set);
    EXPECT_EQ(curve.total(), 10000u);
    for (const auto& b : curve.points()) EXPECT_LT(std::abs(b.obs_freq - b.fcst_prob_avg), 0.05);
}

TEST(Reliability, TermBoundedByBrierScore) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int inst = 0; inst < 200; ++inst) {
        std::vector<ProbForecast> set;
        for (int k = 0; k < 50; ++k) set.push_back({u(rng), u(rng) < 0.3 ? 1 : 0});
        const auto curve = reliability_diagram(set);
        EXPECT_EQ(curve.total(), set.size());
        EXPECT_LE(reliability_term(curve), brier_score(set) + 1e-9);
    }
}

TEST(Reliability, EdgeProbabilities) {
    EXPECT_EQ(reliability_bin_index(0.0, 10), 0u);
    EXPECT_EQ(reliability_bin_index(0.1, 10), 1u);
    EXPECT_EQ(reliability_bin_index(1.0, 10), 9u);
}

namespace {

struct VerifyFixture {
    DailySeries obs;
    ForecastArchive a, b;
    DayOfYearClimatology clim;
    CategoryThresholds thresholds;
};

VerifyFixture verify_fixture(Date start, std::size_t days) {
    std::mt19937_64 rng(31);
    std::gamma_distribution<double> g(2.0, 5.0);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> q(days);
    for (double& v : q) v = g(rng);
    VerifyFixture f;
    f.obs = DailySeries(start, q);
    for (std::size_t i = 0; i + 7 < days; ++i) {
        for (int lead = 1; lead <= 7; ++lead) {
            for (int m = 0; m < kNumMembers; ++m) {
                const double truth = q[i + static_cast<std::size_t>(lead)];
                f.a.set(add_days(start, static_cast<long>(i)), lead, m, std::max(0.0, truth + lead * n(rng)));
                f.b.set(add_days(start, static_cast<long>(i)), lead, m, std::max(0.0, 0.7 * truth + 2.0 * n(rng)));
            }
        }
    }
    const auto clim_len = static_cast<std::ptrdiff_t>(std::min<std::size_t>(days, 300));
    for (auto& s : f.clim.samples) s = std::vector<double>(q.begin(), q.begin() + clim_len);
    for (auto& m : f.clim.means) m = 10.0;
    f.thresholds = category_thresholds(f.obs);
    return f;
}

}  // namespace

TEST(ConditionalVerify, SeasonsPartitionTheSample) {
    const auto f = verify_fixture(make_date(2010, 1, 1), 700);
    const auto report = conditional_verify({archive_system("a", f.a), archive_system("b", f.b)},
                                           climatology_system("clim", f.clim), f.obs, f.thresholds,
                                           {make_date(2010, 2, 1), make_date(2011, 11, 20)});
    ASSERT_FALSE(report.rows.empty());
    EXPECT_TRUE(std::is_sorted(report.rows.begin(), report.rows.end(),
                               [](const MetricRow& x, const MetricRow& y) { return x.key() < y.key(); }));
    for (const char* sys : {"a", "b"}) {
        for (int lead = 1; lead <= 7; ++lead) {
            for (const char* cat : {"low_moderate", "high"}) {
                const auto* all = report.find(sys, lead, "all", cat, "BS");
                const auto* cool = report.find(sys, lead, "cool", cat, "BS");
                const auto* warm = report.find(sys, lead, "warm", cat, "BS");
                ASSERT_TRUE(all && cool && warm);
                EXPECT_EQ(all->n, cool->n + warm->n);
            }
        }
    }
}

TEST(ConditionalVerify, RowsMatchDirectComputationOnSubsets) {
    const auto f = verify_fixture(make_date(2010, 1, 1), 500);
    const DateRange range{make_date(2010, 1, 10), make_date(2011, 5, 1)};
    const auto clim_sys = climatology_system("clim", f.clim);
    const auto report =
        conditional_verify({archive_system("a", f.a), clim_sys}, clim_sys, f.obs, f.thresholds, range);
    const int lead = 4;
    std::vector<double> fm, y;
    std::vector<ProbForecast> main_set, ref_set;
    const double z = f.thresholds.at(FlowCategory::High);
    for (Date v = range.first; v <= range.last; v = add_days(v, 1)) {
        if (classify_season(v) != Season::Warm) continue;
        const auto ens = f.a.ensemble(add_days(v, -lead), lead);
        if (!ens) continue;
        fm.push_back(ensemble_mean(*ens));
        y.push_back(f.obs.at(v));
        main_set.push_back({exceedance_probability(*ens, z), outcome_indicator(f.obs.at(v), z)});
        ref_set.push_back({exceedance_probability(f.clim.sample(v), z), outcome_indicator(f.obs.at(v), z)});
    }
    EXPECT_EQ(*report.value("a", lead, "warm", "all", "NSE"), nse(fm, y));
    EXPECT_EQ(*report.value("a", lead, "warm", "all", "RMSE"), rmse(fm, y));
    EXPECT_EQ(*report.value("a", lead, "warm", "all", "PBIAS"), pbias(fm, y));
    EXPECT_EQ(*report.value("a", lead, "warm", "high", "BS"), brier_score(main_set));
    EXPECT_EQ(*report.value("a", lead, "warm", "high", "BSS"), brier_skill_score(main_set, ref_set));
    EXPECT_EQ(report.find("a", lead, "warm", "all", "NSE")->n, y.size());
    // Climatology against itself.
    for (int l = 1; l <= 7; ++l) {
        for (const char* cat : {"low_moderate", "high"}) EXPECT_EQ(*report.value("clim", l, "all", cat, "BSS"), 0.0);
    }
}

TEST(ConditionalVerify, SingleSeasonEqualsAll) {
    const auto f = verify_fixture(make_date(2010, 1, 1), 200);
    // May..August: warm only.
    const auto report = conditional_verify({archive_system("a", f.a)}, climatology_system("clim", f.clim), f.obs,
                                           f.thresholds, {make_date(2010, 5, 1), make_date(2010, 6, 30)});
    for (const auto& r : report.rows) {
        if (r.season != "all") continue;
        const auto* w = report.find(r.system, r.lead, "warm", r.category, r.metric);
        ASSERT_NE(w, nullptr);
        EXPECT_EQ(w->value, r.value);
        EXPECT_EQ(w->n, r.n);
        EXPECT_EQ(report.find(r.system, r.lead, "cool", r.category, r.metric), nullptr);
    }
}

TEST(ConditionalVerify, CommonSampleAcrossSystems) {
    auto f = verify_fixture(make_date(2010, 1, 1), 300);
    // Knock out one member of one issue in system b; that valid date must drop for every system.
    ForecastArchive b2;
    for (const auto& [issue, block] : f.b.blocks()) {
        for (int lead = 1; lead <= 7; ++lead) {
            for (int m = 0; m < kNumMembers; ++m) {
                if (issue == make_date(2010, 3, 1) && lead == 2 && m == 5) continue;
                b2.set(issue, lead, m, block[static_cast<std::size_t>(lead - 1)][static_cast<std::size_t>(m)]);
            }
        }
    }
    const auto report = conditional_verify({archive_system("a", f.a), archive_system("b", b2)},
                                           climatology_system("clim", f.clim), f.obs, f.thresholds,
                                           {make_date(2010, 2, 1), make_date(2010, 9, 1)});
    const auto* a2 = report.find("a", 2, "all", "all", "RMSE");
    const auto* a3 = report.find("a", 3, "all", "all", "RMSE");
    const auto* bb = report.find("b", 2, "all", "all", "RMSE");
    ASSERT_TRUE(a2 && a3 && bb);
    EXPECT_EQ(a2->n, bb->n);
    EXPECT_EQ(a2->n + 1, a3->n);
}

TEST(ConditionalVerify, ReliabilityRowsPerSystemLeadCategory) {
    const auto f = verify_fixture(make_date(2010, 1, 1), 200);
    const auto report = conditional_verify({archive_system("a", f.a)}, climatology_system("clim", f.clim), f.obs,
                                           f.thresholds, {make_date(2010, 1, 8), make_date(2010, 7, 1)});
    EXPECT_EQ(report.reliability.size(), 7u * 2u * 10u);
}
