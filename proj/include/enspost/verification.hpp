#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "enspost/baselines.hpp"
#include "enspost/errors.hpp"
#include "enspost/hydro_core.hpp"

namespace enspost {

namespace detail {

inline void check_pairs(std::span<const double> f, std::span<const double> y, const char* what) {
    if (f.size() != y.size()) throw InputError(std::string(what) + ": forecast and observation lengths differ");
    if (f.empty()) throw InputError(std::string(what) + ": empty sample");
}

}  // namespace detail

/// Nash-Sutcliffe efficiency, 1 - SSE / sum((y - mean y)^2).
inline double nse(std::span<const double> forecast, std::span<const double> obs) {
    detail::check_pairs(forecast, obs, "NSE");
    double mean = 0.0;
    for (const double y : obs) mean += y;
    mean /= static_cast<double>(obs.size());
    double sse = 0.0, sst = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
        sse += (forecast[k] - obs[k]) * (forecast[k] - obs[k]);
        sst += (obs[k] - mean) * (obs[k] - mean);
    }
    if (sst == 0.0) throw UndefinedScoreError("NSE undefined for constant observations");
    return 1.0 - sse / sst;
}

inline double rmse(std::span<const double> forecast, std::span<const double> obs) {
    detail::check_pairs(forecast, obs, "RMSE");
    double sse = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) sse += (forecast[k] - obs[k]) * (forecast[k] - obs[k]);
    return std::sqrt(sse / static_cast<double>(obs.size()));
}

/// Percent bias, 100 * sum(f - y) / sum(y). Positive means overforecasting.
inline double pbias(std::span<const double> forecast, std::span<const double> obs) {
    detail::check_pairs(forecast, obs, "Pbias");
    double diff = 0.0, total = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
        diff += forecast[k] - obs[k];
        total += obs[k];
    }
    if (total == 0.0) throw UndefinedScoreError("Pbias undefined when observations sum to zero");
    return 100.0 * diff / total;
}

/// Fraction of members strictly above z.
inline double exceedance_probability(std::span<const double> ensemble, double z) {
    if (ensemble.empty()) throw InputError("exceedance_probability: empty ensemble");
    const auto above = std::count_if(ensemble.begin(), ensemble.end(), [z](double v) { return v > z; });
    return static_cast<double>(above) / static_cast<double>(ensemble.size());
}

/// Observation indicator for the event {Y > z}.
inline int outcome_indicator(double observation, double z) { return observation > z ? 1 : 0; }

struct ProbForecast {
    double probability;
    int outcome;
};

/// Probability forecasts of one event definition {flow > z} with outcomes.
using ProbForecastSet = std::vector<ProbForecast>;

inline double brier_score(std::span<const ProbForecast> set) {
    if (set.empty()) throw InputError("Brier score of an empty set");
    double s = 0.0;
    for (const auto& p : set) {
        const double d = p.probability - static_cast<double>(p.outcome);
        s += d * d;
    }
    return s / static_cast<double>(set.size());
}

inline double brier_skill_score_from(double bs_main, double bs_reference) {
    if (bs_reference == 0.0) throw UndefinedScoreError("BSS undefined: reference Brier score is 0");
    return 1.0 - bs_main / bs_reference;
}

/// 1 - BS_main / BS_reference. Both sets must describe the same event at
/// the same valid dates.
inline double brier_skill_score(std::span<const ProbForecast> main, std::span<const ProbForecast> reference) {
    if (main.size() != reference.size()) throw InputError("BSS: main and reference sets differ in size");
    return brier_skill_score_from(brier_score(main), brier_score(reference));
}

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    double fcst_prob_avg = kMissing;
    double obs_freq = kMissing;
    std::size_t count = 0;
};

/// One entry per equal-width bin; empty bins keep count 0 and missing
/// averages.
struct ReliabilityCurve {
    std::vector<ReliabilityBin> bins;

    std::vector<ReliabilityBin> points() const {
        std::vector<ReliabilityBin> out;
        for (const auto& b : bins) {
            if (b.count > 0) out.push_back(b);
        }
        return out;
    }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& b : bins) n += b.count;
        return n;
    }
};

/// Bins [0,w), [w,2w), ..., [1-w,1]: probability 1 falls in the last bin.
inline std::size_t reliability_bin_index(double p, std::size_t bins) {
    const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(bins)));
    return std::min(k, bins - 1);
}

inline ReliabilityCurve reliability_diagram(std::span<const ProbForecast> set, std::size_t bins = 10) {
    if (bins == 0) throw InputError("reliability_diagram: need at least one bin");
    ReliabilityCurve curve;
    curve.bins.resize(bins);
    std::vector<double> psum(bins, 0.0), osum(bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) {
        curve.bins[k].lo = static_cast<double>(k) / static_cast<double>(bins);
        curve.bins[k].hi = static_cast<double>(k + 1) / static_cast<double>(bins);
    }
    for (const auto& p : set) {
        if (!(p.probability >= 0.0 && p.probability <= 1.0)) {
            throw InputError("reliability_diagram: probability outside [0,1]");
        }
        const std::size_t k = reliability_bin_index(p.probability, bins);
        psum[k] += p.probability;
        osum[k] += static_cast<double>(p.outcome);
        curve.bins[k].count += 1;
    }
    for (std::size_t k = 0; k < bins; ++k) {
        auto& b = curve.bins[k];
        if (b.count == 0) continue;
        b.fcst_prob_avg = psum[k] / static_cast<double>(b.count);
        b.obs_freq = osum[k] / static_cast<double>(b.count);
    }
    return curve;
}

/// Reliability term of the Brier decomposition, sum_k n_k (pbar_k - obar_k)^2 / n.
inline double reliability_term(const ReliabilityCurve& curve) {
    const std::size_t n = curve.total();
    if (n == 0) return 0.0;
    double s = 0.0;
    for (const auto& b : curve.points()) {
        const double d = b.fcst_prob_avg - b.obs_freq;
        s += static_cast<double>(b.count) * d * d;
    }
    return s / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Conditional verification

/// A named forecaster. `forecast(issue, lead)` returns the members of the
/// forecast (size 1 for single-valued systems), or nullopt when unavailable.
/// The point forecast is the member mean; probabilities are exceedance
/// fractions over the members.
struct ForecastSystem {
    std::string name;
    std::function<std::optional<std::vector<double>>(Date issue, int lead)> forecast;
};

inline ForecastSystem archive_system(std::string name, const ForecastArchive& archive) {
    return {std::move(name), [&archive](Date issue, int lead) -> std::optional<std::vector<double>> {
                const auto e = archive.ensemble(issue, lead);
                if (!e) return std::nullopt;
                return std::vector<double>(e->begin(), e->end());
            }};
}

/// Single-valued system from one archive member (member 0 = deterministic).
inline ForecastSystem member_system(std::string name, const ForecastArchive& archive, int member) {
    return {std::move(name), [&archive, member](Date issue, int lead) -> std::optional<std::vector<double>> {
                const auto v = archive.get(issue, lead, member);
                if (!v) return std::nullopt;
                return std::vector<double>{*v};
            }};
}

/// Climatology as an ensemble of its pooled sample: the member mean is the
/// day-of-year mean and exceedance fractions are climatology_prob_forecast.
inline ForecastSystem climatology_system(std::string name, const DayOfYearClimatology& clim) {
    return {std::move(name), [&clim](Date issue, int lead) -> std::optional<std::vector<double>> {
                return clim.sample(add_days(issue, lead));
            }};
}

inline ForecastSystem simple_persistence_system(std::string name, const DailySeries& obs) {
    return {std::move(name), [&obs](Date issue, int lead) -> std::optional<std::vector<double>> {
                if (!obs.has(issue)) return std::nullopt;
                return std::vector<double>{simple_persistence(obs, issue, lead)};
            }};
}

inline ForecastSystem anomaly_persistence_system(std::string name, const DailySeries& obs,
                                                 const DayOfYearClimatology& clim) {
    return {std::move(name), [&obs, &clim](Date issue, int lead) -> std::optional<std::vector<double>> {
                if (!obs.has(issue)) return std::nullopt;
                return std::vector<double>{anomaly_persistence(obs, clim, issue, lead)};
            }};
}

struct VerificationSettings {
    std::vector<int> leads{1, 2, 3, 4, 5, 6, 7};
    std::vector<FlowCategory> categories{FlowCategory::LowModerate, FlowCategory::High};
    std::size_t reliability_bins = 10;
};

inline constexpr const char* kAll = "all";

struct MetricRow {
    std::string system;
    int lead = 0;
    std::string season;
    std::string category;
    std::string metric;
    double value = 0.0;
    std::size_t n = 0;

    auto key() const { return std::tie(system, lead, season, category, metric); }
};

struct ReliabilityRow {
    std::string system;
    int lead = 0;
    std::string category;
    ReliabilityBin bin;

    auto key() const { return std::make_tuple(std::cref(system), lead, std::cref(category), bin.lo); }
};

struct VerificationReport {
    std::vector<MetricRow> rows;
    std::vector<ReliabilityRow> reliability;
    std::vector<std::string> warnings;

    std::optional<double> value(const std::string& system, int lead, const std::string& season,
                                const std::string& category, const std::string& metric) const {
        for (const auto& r : rows) {
            if (r.system == system && r.lead == lead && r.season == season && r.category == category &&
                r.metric == metric) {
                return r.value;
            }
        }
        return std::nullopt;
    }

    const MetricRow* find(const std::string& system, int lead, const std::string& season,
                          const std::string& category, const std::string& metric) const {
        for (const auto& r : rows) {
            if (r.system == system && r.lead == lead && r.season == season && r.category == category &&
                r.metric == metric) {
                return &r;
            }
        }
        return nullptr;
    }
};

/// Flow thresholds for each category, from the designated climatology sample.
using CategoryThresholds = std::map<FlowCategory, double>;

inline CategoryThresholds category_thresholds(const DailySeries& climatology_obs,
                                              const std::vector<FlowCategory>& categories = {
                                                  FlowCategory::LowModerate, FlowCategory::High}) {
    CategoryThresholds t;
    for (const auto c : categories) t[c] = flow_threshold(climatology_obs, non_exceedance_level(c));
    return t;
}

/// Verifies every system on a common pair set per lead: valid dates in
/// `verify_range` with an observation and a forecast from every system.
/// Deterministic scores (NSE, RMSE, PBIAS; category "all") use member means;
/// BS and BSS (per flow category) use exceedance probabilities of the
/// category threshold, with BSS relative to `reference` at the same valid
/// dates. Subsets are by valid-date season. Rows come out sorted by
/// (system, lead, season, category, metric).
inline VerificationReport conditional_verify(const std::vector<ForecastSystem>& systems,
                                             const ForecastSystem& reference, const DailySeries& obs,
                                             const CategoryThresholds& thresholds, DateRange verify_range,
                                             const VerificationSettings& settings = {}) {
    VerificationReport report;

    struct Sample {
        Date valid;
        double obs;
        std::vector<std::vector<double>> members;  // per system
        std::vector<double> reference;
    };

    for (const int lead : settings.leads) {
        std::vector<Sample> samples;
        for (Date valid = verify_range.first; valid <= verify_range.last; valid = add_days(valid, 1)) {
            const auto y = obs.get(valid);
            if (!y) continue;
            const Date issue = add_days(valid, -lead);
            Sample s{valid, *y, {}, {}};
            bool ok = true;
            for (const auto& sys : systems) {
                auto f = sys.forecast(issue, lead);
                if (!f || f->empty()) {
                    ok = false;
                    break;
                }
                s.members.push_back(std::move(*f));
            }
            if (!ok) continue;
            auto ref = reference.forecast(issue, lead);
            if (!ref || ref->empty()) continue;
            s.reference = std::move(*ref);
            samples.push_back(std::move(s));
        }
        if (samples.empty()) {
            report.warnings.push_back("lead " + std::to_string(lead) + ": no verification pairs");
            continue;
        }

        const std::vector<std::pair<std::string, std::optional<Season>>> seasons{
            {kAll, std::nullopt}, {"cool", Season::Cool}, {"warm", Season::Warm}};

        for (std::size_t si = 0; si < systems.size(); ++si) {
            const std::string& name = systems[si].name;
            for (const auto& [season_name, season] : seasons) {
                std::vector<const Sample*> subset;
                for (const auto& s : samples) {
                    if (!season || classify_season(s.valid) == *season) subset.push_back(&s);
                }
                if (subset.empty()) {
                    report.warnings.push_back(name + " lead " + std::to_string(lead) + " season " +
                                              season_name + ": empty subset");
                    continue;
                }
                std::vector<double> f, y;
                for (const Sample* s : subset) {
                    const auto& m = s->members[si];
                    double mean = 0.0;
                    for (const double v : m) mean += v;
                    f.push_back(mean / static_cast<double>(m.size()));
                    y.push_back(s->obs);
                }
                auto add = [&](const std::string& cat, const std::string& metric, auto&& compute) {
                    try {
                        report.rows.push_back({name, lead, season_name, cat, metric, compute(), subset.size()});
                    } catch (const UndefinedScoreError& e) {
                        report.warnings.push_back(name + " lead " + std::to_string(lead) + " " + season_name +
                                                  " " + cat + " " + metric + ": " + e.what());
                    }
                };
                add(kAll, "NSE", [&] { return nse(f, y); });
                add(kAll, "RMSE", [&] { return rmse(f, y); });
                add(kAll, "PBIAS", [&] { return pbias(f, y); });

                for (const auto category : settings.categories) {
                    const auto it = thresholds.find(category);
                    if (it == thresholds.end()) throw InputError("no threshold for category");
                    const double z = it->second;
                    ProbForecastSet main_set, ref_set;
                    for (const Sample* s : subset) {
                        const int outcome = outcome_indicator(s->obs, z);
                        main_set.push_back({exceedance_probability(s->members[si], z), outcome});
                        ref_set.push_back({exceedance_probability(s->reference, z), outcome});
                    }
                    const std::string cat = to_string(category);
                    const double bs = brier_score(main_set);
                    add(cat, "BS", [&] { return bs; });
                    add(cat, "BSS", [&] { return brier_skill_score_from(bs, brier_score(ref_set)); });
                    if (!season) {
                        const auto curve = reliability_diagram(main_set, settings.reliability_bins);
                        for (const auto& b : curve.bins) report.reliability.push_back({name, lead, cat, b});
                    }
                }
            }
        }
    }

    std::sort(report.rows.begin(), report.rows.end(),
              [](const MetricRow& a, const MetricRow& b) { return a.key() < b.key(); });
    std::stable_sort(report.reliability.begin(), report.reliability.end(),
                     [](const ReliabilityRow& a, const ReliabilityRow& b) { return a.key() < b.key(); });
    return report;
}

}  // namespace enspost
