#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "enspost/errors.hpp"
#include "enspost/hydro_core.hpp"

namespace enspost {

/// rho_tau(u) = u * (tau - 1[u < 0])
inline double pinball(double tau, double u) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

inline double mean_pinball(double tau, std::span<const double> x, std::span<const double> e,
                           double intercept, double slope) {
    double s = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) s += pinball(tau, e[k] - intercept - slope * x[k]);
    return s / static_cast<double>(e.size());
}

/// tau_k = (k - 0.5) / n for k = 1..n.
inline std::vector<double> default_quantile_levels(std::size_t n = kNumMembers) {
    std::vector<double> levels(n);
    for (std::size_t k = 0; k < n; ++k) levels[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    return levels;
}

struct QuantileFitOptions {
    bool fit_slope = true;
    std::size_t max_iterations = 10000;
    double tolerance = 1e-10;
};

struct QuantileFit {
    double tau = 0.5;
    double intercept = 0.0;
    double slope = 0.0;
    /// Mean pinball loss in data units.
    double loss = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

/// Exact minimizer over the intercept of sum rho_tau(r - a): the
/// tau-quantile order statistic, or the midpoint of the flat optimum when
/// tau * n is an integer (so tau = 0.5 gives the usual median).
inline double pinball_intercept(std::vector<double>& r, double tau) {
    const std::size_t n = r.size();
    const double pos = tau * static_cast<double>(n);
    const double rounded = std::round(pos);
    if (std::abs(pos - rounded) < 1e-9 * static_cast<double>(n) && rounded >= 1.0 &&
        rounded < static_cast<double>(n)) {
        const auto k = static_cast<std::size_t>(rounded);
        std::nth_element(r.begin(), r.begin() + static_cast<long>(k - 1), r.end());
        const double lo = r[k - 1];
        const double hi = *std::min_element(r.begin() + static_cast<long>(k), r.end());
        return 0.5 * (lo + hi);
    }
    const auto k = static_cast<std::size_t>(std::min(std::ceil(pos), static_cast<double>(n)));
    const std::size_t idx = k == 0 ? 0 : k - 1;
    std::nth_element(r.begin(), r.begin() + static_cast<long>(idx), r.end());
    return r[idx];
}

}  // namespace detail

/// Linear quantile regression e ~ a + b x under pinball loss.
///
/// The data are min-max scaled; for any slope the optimal intercept is an
/// order statistic of the residuals, which leaves a convex one-dimensional
/// profile over the slope. That profile is minimized by bracketing and
/// golden-section search.
inline QuantileFit fit_quantile(std::span<const double> x, std::span<const double> e, double tau,
                                const QuantileFitOptions& options = {}) {
    if (!(tau > 0.0 && tau < 1.0)) throw InputError("quantile level must lie in (0,1)");
    if (x.size() != e.size() || e.empty()) throw InputError("fit_quantile: need equal, non-empty samples");
    const std::size_t n = e.size();
    QuantileFit fit;
    fit.tau = tau;

    const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
    const auto [elo, ehi] = std::minmax_element(e.begin(), e.end());
    const double xmin = *xlo, xrange = *xhi - *xlo;
    const double emin = *elo, erange = *ehi - *elo;

    std::vector<double> r(n);
    if (erange == 0.0) {
        fit.intercept = emin;
        fit.slope = 0.0;
        fit.loss = 0.0;
        return fit;
    }
    if (!options.fit_slope || xrange == 0.0) {
        r.assign(e.begin(), e.end());
        fit.intercept = detail::pinball_intercept(r, tau);
        fit.slope = 0.0;
        fit.loss = mean_pinball(tau, x, e, fit.intercept, fit.slope);
        return fit;
    }

    std::vector<double> xs(n), es(n);
    for (std::size_t k = 0; k < n; ++k) {
        xs[k] = (x[k] - xmin) / xrange;
        es[k] = (e[k] - emin) / erange;
    }
    auto profile = [&](double b, double* a_out = nullptr) {
        for (std::size_t k = 0; k < n; ++k) r[k] = es[k] - b * xs[k];
        const double a = detail::pinball_intercept(r, tau);
        if (a_out) *a_out = a;
        return mean_pinball(tau, xs, es, a, b);
    };

    std::size_t iters = 0;
    // Expand a bracket [lo, hi] around the minimizing slope.
    double lo = -1.0, hi = 1.0;
    const double f0 = profile(0.0);
    while (profile(lo) < f0 && lo > -1e8) { lo *= 2.0; ++iters; }
    while (profile(hi) < f0 && hi < 1e8) { hi *= 2.0; ++iters; }

    constexpr double inv_phi = 0.6180339887498949;
    double c = hi - inv_phi * (hi - lo);
    double d = lo + inv_phi * (hi - lo);
    double fc = profile(c), fd = profile(d);
    double prev = std::min(fc, fd);
    bool converged = false;
    while (iters < options.max_iterations) {
        ++iters;
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = profile(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = profile(d);
        }
        const double best = std::min(fc, fd);
        const double width = hi - lo;
        const double rel_change = std::abs(prev - best) / std::max(std::abs(best), 1e-300);
        prev = best;
        if (width < 1e-12 * std::max(1.0, std::abs(lo)) ||
            (rel_change < options.tolerance && width < 1e-9 * std::max(1.0, std::abs(lo)))) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw FitError("quantile regression (tau=" + std::to_string(tau) +
                       ") did not converge in " + std::to_string(options.max_iterations) +
                       " iterations; final bracket width " + std::to_string(hi - lo));
    }
    const double b_scaled = fc <= fd ? c : d;
    double a_scaled = 0.0;
    profile(b_scaled, &a_scaled);

    fit.slope = erange * b_scaled / xrange;
    fit.intercept = emin + erange * a_scaled - fit.slope * xmin;
    fit.loss = mean_pinball(tau, x, e, fit.intercept, fit.slope);
    fit.iterations = iters;
    return fit;
}

/// Per-lead quantile regressions of the ensemble-mean error on the ensemble
/// mean, one fit per quantile level.
struct QuantileRegressionModel {
    std::vector<double> levels;
    std::array<std::vector<QuantileFit>, kNumLeads> per_lead;

    bool has_lead(int lead) const {
        return lead >= kMinLead && lead <= kMaxLead &&
               per_lead[static_cast<std::size_t>(lead - 1)].size() == levels.size() && !levels.empty();
    }
    const std::vector<QuantileFit>& fits(int lead) const {
        if (!has_lead(lead)) throw ContractViolation("quantile model not fitted for lead " + std::to_string(lead));
        return per_lead[static_cast<std::size_t>(lead - 1)];
    }
};

inline constexpr std::size_t kMinQuantilePairs = 20;

inline QuantileRegressionModel fit_quantile_regression(const std::vector<PairSet>& pairs_per_lead,
                                                       std::vector<double> levels = default_quantile_levels(),
                                                       const QuantileFitOptions& options = {}) {
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (!(levels[k] > 0.0 && levels[k] < 1.0) || (k > 0 && levels[k] <= levels[k - 1])) {
            throw InputError("quantile levels must be strictly increasing inside (0,1)");
        }
    }
    QuantileRegressionModel model;
    model.levels = std::move(levels);
    for (const PairSet& ps : pairs_per_lead) {
        if (ps.size() < kMinQuantilePairs) {
            throw InputError("quantile regression for lead " + std::to_string(ps.lead) + " needs >= " +
                             std::to_string(kMinQuantilePairs) + " pairs, got " + std::to_string(ps.size()));
        }
        std::vector<double> x, e;
        x.reserve(ps.size());
        e.reserve(ps.size());
        for (const auto& p : ps.pairs) {
            const double m = ensemble_mean(p.ensemble);
            x.push_back(m);
            e.push_back(p.observation - m);
        }
        auto& fits = model.per_lead[static_cast<std::size_t>(ps.lead - 1)];
        fits.clear();
        for (const double tau : model.levels) fits.push_back(fit_quantile(x, e, tau, options));
    }
    return model;
}

/// Quantile members around one ensemble mean, floored at zero and sorted.
inline std::vector<double> quantile_members(const QuantileRegressionModel& model, int lead, double mean) {
    const auto& fits = model.fits(lead);
    std::vector<double> out;
    out.reserve(fits.size());
    for (const auto& f : fits) out.push_back(std::max(0.0, mean + f.intercept + f.slope * mean));
    std::sort(out.begin(), out.end());
    return out;
}

/// Rebuilds an 11-member archive from the raw ensemble means of every issue
/// and lead the model was fitted for.
inline ForecastArchive apply_quantile_regression(const QuantileRegressionModel& model,
                                                 const ForecastArchive& raw) {
    if (model.levels.size() != static_cast<std::size_t>(kNumMembers)) {
        throw ContractViolation("archive output needs exactly 11 quantile levels");
    }
    ForecastArchive out;
    for (const auto& [issue, block] : raw.blocks()) {
        out.block_for(issue);
        for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
            if (!model.has_lead(lead)) continue;
            const auto ens = raw.ensemble(issue, lead);
            if (!ens) continue;
            const auto members = quantile_members(model, lead, ensemble_mean(*ens));
            for (int m = 0; m < kNumMembers; ++m) out.set(issue, lead, m, members[static_cast<std::size_t>(m)]);
        }
    }
    return out;
}

/// Same as above for the issues behind a pair set.
inline ForecastArchive apply_quantile_regression(const QuantileRegressionModel& model, const PairSet& pairs) {
    ForecastArchive raw;
    for (const auto& p : pairs.pairs) {
        const Date issue = add_days(p.valid_date, -pairs.lead);
        for (int m = 0; m < kNumMembers; ++m) raw.set(issue, pairs.lead, m, p.ensemble[static_cast<std::size_t>(m)]);
    }
    return apply_quantile_regression(model, raw);
}

}  // namespace enspost
