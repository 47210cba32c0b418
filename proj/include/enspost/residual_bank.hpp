#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "enspost/baselines.hpp"
#include "enspost/errors.hpp"
#include "enspost/hydro_core.hpp"
#include "enspost/lstm.hpp"
#include "enspost/parallel.hpp"
#include "enspost/random.hpp"

namespace enspost {

inline constexpr std::size_t kResidualSlices = kNumLeads * kNumMembers;

/// One residual model, trained on a single (lead, member) slice.
struct ResidualSlice {
    int lead = kMinLead;
    int member = 0;
    std::uint64_t seed = 0;
    std::size_t windows = 0;
    nn::LstmModel model;
    std::vector<double> loss_history;
};

/// 7 leads x 11 members of residual models. Slice (lead, member) lives at
/// index (lead - 1) * 11 + member.
struct ResidualModelBank {
    nn::TrainConfig config;
    DateRange train_range{};
    std::vector<ResidualSlice> slices;

    static std::size_t index(int lead, int member) {
        return static_cast<std::size_t>((lead - 1) * kNumMembers + member);
    }

    bool complete() const { return slices.size() == kResidualSlices; }

    const ResidualSlice& slice(int lead, int member) const {
        ForecastArchive::check_coordinates(lead, member);
        if (!complete()) throw ContractViolation("residual bank is not fully trained");
        return slices[index(lead, member)];
    }
};

inline std::uint64_t slice_seed(std::uint64_t base_seed, int lead, int member) {
    return derive_seed(base_seed, {static_cast<std::uint64_t>(lead), static_cast<std::uint64_t>(member)});
}

/// Fills `window` with the member's raw forecasts at `lead` for the
/// `window.size()` consecutive issue dates ending at `issue`. Returns false
/// if any of them is missing.
inline bool raw_forecast_window(const ForecastArchive& archive, Date issue, int lead, int member,
                                std::span<double> window) {
    const long L = static_cast<long>(window.size());
    for (long s = 0; s < L; ++s) {
        const double v = archive.value_or_missing(add_days(issue, s - L + 1), lead, member);
        if (is_missing(v)) return false;
        window[static_cast<std::size_t>(s)] = v;
    }
    return true;
}

/// Training windows for one slice: raw forecasts of the last `lookback`
/// issues, target = obs(valid) - raw(valid) for valid dates in `train_range`.
inline nn::TrainingSet residual_training_set(const ForecastArchive& archive, const DailySeries& obs,
                                             DateRange train_range, int lead, int member,
                                             std::size_t lookback) {
    nn::TrainingSet set(lookback, 1);
    std::vector<double> window(lookback);
    for (const Date issue : archive.issue_dates()) {
        const Date valid = add_days(issue, lead);
        if (!train_range.contains(valid) || !obs.has(valid)) continue;
        if (!raw_forecast_window(archive, issue, lead, member, window)) continue;
        set.add(window, obs.at(valid) - window.back());
    }
    return set;
}

/// Trains one residual LSTM per (lead, member). Each slice gets its own seed
/// derived from (config.seed, lead, member), so the result does not depend
/// on `threads`.
inline ResidualModelBank fit_residual_bank(const ForecastArchive& archive, const DailySeries& obs,
                                           DateRange train_range, const nn::TrainConfig& config,
                                           std::size_t threads = 1) {
    config.validate();
    ResidualModelBank bank;
    bank.config = config;
    bank.train_range = train_range;
    bank.slices.resize(kResidualSlices);
    parallel_for(kResidualSlices, threads, [&](std::size_t k) {
        const int lead = static_cast<int>(k / kNumMembers) + 1;
        const int member = static_cast<int>(k % kNumMembers);
        const auto data =
            residual_training_set(archive, obs, train_range, lead, member, config.lookback);
        const std::string name = "slice lead " + std::to_string(lead) + " member " + std::to_string(member);
        if (data.size() < config.batch_size) {
            throw TrainingError(name + ": only " + std::to_string(data.size()) +
                                " usable windows, need at least batch_size = " +
                                std::to_string(config.batch_size));
        }
        nn::TrainConfig slice_config = config;
        slice_config.seed = slice_seed(config.seed, lead, member);
        nn::TrainResult trained;
        try {
            trained = nn::train(data, slice_config);
        } catch (const TrainingError& e) {
            throw TrainingError(name + ": " + e.what());
        }
        ResidualSlice& s = bank.slices[k];
        s.lead = lead;
        s.member = member;
        s.seed = slice_config.seed;
        s.windows = data.size();
        s.model = std::move(trained.model);
        s.loss_history = std::move(trained.loss_history);
    });
    return bank;
}

struct PostprocessedArchive {
    ForecastArchive archive;
    ArchiveBuildStats stats;
};

/// raw + predicted residual, floored at zero. Cells without a full window of
/// raw history are left missing and counted.
inline PostprocessedArchive apply_residual_bank(const ResidualModelBank& bank,
                                                const ForecastArchive& archive,
                                                std::size_t threads = 1) {
    if (!bank.complete()) throw ContractViolation("apply_residual_bank: bank is not fully trained");
    const std::vector<Date> issues = archive.issue_dates();
    std::vector<std::vector<double>> results(kResidualSlices);
    parallel_for(kResidualSlices, threads, [&](std::size_t k) {
        const ResidualSlice& s = bank.slices[k];
        std::vector<double> window(s.model.lookback);
        nn::SequenceCache cache;
        auto& out = results[k];
        out.assign(issues.size(), kMissing);
        for (std::size_t i = 0; i < issues.size(); ++i) {
            if (!raw_forecast_window(archive, issues[i], s.lead, s.member, window)) continue;
            out[i] = window.back() + s.model.predict(window, cache);
        }
    });

    PostprocessedArchive post;
    for (std::size_t i = 0; i < issues.size(); ++i) post.archive.block_for(issues[i]);
    for (std::size_t k = 0; k < kResidualSlices; ++k) {
        const ResidualSlice& s = bank.slices[k];
        for (std::size_t i = 0; i < issues.size(); ++i) {
            double v = results[k][i];
            if (is_missing(v)) {
                ++post.stats.skipped;
                continue;
            }
            if (v < 0.0) {
                v = 0.0;
                ++post.stats.floored;
            }
            post.archive.set(issues[i], s.lead, s.member, v);
        }
    }
    return post;
}

}  // namespace enspost
