#pragma once

// Experiment orchestration: load or generate data, fit baselines and
// postprocessors, verify every system on a common sample and write reports.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "enspost/baselines.hpp"
#include "enspost/config.hpp"
#include "enspost/csv_io.hpp"
#include "enspost/errors.hpp"
#include "enspost/hydro_core.hpp"
#include "enspost/lstm.hpp"
#include "enspost/lstm_io.hpp"
#include "enspost/quantile_regression.hpp"
#include "enspost/random.hpp"
#include "enspost/residual_bank.hpp"
#include "enspost/synthetic.hpp"
#include "enspost/verification.hpp"

namespace enspost {

namespace fs = std::filesystem;

inline const std::vector<std::string>& system_names() {
    static const std::vector<std::string> names{
        "anomaly_persistence", "climatology",        "deterministic",      "lstm_postprocessed",
        "qr_postprocessed",    "raw_ensemble",       "simple_persistence", "standalone_lstm"};
    return names;
}
inline constexpr const char* kReferenceSystem = "climatology";

/// Progress messages go here; null silences them.
using Logger = std::function<void(const std::string&)>;

inline void log_line(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

template <class Fn>
auto run_stage(const std::string& name, const Logger& log, Fn&& fn) {
    log_line(log, "[" + name + "]");
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

struct ExperimentInputs {
    DailySeries obs;
    ForecastArchive raw;
    Forcing forcing;
    ForcingForecast forcing_forecast;
    DateRange train_range{};
    DateRange verify_range{};
    std::vector<Date> observation_gaps;
    /// Synthetic runs only.
    std::optional<MassBalance> mass_balance;
};

inline ExperimentInputs inputs_from_dataset(SyntheticDataset&& ds, const ExperimentConfig& config) {
    ExperimentInputs in;
    in.mass_balance = mass_balance(ds);
    in.obs = std::move(ds.flow);
    in.raw = std::move(ds.raw);
    in.forcing = std::move(ds.forcing);
    in.forcing_forecast = std::move(ds.forcing_forecast);
    in.train_range = config.train_range();
    in.verify_range = config.verify_range();
    return in;
}

inline CatchmentConfig catchment_for(const ExperimentConfig& config) {
    CatchmentConfig c = config.catchment;
    c.seed = derive_seed(config.seed, {0x63617463686d656eULL});
    return c;
}

inline ExperimentInputs load_inputs(const ExperimentConfig& config) {
    if (config.mode == InputMode::Synthetic) return inputs_from_dataset(generate(catchment_for(config)), config);
    ExperimentInputs in;
    auto obs = ingest_observations(config.observations_path);
    in.obs = std::move(obs.series);
    in.observation_gaps = std::move(obs.gaps);
    in.raw = ingest_forecasts(config.forecasts_path, config.forecasts_subdaily);
    {
        auto f = csv::open_input(config.forcing_path);
        in.forcing = read_forcing(f, config.forcing_path);
    }
    {
        auto f = csv::open_input(config.forcing_forecast_path);
        in.forcing_forecast = read_forcing_forecast(f, config.forcing_forecast_path);
    }
    in.train_range = config.train_range();
    in.verify_range = config.verify_range();
    return in;
}

struct TrainedModels {
    ResidualModelBank bank;
    nn::LstmModel standalone;
    std::vector<double> standalone_loss;
    std::size_t standalone_windows = 0;
    QuantileRegressionModel qr;
};

inline std::uint64_t standalone_seed(std::uint64_t base) { return derive_seed(base, {0x7374616e64ULL}); }

inline nn::TrainConfig train_config_for(const ExperimentConfig& config) {
    nn::TrainConfig t = config.train;
    t.seed = config.seed;
    return t;
}

inline nn::TrainResult train_standalone(const ExperimentInputs& in, const ExperimentConfig& config,
                                        std::size_t* windows = nullptr) {
    nn::TrainConfig t = train_config_for(config);
    t.seed = standalone_seed(config.seed);
    const auto data = standalone_training_set(in.forcing, in.obs, in.train_range, t.lookback);
    if (windows) *windows = data.size();
    if (data.size() < t.batch_size) {
        throw TrainingError("standalone model: only " + std::to_string(data.size()) + " usable windows");
    }
    return nn::train(data, t);
}

inline QuantileRegressionModel fit_qr(const ExperimentInputs& in, const ExperimentConfig& config) {
    std::vector<PairSet> pairs;
    for (int lead = kMinLead; lead <= kMaxLead; ++lead) pairs.push_back(align_pairs(in.raw, in.obs, lead, in.train_range));
    return fit_quantile_regression(pairs, default_quantile_levels(config.quantile_levels));
}

inline TrainedModels train_models(const ExperimentInputs& in, const ExperimentConfig& config, const Logger& log = {}) {
    TrainedModels m;
    run_stage("train_standalone", log, [&] {
        auto r = train_standalone(in, config, &m.standalone_windows);
        m.standalone = std::move(r.model);
        m.standalone_loss = std::move(r.loss_history);
        return 0;
    });
    m.bank = run_stage("train_residual_bank", log, [&] {
        return fit_residual_bank(in.raw, in.obs, in.train_range, train_config_for(config), config.threads);
    });
    m.qr = run_stage("fit_quantile_regression", log, [&] { return fit_qr(in, config); });
    return m;
}

struct SystemForecasts {
    ForecastArchive standalone;
    ForecastArchive lstm_postprocessed;
    ForecastArchive qr_postprocessed;
    ArchiveBuildStats standalone_stats;
    ArchiveBuildStats lstm_stats;
};

inline SystemForecasts postprocess(const ExperimentInputs& in, const TrainedModels& models,
                                   const ExperimentConfig& config, const Logger& log = {}) {
    SystemForecasts out;
    run_stage("forecast_standalone", log, [&] {
        auto s = standalone_lstm_forecast(models.standalone, in.forcing, in.forcing_forecast);
        out.standalone = std::move(s.archive);
        out.standalone_stats = s.stats;
        return 0;
    });
    run_stage("apply_residual_bank", log, [&] {
        auto p = apply_residual_bank(models.bank, in.raw, config.threads);
        out.lstm_postprocessed = std::move(p.archive);
        out.lstm_stats = p.stats;
        return 0;
    });
    out.qr_postprocessed =
        run_stage("apply_quantile_regression", log, [&] { return apply_quantile_regression(models.qr, in.raw); });
    return out;
}

inline CategoryThresholds thresholds_for(const DailySeries& training_obs, const ExperimentConfig& config) {
    return {{FlowCategory::LowModerate, flow_threshold(training_obs, config.low_moderate_level)},
            {FlowCategory::High, flow_threshold(training_obs, config.high_level)}};
}

inline VerificationReport verify_systems(const ExperimentInputs& in, const SystemForecasts& fc,
                                         const ExperimentConfig& config, CategoryThresholds* used = nullptr) {
    const DailySeries training_obs = in.obs.slice(in.train_range);
    const auto clim = build_climatology(training_obs, config.climatology_window_days);
    const auto thresholds = thresholds_for(training_obs, config);
    if (used) *used = thresholds;

    std::map<std::string, ForecastSystem> by_name;
    by_name.emplace("anomaly_persistence", anomaly_persistence_system("anomaly_persistence", in.obs, clim));
    by_name.emplace("climatology", climatology_system("climatology", clim));
    by_name.emplace("deterministic", member_system("deterministic", in.raw, 0));
    by_name.emplace("lstm_postprocessed", archive_system("lstm_postprocessed", fc.lstm_postprocessed));
    by_name.emplace("qr_postprocessed", archive_system("qr_postprocessed", fc.qr_postprocessed));
    by_name.emplace("raw_ensemble", archive_system("raw_ensemble", in.raw));
    by_name.emplace("simple_persistence", simple_persistence_system("simple_persistence", in.obs));
    by_name.emplace("standalone_lstm", archive_system("standalone_lstm", fc.standalone));
    std::vector<ForecastSystem> systems;
    for (const auto& name : system_names()) systems.push_back(by_name.at(name));

    VerificationSettings settings;
    settings.reliability_bins = config.reliability_bins;
    return conditional_verify(systems, by_name.at(kReferenceSystem), in.obs, thresholds, in.verify_range, settings);
}

// ---------------------------------------------------------------------------
// Report and model files

inline constexpr std::string_view kMetricsHeader = "system,lead,season,category,metric,value,n";
inline constexpr std::string_view kReliabilityHeader =
    "system,lead,category,bin_lo,bin_hi,fcst_prob_avg,obs_freq,count";

inline void write_metrics(std::ostream& out, const VerificationReport& report) {
    out << kMetricsHeader << '\n';
    for (const auto& r : report.rows) {
        out << r.system << ',' << r.lead << ',' << r.season << ',' << r.category << ',' << r.metric << ','
            << report_number(r.value) << ',' << r.n << '\n';
    }
}

inline void write_reliability(std::ostream& out, const VerificationReport& report) {
    out << kReliabilityHeader << '\n';
    for (const auto& r : report.reliability) {
        out << r.system << ',' << r.lead << ',' << r.category << ',' << report_number(r.bin.lo) << ','
            << report_number(r.bin.hi) << ',' << report_number(r.bin.fcst_prob_avg) << ','
            << report_number(r.bin.obs_freq) << ',' << r.bin.count << '\n';
    }
}

inline std::string residual_model_name(int lead, int member) {
    return "lstm_L" + std::to_string(lead) + "_M" + std::to_string(member);
}

inline void write_loss_history(std::ostream& out, const TrainedModels& m) {
    out << "model,epoch,loss\n";
    for (std::size_t e = 0; e < m.standalone_loss.size(); ++e) {
        out << "standalone_lstm," << e + 1 << ',' << report_number(m.standalone_loss[e]) << '\n';
    }
    for (const auto& s : m.bank.slices) {
        for (std::size_t e = 0; e < s.loss_history.size(); ++e) {
            out << residual_model_name(s.lead, s.member) << ',' << e + 1 << ',' << report_number(s.loss_history[e])
                << '\n';
        }
    }
}

inline void write_quantile_model(std::ostream& out, const QuantileRegressionModel& qr) {
    out << "lead,tau,intercept,slope,loss\n";
    for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
        if (!qr.has_lead(lead)) continue;
        for (const auto& f : qr.fits(lead)) {
            out << lead << ',' << data_number(f.tau) << ',' << data_number(f.intercept) << ','
                << data_number(f.slope) << ',' << data_number(f.loss) << '\n';
        }
    }
}

inline QuantileRegressionModel read_quantile_model(std::istream& in, const std::string& source = "quantile model") {
    csv::Reader reader(in, source, "lead,tau,intercept,slope,loss");
    std::vector<std::string_view> f;
    QuantileRegressionModel qr;
    std::map<double, int> seen_levels;
    while (reader.next(f)) {
        const long lead = reader.integer(f[0]);
        if (lead < kMinLead || lead > kMaxLead) reader.fail("lead outside 1..7");
        QuantileFit fit;
        fit.tau = reader.number(f[1]);
        fit.intercept = reader.number(f[2]);
        fit.slope = reader.number(f[3]);
        fit.loss = reader.number(f[4]);
        qr.per_lead[static_cast<std::size_t>(lead - 1)].push_back(fit);
        seen_levels.emplace(fit.tau, 0);
    }
    for (const auto& [tau, unused] : seen_levels) qr.levels.push_back(tau);
    for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
        const auto& fits = qr.per_lead[static_cast<std::size_t>(lead - 1)];
        if (fits.empty()) continue;
        if (fits.size() != qr.levels.size()) throw FormatError(source + ": lead " + std::to_string(lead) + " is incomplete");
        for (std::size_t k = 0; k < fits.size(); ++k) {
            if (fits[k].tau != qr.levels[k]) throw FormatError(source + ": levels out of order for lead " + std::to_string(lead));
        }
    }
    return qr;
}

inline constexpr std::string_view kManifestHeader = "file,kind,lead,member,seed,windows";

/// models/: one file per LSTM, the quantile fits, and a manifest.
inline void save_models(const fs::path& dir, const TrainedModels& m, std::uint64_t base_seed) {
    fs::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv");
    manifest << kManifestHeader << '\n';
    nn::save_model((dir / "standalone_lstm.txt").string(), m.standalone);
    manifest << "standalone_lstm.txt,standalone,0,0," << standalone_seed(base_seed) << ',' << m.standalone_windows << '\n';
    for (const auto& s : m.bank.slices) {
        const std::string file = residual_model_name(s.lead, s.member) + ".txt";
        nn::save_model((dir / file).string(), s.model);
        manifest << file << ",residual," << s.lead << ',' << s.member << ',' << s.seed << ',' << s.windows << '\n';
    }
    std::ofstream qr(dir / "quantile_regression.csv");
    write_quantile_model(qr, m.qr);
    if (!manifest || !qr) throw InputError("failed writing models to " + dir.string());
}

inline TrainedModels load_models(const fs::path& dir, const ExperimentConfig& config) {
    TrainedModels m;
    const std::string manifest_path = (dir / "manifest.csv").string();
    auto manifest = csv::open_input(manifest_path);
    csv::Reader reader(manifest, manifest_path, kManifestHeader);
    std::vector<std::string_view> f;
    m.bank.config = train_config_for(config);
    m.bank.train_range = config.train_range();
    m.bank.slices.resize(kResidualSlices);
    std::vector<bool> filled(kResidualSlices, false);
    bool have_standalone = false;
    while (reader.next(f)) {
        const std::string file((dir / std::string(f[0])).string());
        if (f[1] == "standalone") {
            m.standalone = nn::load_model(file);
            m.standalone_windows = static_cast<std::size_t>(reader.integer(f[5]));
            have_standalone = true;
        } else if (f[1] == "residual") {
            const long lead = reader.integer(f[2]), member = reader.integer(f[3]);
            if (lead < kMinLead || lead > kMaxLead || member < 0 || member >= kNumMembers) {
                reader.fail("bad lead/member");
            }
            const auto k = ResidualModelBank::index(static_cast<int>(lead), static_cast<int>(member));
            ResidualSlice& s = m.bank.slices[k];
            s.lead = static_cast<int>(lead);
            s.member = static_cast<int>(member);
            s.seed = static_cast<std::uint64_t>(std::stoull(std::string(f[4])));
            s.windows = static_cast<std::size_t>(reader.integer(f[5]));
            s.model = nn::load_model(file);
            filled[k] = true;
        } else {
            reader.fail("unknown model kind '" + std::string(f[1]) + "'");
        }
    }
    if (!have_standalone) throw FormatError(manifest_path + ": no standalone model");
    for (std::size_t k = 0; k < kResidualSlices; ++k) {
        if (!filled[k]) throw FormatError(manifest_path + ": missing residual model " + std::to_string(k));
    }
    const std::string qr_path = (dir / "quantile_regression.csv").string();
    auto qr = csv::open_input(qr_path);
    m.qr = read_quantile_model(qr, qr_path);
    return m;
}

inline void save_system_forecasts(const fs::path& dir, const SystemForecasts& fc) {
    fs::create_directories(dir);
    for (const auto& [name, archive] : {std::pair<const char*, const ForecastArchive*>{"standalone_lstm", &fc.standalone},
                                        {"lstm_postprocessed", &fc.lstm_postprocessed},
                                        {"qr_postprocessed", &fc.qr_postprocessed}}) {
        std::ofstream out(dir / (std::string(name) + ".csv"));
        write_forecasts(out, *archive);
        if (!out) throw InputError("failed writing " + (dir / name).string());
    }
}

inline SystemForecasts load_system_forecasts(const fs::path& dir) {
    SystemForecasts fc;
    fc.standalone = ingest_forecasts((dir / "standalone_lstm.csv").string());
    fc.lstm_postprocessed = ingest_forecasts((dir / "lstm_postprocessed.csv").string());
    fc.qr_postprocessed = ingest_forecasts((dir / "qr_postprocessed.csv").string());
    return fc;
}

/// Writes observations, raw forecasts and forcing of a dataset as CSVs.
inline void save_inputs(const fs::path& dir, const ExperimentInputs& in) {
    fs::create_directories(dir);
    std::ofstream obs(dir / "observations.csv"), fc(dir / "forecasts.csv"), forcing(dir / "forcing.csv"),
        ffc(dir / "forcing_forecast.csv");
    write_observations(obs, in.obs);
    write_forecasts(fc, in.raw);
    write_forcing(forcing, in.forcing);
    write_forcing_forecast(ffc, in.forcing_forecast);
    if (!obs || !fc || !forcing || !ffc) throw InputError("failed writing inputs to " + dir.string());
}

// ---------------------------------------------------------------------------
// Full run

struct RunSummary {
    fs::path out_dir;
    VerificationReport report;
    CategoryThresholds thresholds;
};

namespace detail {

inline bool is_previous_run(const fs::path& dir) { return fs::exists(dir / "run.txt"); }

inline void write_run_record(std::ostream& out, const ExperimentConfig& config, const ExperimentInputs& in,
                             const TrainedModels& models, const SystemForecasts& fc, const RunSummary& summary) {
    out << "# configuration\n";
    write_config(out, config);
    out << "# data\n";
    out << "train_range = " << to_iso(in.train_range.first) << ".." << to_iso(in.train_range.last) << '\n';
    out << "verify_range = " << to_iso(in.verify_range.first) << ".." << to_iso(in.verify_range.last) << '\n';
    out << "observed_days = " << in.obs.size() << '\n';
    out << "observation_gaps = " << in.observation_gaps.size() << '\n';
    out << "issue_dates = " << in.raw.issue_count() << '\n';
    if (in.mass_balance) out << "mass_balance_relative_error = " << report_number(in.mass_balance->relative_error()) << '\n';
    for (const auto& [cat, z] : summary.thresholds) {
        out << "threshold_" << to_string(cat) << " = " << report_number(z) << '\n';
    }
    out << "# models\n";
    out << "standalone_windows = " << models.standalone_windows << '\n';
    std::size_t wmin = SIZE_MAX, wmax = 0;
    for (const auto& s : models.bank.slices) {
        wmin = std::min(wmin, s.windows);
        wmax = std::max(wmax, s.windows);
    }
    out << "residual_windows_min = " << wmin << '\n';
    out << "residual_windows_max = " << wmax << '\n';
    out << "standalone_cells_skipped = " << fc.standalone_stats.skipped << '\n';
    out << "standalone_cells_floored = " << fc.standalone_stats.floored << '\n';
    out << "lstm_postprocessed_cells_skipped = " << fc.lstm_stats.skipped << '\n';
    out << "lstm_postprocessed_cells_floored = " << fc.lstm_stats.floored << '\n';
    out << "# verification\n";
    out << "systems = ";
    for (std::size_t k = 0; k < system_names().size(); ++k) out << (k ? " " : "") << system_names()[k];
    out << '\n';
    out << "reference = " << kReferenceSystem << '\n';
    out << "metric_rows = " << summary.report.rows.size() << '\n';
    out << "warnings = " << summary.report.warnings.size() << '\n';
    for (const auto& w : summary.report.warnings) out << "warning = " << w << '\n';
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    fn(out);
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace detail

/// generate/ingest -> train -> postprocess -> verify -> report. Everything is
/// written to `<out>.partial` and renamed to `<out>` at the end; on failure
/// the staging directory is removed, so `<out>` is complete or untouched.
inline RunSummary run_experiment(const ExperimentConfig& config, const Logger& log = {}) {
    run_stage("configure", log, [&] {
        config.validate();
        return 0;
    });
    const fs::path out_dir = fs::absolute(config.out).lexically_normal();
    const fs::path staging = out_dir.string() + ".partial";
    if (fs::exists(out_dir) && !detail::is_previous_run(out_dir) && !fs::is_empty(out_dir)) {
        throw StageError("configure", "output directory " + out_dir.string() + " exists and is not a previous run");
    }
    fs::remove_all(staging);
    fs::create_directories(staging);

    RunSummary summary;
    summary.out_dir = out_dir;
    try {
        const ExperimentInputs in = run_stage("load_inputs", log, [&] { return load_inputs(config); });
        const TrainedModels models = train_models(in, config, log);
        const SystemForecasts fc = postprocess(in, models, config, log);
        summary.report = run_stage("verify", log, [&] { return verify_systems(in, fc, config, &summary.thresholds); });
        run_stage("write_outputs", log, [&] {
            detail::write_file(staging / "metrics.csv", [&](std::ostream& o) { write_metrics(o, summary.report); });
            detail::write_file(staging / "reliability.csv",
                               [&](std::ostream& o) { write_reliability(o, summary.report); });
            detail::write_file(staging / "loss_history.csv", [&](std::ostream& o) { write_loss_history(o, models); });
            save_models(staging / "models", models, config.seed);
            detail::write_file(staging / "run.txt", [&](std::ostream& o) {
                detail::write_run_record(o, config, in, models, fc, summary);
            });
            if (fs::exists(out_dir)) fs::remove_all(out_dir);
            fs::rename(staging, out_dir);
            return 0;
        });
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
    for (const auto& w : summary.report.warnings) log_line(log, "warning: " + w);
    return summary;
}

}  // namespace enspost
