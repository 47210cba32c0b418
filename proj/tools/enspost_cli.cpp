// enspost: synthetic data, training, postprocessing and verification of
// ensemble streamflow forecasts.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "enspost/experiment.hpp"

namespace fs = std::filesystem;
using namespace enspost;

namespace {

struct Options {
    std::string config_path;
    std::map<std::string, std::string> overrides;
};

ExperimentConfig resolve_config(const Options& opts) {
    ExperimentConfig config = opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
    for (const auto& [key, value] : opts.overrides) set_config_value(config, key, value);
    return config;
}

void stderr_log(const std::string& msg) { std::cerr << msg << std::endl; }

int cmd_synth(const ExperimentConfig& config) {
    config.catchment.validate();
    const auto catchment = catchment_for(config);
    auto ds = generate(catchment);
    const auto audit = ensemble_spread_audit(ds);
    const auto mb = mass_balance(ds);
    const fs::path dir = config.out;
    ExperimentConfig record = config;
    record.mode = InputMode::Synthetic;
    const auto in = inputs_from_dataset(std::move(ds), config);
    save_inputs(dir, in);
    {
        std::ofstream out(dir / "catchment.txt");
        write_config(out, record);
        out << "catchment_seed = " << catchment.seed << '\n';
        out << "mass_balance_relative_error = " << report_number(mb.relative_error()) << '\n';
    }
    std::printf("wrote %s (%zu days, %zu issue dates)\n", dir.string().c_str(), in.obs.size(),
                in.raw.issue_count());
    std::printf("mass balance relative error %.3g\n", mb.relative_error());
    std::printf("lead  control_rmse  ensemble_std  log_ratio_bias  samples\n");
    for (const auto& l : audit) {
        std::printf("%4d  %12.6f  %12.6f  %14.6f  %7zu\n", l.lead, l.control_rmse, l.ensemble_std, l.log_ratio_bias,
                    l.log_ratio_samples);
    }
    return 0;
}

int cmd_train(const ExperimentConfig& config) {
    config.validate();
    const auto in = run_stage("load_inputs", stderr_log, [&] { return load_inputs(config); });
    const auto models = train_models(in, config, stderr_log);
    const fs::path dir = config.out;
    save_models(dir / "models", models, config.seed);
    std::ofstream loss(dir / "loss_history.csv");
    write_loss_history(loss, models);
    std::printf("wrote %s\n", (dir / "models").string().c_str());
    return 0;
}

int cmd_postprocess(const ExperimentConfig& config, const std::string& models_dir) {
    config.validate();
    const fs::path dir = config.out;
    const auto in = run_stage("load_inputs", stderr_log, [&] { return load_inputs(config); });
    const auto models = run_stage("load_models", stderr_log, [&] {
        return load_models(models_dir.empty() ? dir / "models" : fs::path(models_dir), config);
    });
    const auto fc = postprocess(in, models, config, stderr_log);
    save_system_forecasts(dir / "forecasts", fc);
    std::printf("wrote %s\n", (dir / "forecasts").string().c_str());
    return 0;
}

int cmd_verify(const ExperimentConfig& config, const std::string& forecasts_dir) {
    config.validate();
    const fs::path dir = config.out;
    const auto in = run_stage("load_inputs", stderr_log, [&] { return load_inputs(config); });
    const auto fc = run_stage("load_forecasts", stderr_log, [&] {
        return load_system_forecasts(forecasts_dir.empty() ? dir / "forecasts" : fs::path(forecasts_dir));
    });
    const auto report = run_stage("verify", stderr_log, [&] { return verify_systems(in, fc, config); });
    fs::create_directories(dir);
    std::ofstream metrics(dir / "metrics.csv"), reliability(dir / "reliability.csv");
    write_metrics(metrics, report);
    write_reliability(reliability, report);
    for (const auto& w : report.warnings) stderr_log("warning: " + w);
    std::printf("wrote %s and %s\n", (dir / "metrics.csv").string().c_str(),
                (dir / "reliability.csv").string().c_str());
    return 0;
}

int cmd_run(const ExperimentConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto summary = run_experiment(config, stderr_log);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("wrote %s in %.1f s\n", summary.out_dir.string().c_str(), secs);
    std::printf("lead  raw_NSE     lstm_NSE    qr_NSE\n");
    for (int lead = kMinLead; lead <= kMaxLead; ++lead) {
        auto v = [&](const char* sys) { return summary.report.value(sys, lead, kAll, kAll, "NSE").value_or(kMissing); };
        std::printf("%4d  %-10.4f  %-10.4f  %-10.4f\n", lead, v("raw_ensemble"), v("lstm_postprocessed"),
                    v("qr_postprocessed"));
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t first_seed, int seeds, double tolerance) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::printf("seed  D  H  T  max_rel_error");
    for (const char* name : nn::kTensorNames) std::printf("  %s", name);
    std::printf("\n");
    for (int k = 0; k < seeds; ++k) {
        const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(k);
        const auto r = nn::gradient_check(seed);
        worst = std::max(worst, r.max_relative_error);
        std::printf("%4llu  %zu  %zu  %zu  %.3e", static_cast<unsigned long long>(seed), r.input_size, r.hidden_size,
                    r.steps, r.max_relative_error);
        for (const double e : r.tensor_max_relative_error) std::printf("  %.3e", e);
        std::printf("\n");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = worst < tolerance;
    std::printf("%s: max relative error %.3e (tolerance %.1e) over %d seeds in %.2f s\n", ok ? "PASS" : "FAIL", worst,
                tolerance, seeds, secs);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble streamflow postprocessing and verification"};
    app.require_subcommand(1);
    app.fallthrough();

    Options opts;
    app.add_option("--config", opts.config_path, "key = value configuration file")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
        app.add_option_function<std::string>(
            "--" + key.name, [&opts, name = key.name](const std::string& v) { opts.overrides[name] = v; }, key.help)
            ->type_name("VALUE");
    }

    auto* synth = app.add_subcommand("synth", "generate a synthetic catchment and write its CSVs to --out");
    auto* train = app.add_subcommand("train", "train the standalone, residual and quantile models");
    auto* post = app.add_subcommand("postprocess", "apply trained models to the raw archive");
    std::string models_dir;
    post->add_option("--models", models_dir, "model directory (default <out>/models)");
    auto* verify = app.add_subcommand("verify", "verify all systems and write metrics.csv / reliability.csv");
    std::string forecasts_dir;
    verify->add_option("--forecasts", forecasts_dir, "postprocessed archives (default <out>/forecasts)");
    auto* run = app.add_subcommand("run", "full experiment into --out");
    auto* grad = app.add_subcommand("gradcheck", "compare BPTT gradients with finite differences");
    int seeds = 10;
    double tolerance = 1e-5;
    grad->add_option("--seeds", seeds, "number of random instances")->check(CLI::PositiveNumber);
    grad->add_option("--tolerance", tolerance, "maximum relative error");

    CLI11_PARSE(app, argc, argv);

    try {
        const ExperimentConfig config = resolve_config(opts);
        if (*synth) return cmd_synth(config);
        if (*train) return cmd_train(config);
        if (*post) return cmd_postprocess(config, models_dir);
        if (*verify) return cmd_verify(config, forecasts_dir);
        if (*run) return cmd_run(config);
        if (*grad) return cmd_gradcheck(config.seed, seeds, tolerance);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
    return 0;
}
