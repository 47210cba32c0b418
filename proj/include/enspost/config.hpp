#pragma once

// Flat key=value experiment configuration. Every key is also accepted as a
// command-line flag of the same name (see tools/enspost_cli.cpp).

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "enspost/calendar.hpp"
#include "enspost/errors.hpp"
#include "enspost/lstm.hpp"
#include "enspost/synthetic.hpp"

namespace enspost {

enum class InputMode { Synthetic, Files };

struct ExperimentConfig {
    InputMode mode = InputMode::Synthetic;
    std::uint64_t seed = 42;
    CatchmentConfig catchment;

    // File mode inputs.
    std::string observations_path;
    std::string forecasts_path;
    bool forecasts_subdaily = false;
    std::string forcing_path;
    std::string forcing_forecast_path;

    // Empty means: synthetic split (first train_years / rest) or, in file
    // mode, required.
    std::optional<Date> train_start, train_end, verify_start, verify_end;

    nn::TrainConfig train;
    std::size_t reliability_bins = 10;
    int climatology_window_days = 15;
    std::size_t quantile_levels = kNumMembers;
    double low_moderate_level = 0.5;
    double high_level = 0.9;
    std::size_t threads = 1;
    std::string out = "enspost_run";

    DateRange train_range() const;
    DateRange verify_range() const;
    void validate() const;
};

namespace detail {

template <class T>
T parse_integer_value(const std::string& key, const std::string& v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw InputError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
}

inline double parse_double_value(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw InputError("config key '" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

inline bool parse_bool_value(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InputError("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::string show(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// One configuration key: how to set it from text and how to print it.
struct ConfigKey {
    std::string name;
    std::string help;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

inline const std::vector<ConfigKey>& config_keys() {
    using C = ExperimentConfig;
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        auto add_int = [&k](std::string name, std::string help, auto field) {
            k.push_back({name, std::move(help),
                         [field, name](C& c, const std::string& v) {
                             field(c) = detail::parse_integer_value<std::remove_reference_t<decltype(field(c))>>(name, v);
                         },
                         [field](const C& c) { return std::to_string(field(const_cast<C&>(c))); }});
        };
        auto add_double = [&k](std::string name, std::string help, auto field) {
            k.push_back({name, std::move(help),
                         [field, name](C& c, const std::string& v) { field(c) = detail::parse_double_value(name, v); },
                         [field](const C& c) { return detail::show(field(const_cast<C&>(c))); }});
        };
        auto add_string = [&k](std::string name, std::string help, auto field) {
            k.push_back({name, std::move(help), [field](C& c, const std::string& v) { field(c) = v; },
                         [field](const C& c) { return field(const_cast<C&>(c)); }});
        };
        auto add_date = [&k](std::string name, std::string help, auto field) {
            k.push_back({name, std::move(help),
                         [field](C& c, const std::string& v) {
                             if (v.empty()) {
                                 field(c).reset();
                             } else {
                                 field(c) = parse_iso_date(v);
                             }
                         },
                         [field](const C& c) {
                             const auto& d = field(const_cast<C&>(c));
                             return d ? to_iso(*d) : std::string();
                         }});
        };

        k.push_back({"mode", "synthetic or files",
                     [](C& c, const std::string& v) {
                         if (v == "synthetic") {
                             c.mode = InputMode::Synthetic;
                         } else if (v == "files") {
                             c.mode = InputMode::Files;
                         } else {
                             throw InputError("config key 'mode': expected synthetic or files, got '" + v + "'");
                         }
                     },
                     [](const C& c) { return std::string(c.mode == InputMode::Synthetic ? "synthetic" : "files"); }});
        add_int("seed", "base seed for every random stream", [](C& c) -> std::uint64_t& { return c.seed; });

        k.push_back({"start_date", "synthetic: first day",
                     [](C& c, const std::string& v) { c.catchment.start_date = parse_iso_date(v); },
                     [](const C& c) { return to_iso(c.catchment.start_date); }});
        add_int("years", "synthetic: length in years", [](C& c) -> int& { return c.catchment.years; });
        add_int("train_years", "synthetic: leading years used for training",
                [](C& c) -> int& { return c.catchment.train_years; });
        add_double("k_true", "synthetic: truth recession constant", [](C& c) -> double& { return c.catchment.k_true; });
        add_double("k_fc", "synthetic: forecast-model recession constant",
                   [](C& c) -> double& { return c.catchment.k_forecast; });
        add_double("wet_probability", "synthetic: wet-day probability",
                   [](C& c) -> double& { return c.catchment.wet_probability; });
        add_double("precip_mean", "synthetic: mean wet-day rainfall",
                   [](C& c) -> double& { return c.catchment.precip_mean; });
        add_double("precip_amplitude", "synthetic: seasonal rainfall amplitude",
                   [](C& c) -> double& { return c.catchment.precip_amplitude; });
        add_double("precip_phase_days", "synthetic: seasonal rainfall phase",
                   [](C& c) -> double& { return c.catchment.precip_phase_days; });
        add_double("sigma1", "synthetic: log forcing error at lead 1",
                   [](C& c) -> double& { return c.catchment.sigma1; });
        add_double("member_spread", "synthetic: member-specific share of the forcing-error variance",
                   [](C& c) -> double& { return c.catchment.member_spread; });
        add_double("temperature_mean", "synthetic: mean temperature",
                   [](C& c) -> double& { return c.catchment.temperature_mean; });
        add_double("temperature_amplitude", "synthetic: seasonal temperature amplitude",
                   [](C& c) -> double& { return c.catchment.temperature_amplitude; });
        add_double("temperature_noise", "synthetic: daily temperature noise",
                   [](C& c) -> double& { return c.catchment.temperature_noise; });
        add_double("initial_storage", "synthetic: initial storage (<0 for the mean storage)",
                   [](C& c) -> double& { return c.catchment.initial_storage; });

        add_string("observations", "files: observed flow CSV", [](C& c) -> std::string& { return c.observations_path; });
        add_string("forecasts", "files: raw ensemble forecast CSV", [](C& c) -> std::string& { return c.forecasts_path; });
        k.push_back({"forecasts_subdaily", "files: forecasts are 6-hourly",
                     [](C& c, const std::string& v) { c.forecasts_subdaily = detail::parse_bool_value("forecasts_subdaily", v); },
                     [](const C& c) { return std::string(c.forecasts_subdaily ? "true" : "false"); }});
        add_string("forcing", "files: observed forcing CSV", [](C& c) -> std::string& { return c.forcing_path; });
        add_string("forcing_forecast", "files: ensemble forcing forecast CSV",
                   [](C& c) -> std::string& { return c.forcing_forecast_path; });
        add_date("train_start", "first training day", [](C& c) -> std::optional<Date>& { return c.train_start; });
        add_date("train_end", "last training day", [](C& c) -> std::optional<Date>& { return c.train_end; });
        add_date("verify_start", "first verification day", [](C& c) -> std::optional<Date>& { return c.verify_start; });
        add_date("verify_end", "last verification day", [](C& c) -> std::optional<Date>& { return c.verify_end; });

        add_int("hidden_size", "LSTM hidden units", [](C& c) -> std::size_t& { return c.train.hidden_size; });
        add_int("lookback", "LSTM input window length", [](C& c) -> std::size_t& { return c.train.lookback; });
        add_int("batch_size", "minibatch size", [](C& c) -> std::size_t& { return c.train.batch_size; });
        add_int("epochs", "training epochs", [](C& c) -> std::size_t& { return c.train.epochs; });
        add_double("learning_rate", "Adam step size", [](C& c) -> double& { return c.train.learning_rate; });
        add_double("beta1", "Adam first-moment decay", [](C& c) -> double& { return c.train.beta1; });
        add_double("beta2", "Adam second-moment decay", [](C& c) -> double& { return c.train.beta2; });
        add_double("epsilon", "Adam epsilon", [](C& c) -> double& { return c.train.epsilon; });
        add_double("grad_clip_norm", "global gradient-norm clip", [](C& c) -> double& { return c.train.grad_clip_norm; });

        add_int("reliability_bins", "reliability diagram bins", [](C& c) -> std::size_t& { return c.reliability_bins; });
        add_int("window_days", "climatology half window (days)", [](C& c) -> int& { return c.climatology_window_days; });
        add_int("quantile_levels", "number of quantile-regression levels",
                [](C& c) -> std::size_t& { return c.quantile_levels; });
        add_double("low_moderate_level", "non-exceedance level of the low/moderate threshold",
                   [](C& c) -> double& { return c.low_moderate_level; });
        add_double("high_level", "non-exceedance level of the high-flow threshold",
                   [](C& c) -> double& { return c.high_level; });
        add_int("threads", "worker threads for residual training", [](C& c) -> std::size_t& { return c.threads; });
        add_string("out", "output directory", [](C& c) -> std::string& { return c.out; });
        return k;
    }();
    return keys;
}

inline const ConfigKey& config_key(const std::string& name) {
    for (const auto& k : config_keys()) {
        if (k.name == name) return k;
    }
    throw InputError("unknown config key '" + name + "'");
}

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
    const auto& k = config_key(key);
    try {
        k.set(c, value);
    } catch (const FormatError& e) {
        throw InputError("config key '" + key + "': " + e.what());
    }
}

/// `key = value` lines; `#` starts a comment.
inline void read_config(std::istream& in, ExperimentConfig& c, const std::string& source = "config") {
    std::string line;
    std::size_t no = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(source + ":" + std::to_string(no) + ": expected key = value");
        }
        try {
            set_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw FormatError(source + ":" + std::to_string(no) + ": " + e.what());
        }
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    ExperimentConfig c;
    read_config(in, c, path);
    return c;
}

inline void write_config(std::ostream& out, const ExperimentConfig& c) {
    for (const auto& k : config_keys()) out << k.name << " = " << k.get(c) << '\n';
}

inline DateRange ExperimentConfig::train_range() const {
    const DateRange fallback = catchment.train_range();
    if (mode == InputMode::Files && (!train_start || !train_end)) {
        throw InputError("file mode needs train_start and train_end");
    }
    return {train_start.value_or(fallback.first), train_end.value_or(fallback.last)};
}

inline DateRange ExperimentConfig::verify_range() const {
    const DateRange fallback = catchment.verify_range();
    if (mode == InputMode::Files && (!verify_start || !verify_end)) {
        throw InputError("file mode needs verify_start and verify_end");
    }
    return {verify_start.value_or(fallback.first), verify_end.value_or(fallback.last)};
}

inline void ExperimentConfig::validate() const {
    train.validate();
    if (mode == InputMode::Synthetic) catchment.validate();
    const DateRange tr = train_range(), vr = verify_range();
    if (tr.last < tr.first || vr.last < vr.first) throw InputError("empty training or verification range");
    if (tr.overlaps(vr)) throw InputError("training and verification ranges overlap");
    if (mode == InputMode::Files) {
        for (const auto& [key, path] : {std::pair{"observations", observations_path}, {"forecasts", forecasts_path},
                                        {"forcing", forcing_path}, {"forcing_forecast", forcing_forecast_path}}) {
            if (path.empty()) throw InputError(std::string("file mode needs '") + key + "'");
            if (!std::filesystem::exists(path)) throw InputError(std::string(key) + " file not found: " + path);
        }
    }
    if (reliability_bins == 0) throw InputError("reliability_bins must be >= 1");
    if (climatology_window_days < 0) throw InputError("window_days must be >= 0");
    if (quantile_levels != static_cast<std::size_t>(kNumMembers)) {
        throw InputError("quantile_levels must be 11 (one level per output member)");
    }
    if (!(low_moderate_level > 0.0 && low_moderate_level < 1.0) || !(high_level > 0.0 && high_level < 1.0)) {
        throw InputError("threshold levels must lie in (0,1)");
    }
    if (threads == 0) throw InputError("threads must be >= 1");
    if (out.empty()) throw InputError("output directory must be set");
}

}  // namespace enspost
