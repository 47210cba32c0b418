#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "enspost/errors.hpp"

namespace enspost::nn {

/// Gate order inside the fused pre-activation vector.
enum class Gate : std::size_t { Forget = 0, Cell = 1, Input = 2, Output = 3 };

inline constexpr std::array<Gate, 4> kGates = {Gate::Forget, Gate::Cell, Gate::Input, Gate::Output};
inline constexpr std::array<const char*, 4> kGateSuffix = {"f", "g", "i", "o"};

/// Weights of a single-layer LSTM with a scalar linear readout.
///
/// The four gates share fused storage: the input weights are laid out as
/// D blocks of 4H (block j holds the column of every gate matrix W_* that
/// multiplies x_j), the recurrent weights as H blocks of 4H. Within a block
/// the rows run forget, cell candidate, input, output. Use W()/U()/b() for
/// per-gate access.
struct LstmParams {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    std::vector<double> input_weights;
    std::vector<double> recurrent_weights;
    std::vector<double> bias;
    std::vector<double> readout_weights;
    double readout_bias = 0.0;

    LstmParams() = default;

    LstmParams(std::size_t inputs, std::size_t hidden)
        : input_size(inputs),
          hidden_size(hidden),
          input_weights(inputs * 4 * hidden, 0.0),
          recurrent_weights(hidden * 4 * hidden, 0.0),
          bias(4 * hidden, 0.0),
          readout_weights(hidden, 0.0) {
        if (inputs == 0 || hidden == 0) throw ContractViolation("LSTM dimensions must be positive");
    }

    std::size_t gate_rows() const { return 4 * hidden_size; }

    double& W(Gate g, std::size_t row, std::size_t col) {
        return input_weights[col * gate_rows() + static_cast<std::size_t>(g) * hidden_size + row];
    }
    double W(Gate g, std::size_t row, std::size_t col) const {
        return input_weights[col * gate_rows() + static_cast<std::size_t>(g) * hidden_size + row];
    }
    double& U(Gate g, std::size_t row, std::size_t col) {
        return recurrent_weights[col * gate_rows() + static_cast<std::size_t>(g) * hidden_size + row];
    }
    double U(Gate g, std::size_t row, std::size_t col) const {
        return recurrent_weights[col * gate_rows() + static_cast<std::size_t>(g) * hidden_size + row];
    }
    double& b(Gate g, std::size_t row) { return bias[static_cast<std::size_t>(g) * hidden_size + row]; }
    double b(Gate g, std::size_t row) const {
        return bias[static_cast<std::size_t>(g) * hidden_size + row];
    }

    /// Every trainable tensor as a flat span, in a fixed order.
    std::array<std::span<double>, 5> tensors() {
        return {std::span<double>(input_weights), std::span<double>(recurrent_weights),
                std::span<double>(bias), std::span<double>(readout_weights),
                std::span<double>(&readout_bias, 1)};
    }
    std::array<std::span<const double>, 5> tensors() const {
        return {std::span<const double>(input_weights), std::span<const double>(recurrent_weights),
                std::span<const double>(bias), std::span<const double>(readout_weights),
                std::span<const double>(&readout_bias, 1)};
    }

    std::size_t parameter_count() const {
        return input_weights.size() + recurrent_weights.size() + bias.size() +
               readout_weights.size() + 1;
    }

    bool same_shape(const LstmParams& o) const {
        return input_size == o.input_size && hidden_size == o.hidden_size;
    }

    bool operator==(const LstmParams& o) const = default;
};

inline constexpr std::array<const char*, 5> kTensorNames = {"input_weights", "recurrent_weights",
                                                            "bias", "readout_weights",
                                                            "readout_bias"};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;

    static LstmState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0),
                                                         std::vector<double>(hidden, 0.0)}; }
};

/// Activations of one cell step, kept for the backward pass.
struct StepCache {
    std::vector<double> x;
    std::vector<double> h_prev;
    std::vector<double> c_prev;
    std::vector<double> forget;
    std::vector<double> candidate;
    std::vector<double> input;
    std::vector<double> output;
    std::vector<double> tanh_c;
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace detail {

inline void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) y[k] += a * x[k];
}

// Four partial sums, fixed order: deterministic and friendlier to the
// vectorizer than a single running sum.
inline double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for (; k < n; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
}

// One forward step. `gates` receives the activated f, g~, i, o (4H);
// `z` is 4H scratch.
inline void cell_step(const LstmParams& p, const double* x, const double* h_prev,
                      const double* c_prev, double* z, double* gates, double* c, double* tanh_c,
                      double* h) {
    const std::size_t H = p.hidden_size;
    const std::size_t G = 4 * H;
    std::copy(p.bias.begin(), p.bias.end(), z);
    for (std::size_t j = 0; j < p.input_size; ++j) axpy(x[j], &p.input_weights[j * G], z, G);
    for (std::size_t j = 0; j < H; ++j) axpy(h_prev[j], &p.recurrent_weights[j * G], z, G);
    for (std::size_t r = 0; r < H; ++r) {
        const double f = sigmoid(z[r]);
        const double g = std::tanh(z[H + r]);
        const double i = sigmoid(z[2 * H + r]);
        const double o = sigmoid(z[3 * H + r]);
        gates[r] = f;
        gates[H + r] = g;
        gates[2 * H + r] = i;
        gates[3 * H + r] = o;
        c[r] = f * c_prev[r] + i * g;
        tanh_c[r] = std::tanh(c[r]);
        h[r] = o * tanh_c[r];
    }
}

}  // namespace detail

/// f, i, o = sigmoid(W x + U h + b); g~ = tanh(W_g x + U_g h + b_g);
/// c = f*c_prev + i*g~; h = o*tanh(c).
inline std::pair<LstmState, StepCache> lstm_cell_forward(std::span<const double> x,
                                                         const LstmState& state,
                                                         const LstmParams& params) {
    const std::size_t H = params.hidden_size;
    if (x.size() != params.input_size || state.h.size() != H || state.c.size() != H) {
        throw ContractViolation("lstm_cell_forward: input or state shape does not match params");
    }
    std::vector<double> z(4 * H), gates(4 * H);
    LstmState next = LstmState::zeros(H);
    StepCache cache;
    cache.tanh_c.resize(H);
    detail::cell_step(params, x.data(), state.h.data(), state.c.data(), z.data(), gates.data(),
                      next.c.data(), cache.tanh_c.data(), next.h.data());
    cache.x.assign(x.begin(), x.end());
    cache.h_prev = state.h;
    cache.c_prev = state.c;
    cache.forget.assign(gates.begin(), gates.begin() + static_cast<long>(H));
    cache.candidate.assign(gates.begin() + static_cast<long>(H), gates.begin() + static_cast<long>(2 * H));
    cache.input.assign(gates.begin() + static_cast<long>(2 * H), gates.begin() + static_cast<long>(3 * H));
    cache.output.assign(gates.begin() + static_cast<long>(3 * H), gates.end());
    return {std::move(next), std::move(cache)};
}

/// Everything the backward pass needs from one unrolled sequence. Reusable
/// across calls to avoid reallocations in the training loop.
struct SequenceCache {
    std::size_t steps = 0;
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    std::vector<double> x;       // steps * D
    std::vector<double> h;       // (steps + 1) * H, slot 0 is the zero initial state
    std::vector<double> c;       // (steps + 1) * H
    std::vector<double> gates;   // steps * 4H, activated
    std::vector<double> tanh_c;  // steps * H
    double prediction = 0.0;

    // backward scratch
    std::vector<double> z, dz, dh, dc, dh_prev;

    void reshape(std::size_t T, std::size_t D, std::size_t H) {
        steps = T;
        input_size = D;
        hidden_size = H;
        x.resize(T * D);
        h.assign((T + 1) * H, 0.0);
        c.assign((T + 1) * H, 0.0);
        gates.resize(T * 4 * H);
        tanh_c.resize(T * H);
        z.resize(4 * H);
        dz.resize(4 * H);
        dh.resize(H);
        dc.resize(H);
        dh_prev.resize(H);
    }
};

/// Runs the cell over a time-major window (steps x D, flattened) from a zero
/// state and returns W_d . h_T + b_d.
inline double forward_sequence(std::span<const double> window, const LstmParams& params,
                               SequenceCache& cache) {
    const std::size_t D = params.input_size;
    const std::size_t H = params.hidden_size;
    if (window.empty()) throw InputError("forward_sequence: empty input sequence");
    if (window.size() % D != 0) {
        throw ContractViolation("forward_sequence: window length is not a multiple of the feature count");
    }
    const std::size_t T = window.size() / D;
    cache.reshape(T, D, H);
    std::copy(window.begin(), window.end(), cache.x.begin());
    for (std::size_t t = 0; t < T; ++t) {
        detail::cell_step(params, &cache.x[t * D], &cache.h[t * H], &cache.c[t * H], cache.z.data(),
                          &cache.gates[t * 4 * H], &cache.c[(t + 1) * H], &cache.tanh_c[t * H],
                          &cache.h[(t + 1) * H]);
    }
    cache.prediction =
        detail::dot(params.readout_weights.data(), &cache.h[T * H], H) + params.readout_bias;
    return cache.prediction;
}

inline std::pair<double, SequenceCache> forward_sequence(std::span<const double> window,
                                                         const LstmParams& params) {
    SequenceCache cache;
    const double y = forward_sequence(window, params, cache);
    return {y, std::move(cache)};
}

/// Backpropagation through time: adds d_prediction * d(prediction)/d(theta)
/// into `grads` for every parameter.
inline void accumulate_gradients(SequenceCache& cache, double d_prediction,
                                 const LstmParams& params, LstmParams& grads) {
    const std::size_t D = params.input_size;
    const std::size_t H = params.hidden_size;
    const std::size_t G = 4 * H;
    if (cache.input_size != D || cache.hidden_size != H || !grads.same_shape(params) ||
        cache.steps == 0) {
        throw ContractViolation("backward_sequence: cache, params and gradients disagree in shape");
    }
    const std::size_t T = cache.steps;

    grads.readout_bias += d_prediction;
    const double* h_last = &cache.h[T * H];
    for (std::size_t r = 0; r < H; ++r) {
        grads.readout_weights[r] += d_prediction * h_last[r];
        cache.dh[r] = d_prediction * params.readout_weights[r];
        cache.dc[r] = 0.0;
    }

    for (std::size_t t = T; t-- > 0;) {
        const double* gates = &cache.gates[t * G];
        const double* tc = &cache.tanh_c[t * H];
        const double* c_prev = &cache.c[t * H];
        const double* h_prev = &cache.h[t * H];
        const double* x = &cache.x[t * D];
        double* dz = cache.dz.data();
        for (std::size_t r = 0; r < H; ++r) {
            const double f = gates[r], g = gates[H + r], i = gates[2 * H + r], o = gates[3 * H + r];
            const double dh = cache.dh[r];
            const double dc = cache.dc[r] + dh * o * (1.0 - tc[r] * tc[r]);
            dz[r] = dc * c_prev[r] * f * (1.0 - f);
            dz[H + r] = dc * i * (1.0 - g * g);
            dz[2 * H + r] = dc * g * i * (1.0 - i);
            dz[3 * H + r] = dh * tc[r] * o * (1.0 - o);
            cache.dc[r] = dc * f;
        }
        detail::axpy(1.0, dz, grads.bias.data(), G);
        for (std::size_t j = 0; j < D; ++j) detail::axpy(x[j], dz, &grads.input_weights[j * G], G);
        for (std::size_t j = 0; j < H; ++j) {
            detail::axpy(h_prev[j], dz, &grads.recurrent_weights[j * G], G);
            cache.dh_prev[j] = detail::dot(&params.recurrent_weights[j * G], dz, G);
        }
        std::swap(cache.dh, cache.dh_prev);
    }
}

/// Gradient of the prediction, scaled by the upstream `d_prediction`.
inline LstmParams backward_sequence(SequenceCache& cache, double d_prediction,
                                    const LstmParams& params) {
    LstmParams grads(params.input_size, params.hidden_size);
    accumulate_gradients(cache, d_prediction, params, grads);
    return grads;
}

// ---------------------------------------------------------------------------
// Scaling

enum class ScaleDirection { Forward, Inverse };

/// Per-feature min/max fitted on training data only.
struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;

    std::size_t features() const { return min.size(); }

    double forward(std::size_t feature, double x) const {
        const double lo = min[feature], hi = max[feature];
        if (hi == lo) return 0.0;
        return (x - lo) / (hi - lo);
    }

    double inverse(std::size_t feature, double u) const {
        const double lo = min[feature], hi = max[feature];
        if (hi == lo) return lo;
        return lo + u * (hi - lo);
    }

    bool operator==(const ScalerParams&) const = default;
};

inline ScalerParams scaler_fit(const std::vector<std::vector<double>>& per_feature) {
    ScalerParams s;
    for (std::size_t f = 0; f < per_feature.size(); ++f) {
        const auto& v = per_feature[f];
        if (v.empty()) throw InputError("scaler_fit: feature " + std::to_string(f) + " has no values");
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        s.min.push_back(*lo);
        s.max.push_back(*hi);
    }
    return s;
}

/// Out-of-range values are not clamped.
inline double scaler_map(const ScalerParams& s, std::size_t feature, double value,
                         ScaleDirection direction) {
    return direction == ScaleDirection::Forward ? s.forward(feature, value)
                                                : s.inverse(feature, value);
}

// ---------------------------------------------------------------------------
// Optimization

struct TrainConfig {
    std::size_t hidden_size = 20;
    std::size_t lookback = 30;
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip_norm = 1.0;
    std::uint64_t seed = 42;

    void validate() const {
        if (hidden_size == 0 || lookback == 0 || batch_size == 0) {
            throw InputError("hidden_size, lookback and batch_size must be positive");
        }
        if (!(learning_rate >= 0.0) || !(epsilon > 0.0) || !(grad_clip_norm > 0.0)) {
            throw InputError("learning_rate must be >= 0; epsilon and grad_clip_norm > 0");
        }
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
            throw InputError("Adam betas must lie in (0,1)");
        }
    }
};

struct AdamState {
    LstmParams m;
    LstmParams v;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(const LstmParams& like)
        : m(like.input_size, like.hidden_size), v(like.input_size, like.hidden_size) {}
};

inline bool all_finite(const LstmParams& p) {
    for (const auto t : p.tensors()) {
        for (const double x : t) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

inline double global_norm(const LstmParams& g) {
    double s = 0.0;
    for (const auto t : g.tensors()) {
        for (const double x : t) s += x * x;
    }
    return std::sqrt(s);
}

/// Rescales `grads` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_global_norm(LstmParams& grads, double max_norm) {
    const double n = global_norm(grads);
    if (n > max_norm) {
        const double scale = max_norm / n;
        for (auto t : grads.tensors()) {
            for (double& x : t) x *= scale;
        }
    }
    return n;
}

inline void adam_step(LstmParams& params, const LstmParams& grads, AdamState& state,
                      const TrainConfig& config) {
    if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v)) {
        throw ContractViolation("adam_step: parameter, gradient and moment shapes differ");
    }
    if (!all_finite(grads)) throw TrainingError("adam_step: non-finite gradient");

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);

    auto p = params.tensors();
    const auto g = grads.tensors();
    auto m = state.m.tensors();
    auto v = state.v.tensors();
    for (std::size_t k = 0; k < p.size(); ++k) {
        for (std::size_t e = 0; e < p[k].size(); ++e) {
            const double gi = g[k][e];
            m[k][e] = config.beta1 * m[k][e] + (1.0 - config.beta1) * gi;
            v[k][e] = config.beta2 * v[k][e] + (1.0 - config.beta2) * gi * gi;
            const double m_hat = m[k][e] / bc1;
            const double v_hat = v[k][e] / bc2;
            p[k][e] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

// ---------------------------------------------------------------------------
// Training

/// Windows of `lookback` steps x `features` values (time-major, raw units)
/// paired with scalar targets.
struct TrainingSet {
    std::size_t lookback = 0;
    std::size_t features = 0;
    std::vector<double> windows;
    std::vector<double> targets;

    TrainingSet() = default;
    TrainingSet(std::size_t lookback_steps, std::size_t feature_count)
        : lookback(lookback_steps), features(feature_count) {}

    std::size_t size() const { return targets.size(); }
    bool empty() const { return targets.empty(); }
    std::size_t window_length() const { return lookback * features; }

    void add(std::span<const double> window, double target) {
        if (window.size() != window_length()) {
            throw ContractViolation("TrainingSet::add: window has " + std::to_string(window.size()) +
                                    " values, expected " + std::to_string(window_length()));
        }
        windows.insert(windows.end(), window.begin(), window.end());
        targets.push_back(target);
    }

    std::span<const double> window(std::size_t k) const {
        return std::span<const double>(windows).subspan(k * window_length(), window_length());
    }
};

/// Trained network together with the scalers that map raw units to the
/// network's [0,1] training space and back.
struct LstmModel {
    LstmParams params;
    ScalerParams input_scaler;
    ScalerParams output_scaler;
    std::size_t lookback = 0;

    /// Prediction in raw target units for a raw-unit window.
    double predict(std::span<const double> raw_window, SequenceCache& cache) const {
        const std::size_t D = params.input_size;
        if (raw_window.size() != lookback * D) {
            throw ContractViolation("LstmModel::predict: window length mismatch");
        }
        std::vector<double> scaled(raw_window.size());
        for (std::size_t k = 0; k < raw_window.size(); ++k) {
            scaled[k] = input_scaler.forward(k % D, raw_window[k]);
        }
        return output_scaler.inverse(0, forward_sequence(scaled, params, cache));
    }

    double predict(std::span<const double> raw_window) const {
        SequenceCache cache;
        return predict(raw_window, cache);
    }

    bool operator==(const LstmModel&) const = default;
};

struct TrainResult {
    LstmModel model;
    /// Mean squared error (scaled space) over each epoch's batches.
    std::vector<double> loss_history;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per matrix; forget-gate bias 1,
/// other biases 0.
template <class Rng>
LstmParams init_params(std::size_t inputs, std::size_t hidden, Rng& rng) {
    LstmParams p(inputs, hidden);
    auto fill = [&rng](std::vector<double>& w, std::size_t fan_in) {
        const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-a, a);
        for (double& x : w) x = u(rng);
    };
    fill(p.input_weights, inputs);
    fill(p.recurrent_weights, hidden);
    fill(p.readout_weights, hidden);
    for (std::size_t r = 0; r < hidden; ++r) p.b(Gate::Forget, r) = 1.0;
    return p;
}

inline TrainResult train(const TrainingSet& data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw InputError("train: empty dataset");
    if (data.lookback != config.lookback) {
        throw InputError("train: dataset windows have " + std::to_string(data.lookback) +
                         " steps but config.lookback is " + std::to_string(config.lookback));
    }
    if (data.windows.size() != data.size() * data.window_length()) {
        throw ContractViolation("train: windows are not of uniform length");
    }
    const std::size_t n = data.size();
    const std::size_t D = data.features;
    const std::size_t len = data.window_length();

    std::vector<std::vector<double>> columns(D);
    for (auto& col : columns) col.reserve(n * data.lookback);
    for (std::size_t k = 0; k < data.windows.size(); ++k) columns[k % D].push_back(data.windows[k]);
    TrainResult result;
    LstmModel& model = result.model;
    model.lookback = data.lookback;
    model.input_scaler = scaler_fit(columns);
    model.output_scaler = scaler_fit({data.targets});

    std::vector<double> x(data.windows.size());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = model.input_scaler.forward(k % D, data.windows[k]);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = model.output_scaler.forward(0, data.targets[k]);

    std::mt19937_64 rng(config.seed);
    model.params = init_params(D, config.hidden_size, rng);
    LstmParams& params = model.params;
    LstmParams grads(D, config.hidden_size);
    AdamState adam(params);
    SequenceCache cache;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    result.loss_history.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sse = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < n; begin += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(n, begin + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            for (auto t : grads.tensors()) std::fill(t.begin(), t.end(), 0.0);
            double batch_sse = 0.0;
            for (std::size_t b = begin; b < end; ++b) {
                const std::size_t k = order[b];
                const double pred = forward_sequence(
                    std::span<const double>(x).subspan(k * len, len), params, cache);
                const double err = pred - y[k];
                batch_sse += err * err;
                accumulate_gradients(cache, 2.0 * err * inv_batch, params, grads);
            }
            if (!std::isfinite(batch_sse) || !all_finite(grads)) {
                throw TrainingError("non-finite loss in epoch " + std::to_string(epoch + 1) +
                                    ", batch " + std::to_string(batch_index + 1));
            }
            epoch_sse += batch_sse;
            clip_global_norm(grads, config.grad_clip_norm);
            adam_step(params, grads, adam, config);
        }
        result.loss_history.push_back(epoch_sse / static_cast<double>(n));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckConfig {
    std::size_t max_inputs = 3;
    std::size_t max_hidden = 4;
    std::size_t max_steps = 5;
    double step = 1e-5;
    /// Denominator floor of the relative error, so entries whose true
    /// gradient is ~0 are judged on absolute error.
    double relative_floor = 1e-6;
};

struct GradCheckResult {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    std::size_t steps = 0;
    double max_relative_error = 0.0;
    std::array<double, 5> tensor_max_relative_error{};
};

inline double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares BPTT gradients of the prediction to central finite differences
/// on a random small instance.
inline GradCheckResult gradient_check(std::uint64_t seed, const GradCheckConfig& config = {},
                                      double d_prediction = 1.0) {
    std::mt19937_64 rng(seed);
    auto dim = [&rng](std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(1, hi)(rng);
    };
    GradCheckResult res;
    res.input_size = dim(config.max_inputs);
    res.hidden_size = dim(config.max_hidden);
    res.steps = dim(config.max_steps);

    std::uniform_real_distribution<double> u(-1.0, 1.0);
    LstmParams params(res.input_size, res.hidden_size);
    for (auto t : params.tensors()) {
        for (double& v : t) v = u(rng);
    }
    std::vector<double> window(res.steps * res.input_size);
    for (double& v : window) v = u(rng);

    SequenceCache cache;
    forward_sequence(window, params, cache);
    const LstmParams analytic = backward_sequence(cache, d_prediction, params);

    auto tensors = params.tensors();
    const auto grad_tensors = analytic.tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        for (std::size_t e = 0; e < tensors[k].size(); ++e) {
            const double saved = tensors[k][e];
            tensors[k][e] = saved + config.step;
            const double up = forward_sequence(window, params, cache);
            tensors[k][e] = saved - config.step;
            const double down = forward_sequence(window, params, cache);
            tensors[k][e] = saved;
            const double numeric = d_prediction * (up - down) / (2.0 * config.step);
            const double err = relative_error(grad_tensors[k][e], numeric, config.relative_floor);
            res.tensor_max_relative_error[k] = std::max(res.tensor_max_relative_error[k], err);
            res.max_relative_error = std::max(res.max_relative_error, err);
        }
    }
    return res;
}

}  // namespace enspost::nn
