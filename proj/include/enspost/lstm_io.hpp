#pragma once

// Plain-text model format:
//
//   ENSPOST-LSTM v1 D=<d> H=<h> Lw=<w>
//   W_f <rows> <cols>
//   <row-major values, one matrix row per line>
//   U_f ...
//   b_f ...
//   ... (g, i, o gates) ...
//   W_d 1 <H>
//   b_d 1 1
//   scaler_in <D> 2      (min max per feature)
//   scaler_out 1 2
//
// Values are written with 17 significant digits, so a write/read cycle
// reproduces every double exactly.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "enspost/errors.hpp"
#include "enspost/lstm.hpp"

namespace enspost::nn {

inline std::string format_exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

struct Block {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major
};

inline void write_block(std::ostream& os, const std::string& name, std::size_t rows,
                        std::size_t cols, const std::function<double(std::size_t, std::size_t)>& at) {
    os << name << ' ' << rows << ' ' << cols << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c) os << ' ';
            os << format_exact(at(r, c));
        }
        os << '\n';
    }
}

inline double parse_double(const std::string& tok, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size()) {
        throw FormatError("model file: bad number '" + tok + "' in " + context);
    }
    return v;
}

}  // namespace detail

inline void write_model(std::ostream& os, const LstmModel& model) {
    const LstmParams& p = model.params;
    const std::size_t D = p.input_size, H = p.hidden_size;
    os << "ENSPOST-LSTM v1 D=" << D << " H=" << H << " Lw=" << model.lookback << '\n';
    for (std::size_t k = 0; k < kGates.size(); ++k) {
        const Gate g = kGates[k];
        const std::string s = kGateSuffix[k];
        detail::write_block(os, "W_" + s, H, D, [&](std::size_t r, std::size_t c) { return p.W(g, r, c); });
        detail::write_block(os, "U_" + s, H, H, [&](std::size_t r, std::size_t c) { return p.U(g, r, c); });
        detail::write_block(os, "b_" + s, H, 1, [&](std::size_t r, std::size_t) { return p.b(g, r); });
    }
    detail::write_block(os, "W_d", 1, H, [&](std::size_t, std::size_t c) { return p.readout_weights[c]; });
    detail::write_block(os, "b_d", 1, 1, [&](std::size_t, std::size_t) { return p.readout_bias; });
    detail::write_block(os, "scaler_in", D, 2, [&](std::size_t r, std::size_t c) {
        return c == 0 ? model.input_scaler.min[r] : model.input_scaler.max[r];
    });
    detail::write_block(os, "scaler_out", 1, 2, [&](std::size_t, std::size_t c) {
        return c == 0 ? model.output_scaler.min[0] : model.output_scaler.max[0];
    });
}

inline LstmModel read_model(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw FormatError("model file: empty");
    std::size_t D = 0, H = 0, Lw = 0;
    {
        std::istringstream hs(header);
        std::string magic, version, d, h, w;
        hs >> magic >> version >> d >> h >> w;
        auto field = [&](const std::string& tok, const std::string& key) -> std::size_t {
            if (tok.rfind(key + "=", 0) != 0) throw FormatError("model file: bad header '" + header + "'");
            return static_cast<std::size_t>(std::stoul(tok.substr(key.size() + 1)));
        };
        if (magic != "ENSPOST-LSTM" || version != "v1") {
            throw FormatError("model file: unsupported header '" + header + "'");
        }
        D = field(d, "D");
        H = field(h, "H");
        Lw = field(w, "Lw");
        if (D == 0 || H == 0 || Lw == 0) throw FormatError("model file: zero dimension in header");
    }

    std::map<std::string, detail::Block> blocks;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string name;
        detail::Block b;
        if (!(ls >> name >> b.rows >> b.cols)) throw FormatError("model file: bad block header '" + line + "'");
        b.values.reserve(b.rows * b.cols);
        for (std::size_t r = 0; r < b.rows; ++r) {
            if (!std::getline(is, line)) throw FormatError("model file: truncated block " + name);
            std::istringstream rs(line);
            std::string tok;
            std::size_t count = 0;
            while (rs >> tok) {
                b.values.push_back(detail::parse_double(tok, name));
                ++count;
            }
            if (count != b.cols) throw FormatError("model file: row width mismatch in block " + name);
        }
        if (!blocks.emplace(name, std::move(b)).second) throw FormatError("model file: duplicate block " + name);
    }

    auto take = [&](const std::string& name, std::size_t rows, std::size_t cols) -> const detail::Block& {
        const auto it = blocks.find(name);
        if (it == blocks.end()) throw FormatError("model file: missing block " + name);
        if (it->second.rows != rows || it->second.cols != cols) {
            throw FormatError("model file: block " + name + " has wrong shape");
        }
        return it->second;
    };

    LstmModel m;
    m.lookback = Lw;
    m.params = LstmParams(D, H);
    LstmParams& p = m.params;
    for (std::size_t k = 0; k < kGates.size(); ++k) {
        const Gate g = kGates[k];
        const std::string s = kGateSuffix[k];
        const auto& w = take("W_" + s, H, D);
        const auto& u = take("U_" + s, H, H);
        const auto& b = take("b_" + s, H, 1);
        for (std::size_t r = 0; r < H; ++r) {
            for (std::size_t c = 0; c < D; ++c) p.W(g, r, c) = w.values[r * D + c];
            for (std::size_t c = 0; c < H; ++c) p.U(g, r, c) = u.values[r * H + c];
            p.b(g, r) = b.values[r];
        }
    }
    p.readout_weights = take("W_d", 1, H).values;
    p.readout_bias = take("b_d", 1, 1).values[0];
    const auto& si = take("scaler_in", D, 2);
    for (std::size_t r = 0; r < D; ++r) {
        m.input_scaler.min.push_back(si.values[2 * r]);
        m.input_scaler.max.push_back(si.values[2 * r + 1]);
    }
    const auto& so = take("scaler_out", 1, 2);
    m.output_scaler.min = {so.values[0]};
    m.output_scaler.max = {so.values[1]};
    return m;
}

inline void save_model(const std::string& path, const LstmModel& model) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write model file " + path);
    write_model(os, model);
    if (!os) throw InputError("failed writing model file " + path);
}

inline LstmModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InputError("cannot open model file " + path);
    try {
        return read_model(is);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace enspost::nn
