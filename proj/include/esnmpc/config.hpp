#pragma once

// Experiment config files are flat `key = value` text. Blank lines and
// everything after `#` are ignored. Vectors are comma separated; matrices
// are rows separated by `;` or the word `identity`. Every key is optional
// and unknown keys are rejected. See configs/benchmark.cfg for the full list.

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "esnmpc/experiment_config.hpp"
#include "esnmpc/text.hpp"

namespace esnmpc {

namespace detail {

inline Vec parse_vec(std::string_view s, std::string_view key) {
    Vec v;
    for (auto part : text::split(s, ',')) v.push_back(text::parse_double(part, key));
    return v;
}

inline Mat parse_mat(std::string_view s, std::string_view key, std::size_t identity_size) {
    if (text::trim(s) == "identity") return Mat::identity(identity_size);
    std::vector<Vec> rows;
    for (auto row : text::split(s, ';')) rows.push_back(parse_vec(row, key));
    const std::size_t cols = rows.front().size();
    Mat m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) throw Error(std::string(key) + ": ragged matrix rows");
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

inline std::string format_vec(std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += text::format_double(v[i]);
    }
    return s;
}

inline std::string format_mat(const Mat& m) {
    std::string s;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (i) s += "; ";
        s += format_vec(m.row(i));
    }
    return s;
}

inline std::size_t parse_count(std::string_view s, std::string_view key) {
    return static_cast<std::size_t>(text::parse_u64(s, key));
}

}  // namespace detail

/// Applies `key = value` lines on top of `base`.
inline ExperimentConfig apply_config_text(ExperimentConfig cfg, std::string_view content) {
    using Setter = std::function<void(ExperimentConfig&, std::string_view, std::string_view)>;
    using detail::parse_count;
    using detail::parse_mat;
    using detail::parse_vec;
    using text::parse_double;

    static const std::map<std::string, Setter, std::less<>> setters = {
        {"plant.m", [](auto& c, auto v, auto k) { c.plant.m = parse_double(v, k); }},
        {"plant.b", [](auto& c, auto v, auto k) { c.plant.b = parse_double(v, k); }},
        {"plant.k", [](auto& c, auto v, auto k) { c.plant.k = parse_double(v, k); }},
        {"plant.dt", [](auto& c, auto v, auto k) { c.plant.dt = parse_double(v, k); }},
        {"residual.kind", [](auto& c, auto v, auto) { c.residual.kind = residual_kind_from_string(text::trim(v)); }},
        {"residual.m", [](auto& c, auto v, auto k) { c.residual.true_params.m = parse_double(v, k); }},
        {"residual.b", [](auto& c, auto v, auto k) { c.residual.true_params.b = parse_double(v, k); }},
        {"residual.k", [](auto& c, auto v, auto k) { c.residual.true_params.k = parse_double(v, k); }},
        {"residual.alpha", [](auto& c, auto v, auto k) { c.residual.alpha = parse_double(v, k); }},
        {"selector.b_n", [](auto& c, auto v, auto k) { c.b_n = parse_mat(v, k, 2); }},
        {"selector.b_z", [](auto& c, auto v, auto k) { c.b_z = parse_mat(v, k, 3); }},
        {"esn.reservoir_size", [](auto& c, auto v, auto k) { c.esn.reservoir_size = parse_count(v, k); }},
        {"esn.leak_rate", [](auto& c, auto v, auto k) { c.esn.leak_rate = parse_double(v, k); }},
        {"esn.spectral_radius", [](auto& c, auto v, auto k) { c.esn.spectral_radius = parse_double(v, k); }},
        {"esn.degree", [](auto& c, auto v, auto k) { c.esn.degree = parse_count(v, k); }},
        {"esn.input_scale", [](auto& c, auto v, auto k) { c.esn.input_scale = parse_double(v, k); }},
        {"esn.beta", [](auto& c, auto v, auto k) { c.esn.beta = parse_double(v, k); }},
        {"esn.washout", [](auto& c, auto v, auto k) { c.esn.washout = parse_count(v, k); }},
        {"mpc.horizon", [](auto& c, auto v, auto k) { c.mpc.horizon = parse_count(v, k); }},
        {"mpc.q_diag", [](auto& c, auto v, auto k) { c.mpc.q_diag = parse_vec(v, k); }},
        {"mpc.r", [](auto& c, auto v, auto k) { c.mpc.r_scalar = parse_double(v, k); }},
        {"mpc.reference", [](auto& c, auto v, auto k) { c.mpc.reference = parse_vec(v, k); }},
        {"mpc.terminal_mode",
         [](auto& c, auto v, auto) { c.mpc.terminal_mode = terminal_mode_from_string(text::trim(v)); }},
        {"mpc.u_limit",
         [](auto& c, auto v, auto k) {
             if (text::trim(v) == "none") {
                 c.mpc.u_limit.reset();
             } else {
                 c.mpc.u_limit = parse_double(v, k);
             }
         }},
        {"experiment.steps", [](auto& c, auto v, auto k) { c.sim_steps = parse_count(v, k); }},
        {"experiment.x0", [](auto& c, auto v, auto k) { c.x0 = parse_vec(v, k); }},
        {"experiment.retrain_every",
         [](auto& c, auto v, auto k) {
             const auto n = parse_count(v, k);
             if (n == 0) {
                 c.retrain_every.reset();
             } else {
                 c.retrain_every = n;
             }
         }},
        {"experiment.compensation",
         [](auto& c, auto v, auto) { c.alignment = alignment_from_string(text::trim(v)); }},
        {"seed", [](auto& c, auto v, auto k) { c.seed = text::parse_u64(v, k); }},
        {"predict.train_len", [](auto& c, auto v, auto k) { c.predict_train_len = parse_count(v, k); }},
        {"predict.horizon", [](auto& c, auto v, auto k) { c.predict_horizon = parse_count(v, k); }},
    };

    std::size_t line_no = 0;
    std::istringstream in{std::string(content)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = text::trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw Error("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = text::trim(view.substr(0, eq));
        const auto value = text::trim(view.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw Error("config: unknown key '" + std::string(key) + "'");
        if (value.empty()) throw Error("config: empty value for key '" + std::string(key) + "'");
        it->second(cfg, value, key);
    }
    cfg.residual.true_params.dt = cfg.plant.dt;
    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config_text(std::string_view content) { return apply_config_text({}, content); }

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

/// Canonical text form; parse_config_text(to_config_text(c)) reproduces c.
inline std::string to_config_text(const ExperimentConfig& c) {
    using text::format_double;
    std::ostringstream o;
    o << "plant.m = " << format_double(c.plant.m) << '\n'
      << "plant.b = " << format_double(c.plant.b) << '\n'
      << "plant.k = " << format_double(c.plant.k) << '\n'
      << "plant.dt = " << format_double(c.plant.dt) << '\n'
      << "residual.kind = " << to_string(c.residual.kind) << '\n'
      << "residual.m = " << format_double(c.residual.true_params.m) << '\n'
      << "residual.b = " << format_double(c.residual.true_params.b) << '\n'
      << "residual.k = " << format_double(c.residual.true_params.k) << '\n'
      << "residual.alpha = " << format_double(c.residual.alpha) << '\n'
      << "selector.b_n = " << detail::format_mat(c.b_n) << '\n'
      << "selector.b_z = " << detail::format_mat(c.b_z) << '\n'
      << "esn.reservoir_size = " << c.esn.reservoir_size << '\n'
      << "esn.leak_rate = " << format_double(c.esn.leak_rate) << '\n'
      << "esn.spectral_radius = " << format_double(c.esn.spectral_radius) << '\n'
      << "esn.degree = " << c.esn.degree << '\n'
      << "esn.input_scale = " << format_double(c.esn.input_scale) << '\n'
      << "esn.beta = " << format_double(c.esn.beta) << '\n'
      << "esn.washout = " << c.esn.washout << '\n'
      << "mpc.horizon = " << c.mpc.horizon << '\n'
      << "mpc.q_diag = " << detail::format_vec(c.mpc.q_diag) << '\n'
      << "mpc.r = " << format_double(c.mpc.r_scalar) << '\n'
      << "mpc.reference = " << detail::format_vec(c.mpc.reference) << '\n'
      << "mpc.terminal_mode = " << to_string(c.mpc.terminal_mode) << '\n'
      << "mpc.u_limit = " << (c.mpc.u_limit ? format_double(*c.mpc.u_limit) : std::string("none")) << '\n'
      << "experiment.steps = " << c.sim_steps << '\n'
      << "experiment.x0 = " << detail::format_vec(c.x0) << '\n'
      << "experiment.retrain_every = " << (c.retrain_every ? *c.retrain_every : 0) << '\n'
      << "experiment.compensation = " << to_string(c.alignment) << '\n'
      << "seed = " << c.seed << '\n'
      << "predict.train_len = " << c.predict_train_len << '\n'
      << "predict.horizon = " << c.predict_horizon << '\n';
    return o.str();
}

inline std::string config_hash(const ExperimentConfig& c) { return text::hex64(text::fnv1a64(to_config_text(c))); }

}  // namespace esnmpc
