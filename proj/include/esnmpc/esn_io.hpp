#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esnmpc/esn.hpp"

namespace esnmpc {

inline constexpr int kWeightsFormatVersion = 1;

namespace detail {

inline nlohmann::json mat_to_json(const Mat& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

inline Mat mat_from_json(const nlohmann::json& j, const char* name) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw Error(std::string("weights file: ") + name + " data length mismatch");
    Mat m(rows, cols);
    std::copy(data.begin(), data.end(), m.data().begin());
    return m;
}

}  // namespace detail

inline nlohmann::json to_json(const EsnConfig& c) {
    return {{"reservoir_size", c.reservoir_size}, {"input_dim", c.input_dim},
            {"output_dim", c.output_dim},         {"leak_rate", c.leak_rate},
            {"spectral_radius", c.spectral_radius}, {"degree", c.degree},
            {"input_scale", c.input_scale},       {"beta", c.beta},
            {"washout", c.washout},               {"seed", c.seed}};
}

inline EsnConfig esn_config_from_json(const nlohmann::json& j) {
    EsnConfig c;
    c.reservoir_size = j.at("reservoir_size").get<std::size_t>();
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.output_dim = j.at("output_dim").get<std::size_t>();
    c.leak_rate = j.at("leak_rate").get<double>();
    c.spectral_radius = j.at("spectral_radius").get<double>();
    c.degree = j.at("degree").get<std::size_t>();
    c.input_scale = j.at("input_scale").get<double>();
    c.beta = j.at("beta").get<double>();
    c.washout = j.at("washout").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

inline nlohmann::json to_json(const EsnWeights& w) {
    std::vector<std::size_t> rows, cols;
    std::vector<double> values;
    for (const auto& e : w.w_res.entries()) {
        rows.push_back(e.row);
        cols.push_back(e.col);
        values.push_back(e.value);
    }
    return {{"format", "esnmpc-weights"},
            {"version", kWeightsFormatVersion},
            {"config", to_json(w.config)},
            {"w_in", detail::mat_to_json(w.w_in)},
            {"w_res", {{"size", w.w_res.size()}, {"rows", rows}, {"cols", cols}, {"values", values}}},
            {"w_out", detail::mat_to_json(w.w_out)},
            {"trained", w.trained}};
}

inline EsnWeights esn_weights_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "esnmpc-weights") throw Error("weights file: unrecognised format tag");
    if (j.at("version").get<int>() != kWeightsFormatVersion) {
        throw Error("weights file: unsupported version " + j.at("version").dump());
    }
    EsnWeights w;
    w.config = esn_config_from_json(j.at("config"));
    w.w_in = detail::mat_from_json(j.at("w_in"), "w_in");
    const auto& res = j.at("w_res");
    const auto rows = res.at("rows").get<std::vector<std::size_t>>();
    const auto cols = res.at("cols").get<std::vector<std::size_t>>();
    const auto values = res.at("values").get<std::vector<double>>();
    if (rows.size() != cols.size() || rows.size() != values.size()) {
        throw Error("weights file: w_res triplet arrays differ in length");
    }
    std::vector<Triplet> entries(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) entries[i] = {rows[i], cols[i], values[i]};
    w.w_res = SparseMatrix(res.at("size").get<std::size_t>(), std::move(entries));
    w.w_out = detail::mat_from_json(j.at("w_out"), "w_out");
    w.trained = j.at("trained").get<bool>();

    const std::size_t n = w.config.reservoir_size;
    if (w.w_in.rows() != n || w.w_in.cols() != w.config.input_dim || w.w_res.size() != n ||
        w.w_out.rows() != w.config.output_dim || w.w_out.cols() != n + 1) {
        throw Error("weights file: matrix shapes inconsistent with config");
    }
    return w;
}

inline void save_weights(const EsnWeights& w, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << to_json(w).dump() << '\n';
    if (!out) throw Error("failed writing " + path);
}

inline EsnWeights load_weights(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return esn_weights_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

}  // namespace esnmpc
