#pragma once

// CSV artefacts, one header line each:
//   run log:     k,t,s_true,v_true,s_nom,v_nom,u,mu_s,mu_v,stage_cost
//   dataset:     k,z1..zn,mu1..mun
//   prediction:  k,mu_true1..mu_truen,mu_pred1..mu_predn
// Numbers use the shortest round-trip decimal form.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esnmpc/experiment.hpp"
#include "esnmpc/text.hpp"

namespace esnmpc {

inline constexpr const char* kRunLogHeader = "k,t,s_true,v_true,s_nom,v_nom,u,mu_s,mu_v,stage_cost";

namespace detail {

inline void append_fields(std::string& line, std::span<const double> values) {
    for (double v : values) {
        line += ',';
        line += text::format_double(v);
    }
}

inline std::vector<std::string> read_lines(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline std::vector<double> parse_row(const std::string& line, std::size_t expected, std::size_t line_no) {
    const auto fields = text::split(line, ',');
    if (fields.size() != expected) {
        throw Error("csv line " + std::to_string(line_no) + ": expected " + std::to_string(expected) + " fields, got " +
                    std::to_string(fields.size()));
    }
    std::vector<double> v;
    v.reserve(fields.size());
    for (auto f : fields) v.push_back(text::parse_double(f, "csv line " + std::to_string(line_no)));
    return v;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return in;
}

}  // namespace detail

// --- run log ---------------------------------------------------------------

inline void write_run_log(std::ostream& out, const RunLog& log) {
    out << kRunLogHeader << '\n';
    for (const auto& r : log.records) {
        if (r.x_true.size() != 2 || r.u.size() != 1) throw Error("run log CSV requires a 2-state, 1-input system");
        std::string line = std::to_string(r.k);
        detail::append_fields(line, std::span<const double>(&r.t, 1));
        detail::append_fields(line, r.x_true);
        detail::append_fields(line, r.x_pred);
        detail::append_fields(line, r.u);
        detail::append_fields(line, r.mu);
        detail::append_fields(line, std::span<const double>(&r.stage_cost, 1));
        out << line << '\n';
    }
}

/// Reads a run log. With `model`, the compensation of each step is recovered
/// as x_pred - (A x + B u); otherwise it is left empty.
inline RunLog read_run_log(std::istream& in, const LinearModel* model = nullptr) {
    const auto lines = detail::read_lines(in);
    if (lines.empty() || lines.front() != kRunLogHeader) throw Error("run log: missing or unexpected header");
    RunLog log;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto v = detail::parse_row(lines[i], 10, i + 1);
        StepRecord r;
        r.k = static_cast<std::size_t>(v[0]);
        r.t = v[1];
        r.x_true = {v[2], v[3]};
        r.x_pred = {v[4], v[5]};
        r.u = {v[6]};
        r.mu = {v[7], v[8]};
        r.stage_cost = v[9];
        if (model) r.compensation = sub(r.x_pred, nominal_step(*model, r.x_true, r.u));
        log.records.push_back(std::move(r));
    }
    return log;
}

inline void save_run_log(const RunLog& log, const std::string& path) {
    auto out = detail::open_out(path);
    write_run_log(out, log);
    if (!out) throw Error("failed writing " + path);
}

inline RunLog load_run_log(const std::string& path, const LinearModel* model = nullptr) {
    auto in = detail::open_in(path);
    try {
        return read_run_log(in, model);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

// --- dataset ---------------------------------------------------------------

inline std::string dataset_header(std::size_t nz, std::size_t nmu) {
    std::string h = "k";
    for (std::size_t i = 1; i <= nz; ++i) h += ",z" + std::to_string(i);
    for (std::size_t i = 1; i <= nmu; ++i) h += ",mu" + std::to_string(i);
    return h;
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
    if (ds.rows.empty()) throw Error("dataset: nothing to write");
    const std::size_t nz = ds.rows.front().z.size();
    const std::size_t nmu = ds.rows.front().mu.size();
    out << dataset_header(nz, nmu) << '\n';
    for (const auto& r : ds.rows) {
        if (r.z.size() != nz || r.mu.size() != nmu) throw Error("dataset: inconsistent row lengths");
        std::string line = std::to_string(r.k);
        detail::append_fields(line, r.z);
        detail::append_fields(line, r.mu);
        out << line << '\n';
    }
}

inline Dataset read_dataset(std::istream& in) {
    const auto lines = detail::read_lines(in);
    if (lines.empty()) throw Error("dataset: empty file");
    const auto header = text::split(lines.front(), ',');
    std::size_t nz = 0, nmu = 0;
    for (auto h : header) {
        if (h.starts_with("mu")) {
            ++nmu;
        } else if (h.starts_with("z")) {
            ++nz;
        }
    }
    if (header.empty() || header.front() != "k" || nz == 0 || nmu == 0 || lines.front() != dataset_header(nz, nmu)) {
        throw Error("dataset: unexpected header '" + lines.front() + "'");
    }
    Dataset ds;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto v = detail::parse_row(lines[i], 1 + nz + nmu, i + 1);
        DatasetRow r;
        r.k = static_cast<std::size_t>(v[0]);
        if (r.k != i - 1) throw Error("dataset: rows must be ordered by k starting at 0");
        r.z.assign(v.begin() + 1, v.begin() + 1 + static_cast<std::ptrdiff_t>(nz));
        r.mu.assign(v.begin() + 1 + static_cast<std::ptrdiff_t>(nz), v.end());
        ds.rows.push_back(std::move(r));
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
    auto out = detail::open_out(path);
    write_dataset(out, ds);
    if (!out) throw Error("failed writing " + path);
}

inline Dataset load_dataset(const std::string& path) {
    auto in = detail::open_in(path);
    try {
        return read_dataset(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

// --- prediction table ------------------------------------------------------

inline void write_prediction(std::ostream& out, const PredictionTable& table, std::size_t n) {
    std::string h = "k";
    for (std::size_t i = 1; i <= n; ++i) h += ",mu_true" + std::to_string(i);
    for (std::size_t i = 1; i <= n; ++i) h += ",mu_pred" + std::to_string(i);
    out << h << '\n';
    for (const auto& r : table) {
        std::string line = std::to_string(r.k);
        detail::append_fields(line, r.mu_true);
        detail::append_fields(line, r.mu_pred);
        out << line << '\n';
    }
}

inline PredictionTable read_prediction(std::istream& in) {
    const auto lines = detail::read_lines(in);
    if (lines.empty() || !lines.front().starts_with("k,mu_true1")) throw Error("prediction: unexpected header");
    const std::size_t fields = text::split(lines.front(), ',').size();
    if (fields < 3 || fields % 2 == 0) throw Error("prediction: malformed header");
    const std::size_t n = (fields - 1) / 2;
    PredictionTable table;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto v = detail::parse_row(lines[i], fields, i + 1);
        PredictionRow r;
        r.k = static_cast<std::size_t>(v[0]);
        r.mu_true.assign(v.begin() + 1, v.begin() + 1 + static_cast<std::ptrdiff_t>(n));
        r.mu_pred.assign(v.begin() + 1 + static_cast<std::ptrdiff_t>(n), v.end());
        table.push_back(std::move(r));
    }
    return table;
}

inline void save_prediction(const PredictionTable& table, std::size_t n, const std::string& path) {
    auto out = detail::open_out(path);
    write_prediction(out, table, n);
    if (!out) throw Error("failed writing " + path);
}

inline PredictionTable load_prediction(const std::string& path) {
    auto in = detail::open_in(path);
    try {
        return read_prediction(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

// --- JSON summaries --------------------------------------------------------

namespace detail {
inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }
inline nlohmann::json optional_step(const std::optional<std::size_t>& s) {
    return s ? nlohmann::json(*s) : nlohmann::json();
}
}  // namespace detail

inline nlohmann::json to_json(const Metrics& m) {
    return {{"nominal_cost", detail::finite_or_null(m.nominal_cost)},
            {"compensated_cost", detail::finite_or_null(m.compensated_cost)},
            {"cost_ratio", detail::finite_or_null(m.cost_ratio)},
            {"nominal_rms_mu", detail::finite_or_null(m.nominal_rms_mu)},
            {"compensated_rms_mu", detail::finite_or_null(m.compensated_rms_mu)},
            {"error_ratio", detail::finite_or_null(m.error_ratio)},
            {"settling_step_nominal", detail::optional_step(m.settling_step_nominal)},
            {"settling_step_compensated", detail::optional_step(m.settling_step_compensated)}};
}

inline nlohmann::json to_json(const TrainReport& r) {
    nlohmann::json nr = nlohmann::json::array();
    for (double v : r.nrmse) nr.push_back(detail::finite_or_null(v));
    return {{"samples", r.samples}, {"fit_columns", r.fit_columns}, {"washout", r.washout},
            {"beta", r.beta},       {"train_nrmse", nr},          {"config_hash", r.config_hash}};
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed writing " + path);
}

}  // namespace esnmpc
