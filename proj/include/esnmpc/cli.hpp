#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "esnmpc/config.hpp"
#include "esnmpc/csv.hpp"
#include "esnmpc/esn_io.hpp"
#include "esnmpc/experiment.hpp"
#include "esnmpc/svg.hpp"

namespace esnmpc::cli {

namespace fs = std::filesystem;

struct Invocation {
    std::string subcommand;
    std::string config_path;  // empty: built-in defaults
    std::string output_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> washout;
};

namespace files {
inline constexpr const char* dataset = "dataset.csv";
inline constexpr const char* nominal_run = "nominal_run.csv";
inline constexpr const char* weights = "weights.json";
inline constexpr const char* training_report = "training_report.json";
inline constexpr const char* compensated_run = "compensated_run.csv";
inline constexpr const char* prediction = "prediction.csv";
inline constexpr const char* metrics = "metrics.json";
inline constexpr const char* fig4 = "fig4.svg";
inline constexpr const char* fig5 = "fig5.svg";
}  // namespace files

/// Config file (or defaults) with command-line overrides applied; flags win.
inline ExperimentConfig resolve_config(const Invocation& inv) {
    ExperimentConfig cfg = inv.config_path.empty() ? parse_config_text("") : parse_config(inv.config_path);
    if (inv.seed) cfg.seed = *inv.seed;
    if (inv.steps) cfg.sim_steps = *inv.steps;
    if (inv.washout) cfg.esn.washout = *inv.washout;
    cfg.validate();
    return cfg;
}

namespace detail {

inline std::string path_in(const Invocation& inv, const char* name) { return (fs::path(inv.output_dir) / name).string(); }

inline void require_file(const std::string& path) {
    if (!fs::exists(path)) throw Error("missing input file " + path);
}

inline EsnWeights load_matching_weights(const ExperimentConfig& cfg, const std::string& path) {
    require_file(path);
    EsnWeights w = load_weights(path);
    if (!(w.config == cfg.esn_config())) throw Error(path + ": reservoir config does not match the experiment config");
    return w;
}

inline void render_fig4(const RunLog& nominal, const RunLog& compensated, const Vec& reference,
                        const std::string& path) {
    svg::Figure fig;
    fig.title = "Closed loop on the true plant: nominal vs ESN-compensated MPC";
    fig.x_label = "time [s]";
    const char* names[] = {"position s", "velocity v"};
    for (std::size_t d = 0; d < 2; ++d) {
        svg::Panel panel;
        panel.y_label = names[d];
        svg::Series nom{"nominal MPC", {}, {}, "#1f77b4", false};
        svg::Series comp{"compensated MPC", {}, {}, "#d62728", false};
        svg::Series target{"target", {}, {}, "#2ca02c", true};
        for (const auto& r : nominal.records) {
            nom.x.push_back(r.t);
            nom.y.push_back(r.x_true[d]);
        }
        for (const auto& r : compensated.records) {
            comp.x.push_back(r.t);
            comp.y.push_back(r.x_true[d]);
        }
        if (!nom.x.empty()) {
            target.x = {nom.x.front(), nom.x.back()};
            target.y = {reference[d], reference[d]};
        }
        panel.series = {nom, comp, target};
        fig.panels.push_back(std::move(panel));
    }
    svg::save(fig, path);
}

inline void render_fig5(const PredictionTable& table, const std::string& path) {
    svg::Figure fig;
    fig.title = "ESN residual prediction on held-out steps";
    fig.x_label = "step k";
    const std::size_t n = table.empty() ? 0 : table.front().mu_true.size();
    for (std::size_t d = 0; d < n; ++d) {
        svg::Panel panel;
        panel.y_label = "residual dim " + std::to_string(d + 1);
        svg::Series truth{"true", {}, {}, "#1f77b4", false};
        svg::Series pred{"ESN prediction", {}, {}, "#ff7f0e", true};
        for (const auto& r : table) {
            truth.x.push_back(static_cast<double>(r.k));
            truth.y.push_back(r.mu_true[d]);
            pred.x.push_back(static_cast<double>(r.k));
            pred.y.push_back(r.mu_pred[d]);
        }
        panel.series = {truth, pred};
        fig.panels.push_back(std::move(panel));
    }
    svg::save(fig, path);
}

inline void do_collect(const Invocation& inv, const ExperimentConfig& cfg) {
    auto [ds, log] = collect_phase(cfg);
    save_dataset(ds, path_in(inv, files::dataset));
    save_run_log(log, path_in(inv, files::nominal_run));
}

inline void do_train(const Invocation& inv, const ExperimentConfig& cfg) {
    const auto ds_path = path_in(inv, files::dataset);
    require_file(ds_path);
    const Dataset ds = load_dataset(ds_path);
    const auto result = train_with_report(cfg, ds);
    save_weights(result.weights, path_in(inv, files::weights));
    save_json(to_json(result.report), path_in(inv, files::training_report));
}

inline void do_run(const Invocation& inv, const ExperimentConfig& cfg) {
    const EsnWeights w = load_matching_weights(cfg, path_in(inv, files::weights));
    std::optional<Dataset> prior;
    if (cfg.retrain_every) {
        const auto ds_path = path_in(inv, files::dataset);
        require_file(ds_path);
        prior = load_dataset(ds_path);
    }
    const RunLog log = compensated_phase(cfg, w, prior ? &*prior : nullptr);
    save_run_log(log, path_in(inv, files::compensated_run));
}

inline void do_predict(const Invocation& inv, const ExperimentConfig& cfg) {
    const auto ds_path = path_in(inv, files::dataset);
    require_file(ds_path);
    const Dataset ds = load_dataset(ds_path);
    const auto table = openloop_predict(cfg, init(cfg.esn_config()), ds, cfg.predict_train_len, cfg.predict_horizon);
    save_prediction(table, cfg.b_n.cols(), path_in(inv, files::prediction));
}

inline void do_report(const Invocation& inv, const ExperimentConfig& cfg) {
    const auto nominal_path = path_in(inv, files::nominal_run);
    const auto comp_path = path_in(inv, files::compensated_run);
    const auto pred_path = path_in(inv, files::prediction);
    for (const auto& p : {nominal_path, comp_path, pred_path}) require_file(p);
    render_fig4(load_run_log(nominal_path), load_run_log(comp_path), cfg.mpc.reference, path_in(inv, files::fig4));
    render_fig5(load_prediction(pred_path), path_in(inv, files::fig5));
}

inline void do_full(const Invocation& inv, const ExperimentConfig& cfg) {
    const PipelineResult r = run_pipeline(cfg);
    save_dataset(r.dataset, path_in(inv, files::dataset));
    save_run_log(r.nominal_log, path_in(inv, files::nominal_run));
    save_weights(r.training.weights, path_in(inv, files::weights));
    save_json(to_json(r.training.report), path_in(inv, files::training_report));
    save_run_log(r.compensated_log, path_in(inv, files::compensated_run));
    save_prediction(r.prediction, cfg.b_n.cols(), path_in(inv, files::prediction));
    save_json(to_json(r.summary), path_in(inv, files::metrics));
    do_report(inv, cfg);
}

}  // namespace detail

/// Runs one subcommand. Returns 0 on success; on failure writes a single
/// `error: <subcommand>: <message>` line to `err` and returns 1.
inline int run_subcommand(const Invocation& inv, std::ostream& err) {
    try {
        const ExperimentConfig cfg = resolve_config(inv);
        fs::create_directories(inv.output_dir);
        if (inv.subcommand == "collect") {
            detail::do_collect(inv, cfg);
        } else if (inv.subcommand == "train") {
            detail::do_train(inv, cfg);
        } else if (inv.subcommand == "run") {
            detail::do_run(inv, cfg);
        } else if (inv.subcommand == "predict") {
            detail::do_predict(inv, cfg);
        } else if (inv.subcommand == "full") {
            detail::do_full(inv, cfg);
        } else if (inv.subcommand == "report") {
            detail::do_report(inv, cfg);
        } else {
            throw Error("unknown subcommand '" + inv.subcommand + "'");
        }
        return 0;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        err << "error: " << inv.subcommand << ": " << msg << '\n';
        return 1;
    }
}

}  // namespace esnmpc::cli
