#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esnmpc/config.hpp"
#include "esnmpc/esn.hpp"
#include "esnmpc/experiment_config.hpp"
#include "esnmpc/mpc.hpp"
#include "esnmpc/plant.hpp"

namespace esnmpc {

struct DatasetRow {
    std::size_t k = 0;
    Vec z;   // regressor z(k)
    Vec mu;  // training target B_n^+ (x_true(k+1) - x_nom(k+1))

    friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

struct Dataset {
    std::vector<DatasetRow> rows;
    std::string phase;
    std::uint64_t seed = 0;
    std::string config_hash;

    [[nodiscard]] std::size_t size() const noexcept { return rows.size(); }
    [[nodiscard]] std::vector<Vec> inputs() const {
        std::vector<Vec> z;
        z.reserve(rows.size());
        for (const auto& r : rows) z.push_back(r.z);
        return z;
    }
};

struct StepRecord {
    std::size_t k = 0;
    double t = 0.0;
    Vec x_true;        // x(k)
    Vec x_pred;        // controller model's prediction of x(k+1)
    Vec u;             // applied input u(k)
    Vec mu;            // x_true(k+1) - (A x(k) + B u(k))
    Vec compensation;  // state-space term added to the nominal model this step
    double stage_cost = 0.0;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct RunLog {
    std::vector<StepRecord> records;
    Vec x_final;

    [[nodiscard]] double cumulative_cost() const noexcept {
        double c = 0.0;
        for (const auto& r : records) c += r.stage_cost;
        return c;
    }

    /// RMS over steps of || mu - compensation ||, the one-step error of the
    /// model the controller used.
    [[nodiscard]] double rms_model_error() const {
        if (records.empty()) return 0.0;
        double s = 0.0;
        for (const auto& r : records) {
            const Vec e = sub(r.mu, r.compensation);
            s += dot(e, e);
        }
        return std::sqrt(s / static_cast<double>(records.size()));
    }

    friend bool operator==(const RunLog&, const RunLog&) = default;
};

inline double stage_cost(const MpcConfig& mpc, std::span<const double> x, std::span<const double> u) {
    double c = 0.0;
    for (std::size_t i = 0; i < mpc.q_diag.size(); ++i) {
        const double e = x[i] - mpc.reference[i];
        c += mpc.q_diag[i] * e * e;
    }
    for (double ui : u) c += mpc.r_scalar * ui * ui;
    return c;
}

/// Root-mean-square error divided by the population standard deviation of
/// the target. A constant target gives 0 for an exact fit and +inf otherwise.
inline double nrmse(std::span<const double> target, std::span<const double> predicted) {
    if (target.size() != predicted.size()) throw Error("nrmse: length mismatch");
    if (target.empty()) return 0.0;
    const double n = static_cast<double>(target.size());
    double mean = 0.0;
    for (double v : target) mean += v;
    mean /= n;
    double var = 0.0;
    double mse = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        var += (target[i] - mean) * (target[i] - mean);
        mse += (target[i] - predicted[i]) * (target[i] - predicted[i]);
    }
    const double rmse = std::sqrt(mse / n);
    const double sd = std::sqrt(var / n);
    if (sd == 0.0) return rmse == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return rmse / sd;
}

namespace detail {

/// Supplies the state-space compensation for each control step.
class Compensator {
public:
    virtual ~Compensator() = default;
    /// `u_guess` is the previous plan's input for this step (zero at k = 0).
    virtual Vec before_solve(std::size_t k, std::span<const double> x, std::span<const double> u_guess) = 0;
    virtual void after_step(std::size_t k, const DatasetRow& row) = 0;
};

class ZeroCompensator final : public Compensator {
public:
    explicit ZeroCompensator(std::size_t nx) : nx_(nx) {}
    Vec before_solve(std::size_t, std::span<const double>, std::span<const double>) override {
        return Vec(nx_, 0.0);
    }
    void after_step(std::size_t, const DatasetRow&) override {}

private:
    std::size_t nx_;
};

struct LoopResult {
    Dataset dataset;
    RunLog log;
};

inline LoopResult run_closed_loop(const ExperimentConfig& cfg, Compensator& compensator, std::string phase) {
    cfg.validate();
    const LinearModel model = discretize(cfg.plant);
    const ResidualSelector sel = cfg.selector();
    const MpcSolver solver(model, cfg.mpc);
    const std::size_t nx = model.state_dim();
    const std::size_t nu = model.input_dim();

    LoopResult out;
    out.dataset.phase = std::move(phase);
    out.dataset.seed = cfg.seed;
    out.dataset.config_hash = config_hash(cfg);
    out.dataset.rows.reserve(cfg.sim_steps);
    out.log.records.reserve(cfg.sim_steps);

    Vec x = cfg.x0;
    Vec u_guess(nu, 0.0);
    for (std::size_t k = 0; k < cfg.sim_steps; ++k) {
        const Vec comp = compensator.before_solve(k, x, u_guess);
        MpcSolver::StepResult step;
        try {
            step = solver.step(x, constant_compensation(cfg.mpc.horizon, comp));
        } catch (const Error& e) {
            throw Error(out.dataset.phase + ": step " + std::to_string(k) + ": " + e.what());
        }
        const Vec& u = step.u0;

        const Vec x_nom_next = nominal_step(model, x, u);
        Vec x_pred = x_nom_next;
        for (std::size_t i = 0; i < nx; ++i) x_pred[i] += comp[i];
        Vec x_next = true_step(cfg.residual, model, cfg.plant, x, u);
        if (!all_finite(x_next)) {
            throw Error(out.dataset.phase + ": non-finite plant state at step " + std::to_string(k));
        }

        DatasetRow row{k, regressor(sel, x, u), residual_target(sel, x_next, x_nom_next)};
        StepRecord rec{k,
                       static_cast<double>(k) * cfg.plant.dt,
                       x,
                       std::move(x_pred),
                       u,
                       sub(x_next, x_nom_next),
                       comp,
                       stage_cost(cfg.mpc, x, u)};
        compensator.after_step(k, row);
        out.dataset.rows.push_back(std::move(row));
        out.log.records.push_back(std::move(rec));

        u_guess = step.solution.u_seq.size() > 1 ? step.solution.u_seq[1] : step.solution.u_seq[0];
        x = std::move(x_next);
    }
    out.log.x_final = x;
    return out;
}

}  // namespace detail

/// Phase 1: nominal MPC (zero compensation) driving the true plant.
inline std::pair<Dataset, RunLog> collect_phase(const ExperimentConfig& cfg) {
    detail::ZeroCompensator zero(cfg.x0.size());
    auto r = detail::run_closed_loop(cfg, zero, "collect");
    return {std::move(r.dataset), std::move(r.log)};
}

struct TrainReport {
    std::size_t samples = 0;       // pairs in the dataset
    std::size_t fit_columns = 0;   // columns left after washout
    std::size_t washout = 0;
    double beta = 0.0;
    Vec nrmse;                     // per residual dimension, training set
    std::string config_hash;
};

struct TrainResult {
    EsnWeights weights;
    TrainReport report;
};

/// Harvests the reservoir over z(0..T-1) and regresses the state after z(k)
/// onto mu(k+1), skipping the first `washout` pairs.
inline TrainResult train_with_report(const ExperimentConfig& cfg, std::span<const DatasetRow> rows,
                                     const EsnWeights& base) {
    const std::size_t washout = cfg.esn.washout;
    if (rows.size() <= washout) {
        throw Error("train_phase: dataset length " + std::to_string(rows.size()) + " must exceed washout " +
                    std::to_string(washout));
    }
    std::vector<Vec> inputs;
    inputs.reserve(rows.size());
    for (const auto& r : rows) inputs.push_back(r.z);
    const Mat states = harvest(base, inputs, washout);

    const std::size_t n_out = base.config.output_dim;
    Mat targets(n_out, rows.size() - washout);
    for (std::size_t c = 0; c < targets.cols(); ++c) {
        const auto& mu = rows[washout + c].mu;
        if (mu.size() != n_out) throw Error("train_phase: target dimension mismatch");
        for (std::size_t i = 0; i < n_out; ++i) targets(i, c) = mu[i];
    }

    TrainResult result;
    result.weights = fit_readout(base, states, targets, cfg.esn.beta);
    const Mat fitted = matmul(result.weights.w_out, states);
    result.report.samples = rows.size();
    result.report.fit_columns = targets.cols();
    result.report.washout = washout;
    result.report.beta = cfg.esn.beta;
    result.report.config_hash = config_hash(cfg);
    for (std::size_t i = 0; i < n_out; ++i) result.report.nrmse.push_back(nrmse(targets.row(i), fitted.row(i)));
    return result;
}

inline TrainResult train_with_report(const ExperimentConfig& cfg, const Dataset& dataset) {
    return train_with_report(cfg, dataset.rows, init(cfg.esn_config()));
}

inline EsnWeights train_phase(const ExperimentConfig& cfg, const Dataset& dataset) {
    return train_with_report(cfg, dataset).weights;
}

namespace detail {

class EsnCompensator final : public Compensator {
public:
    EsnCompensator(const ExperimentConfig& cfg, EsnWeights weights, const Dataset* prior)
        : cfg_(cfg),
          sel_(cfg.selector()),
          weights_(std::move(weights)),
          state_(EsnState::zero(weights_.config.reservoir_size)),
          z_prev_(sel_.regressor_dim(), 0.0) {
        if (!weights_.trained) throw Error("compensated_phase: readout not fitted");
        if (prior) accumulated_ = prior->rows;
    }

    Vec before_solve(std::size_t, std::span<const double> x, std::span<const double> u_guess) override {
        Vec d_hat;
        if (cfg_.alignment == CompensationAlignment::lagged) {
            auto p = predict(weights_, state_, z_prev_);
            state_ = std::move(p.next_state);
            d_hat = std::move(p.y);
        } else {
            d_hat = predict(weights_, state_, regressor(sel_, x, u_guess)).y;
        }
        return apply_residual(sel_, d_hat);
    }

    void after_step(std::size_t k, const DatasetRow& row) override {
        if (cfg_.alignment == CompensationAlignment::predictive) {
            state_ = step(weights_, state_, row.z);
        } else {
            z_prev_ = row.z;
        }
        if (!cfg_.retrain_every) return;
        DatasetRow shifted = row;
        shifted.k = accumulated_.size();
        accumulated_.push_back(std::move(shifted));
        if ((k + 1) % *cfg_.retrain_every == 0 && accumulated_.size() > cfg_.esn.washout) {
            // W_in and W_res are seed-determined, so the running state stays valid.
            weights_ = train_with_report(cfg_, accumulated_, weights_).weights;
        }
    }

private:
    const ExperimentConfig& cfg_;
    ResidualSelector sel_;
    EsnWeights weights_;
    EsnState state_;
    Vec z_prev_;
    std::vector<DatasetRow> accumulated_;
};

}  // namespace detail

/// Phase 2: MPC with the ESN residual estimate added to the nominal model.
/// `prior` seeds the retraining pool when retrain_every is set.
inline RunLog compensated_phase(const ExperimentConfig& cfg, const EsnWeights& weights,
                                const Dataset* prior = nullptr) {
    detail::EsnCompensator comp(cfg, weights, prior);
    return detail::run_closed_loop(cfg, comp, "compensated").log;
}

struct PredictionRow {
    std::size_t k = 0;
    Vec mu_true;
    Vec mu_pred;
};

using PredictionTable = std::vector<PredictionRow>;

/// Fits on the first `train_len` pairs, then predicts the next `horizon`
/// residuals with the recorded regressors as teacher-forced inputs.
inline PredictionTable openloop_predict(const ExperimentConfig& cfg, const EsnWeights& base, const Dataset& dataset,
                                        std::size_t train_len, std::size_t horizon) {
    if (train_len + horizon > dataset.size()) {
        throw Error("openloop_predict: train_len + horizon exceeds dataset length " + std::to_string(dataset.size()));
    }
    if (train_len <= cfg.esn.washout) throw Error("openloop_predict: train_len must exceed washout");
    PredictionTable table;
    if (horizon == 0) return table;

    const std::span<const DatasetRow> rows(dataset.rows);
    const auto train = train_with_report(cfg, rows.first(train_len), base);

    std::vector<Vec> inputs;
    for (const auto& r : rows.first(train_len)) inputs.push_back(r.z);
    EsnState state = harvest_with_state(train.weights, inputs, cfg.esn.washout).final_state;

    for (std::size_t i = 0; i < horizon; ++i) {
        const auto& row = rows[train_len + i];
        auto p = predict(train.weights, state, row.z);
        table.push_back({row.k, row.mu, p.y});
        state = std::move(p.next_state);
    }
    return table;
}

/// Per-dimension NRMSE of a prediction table.
inline Vec prediction_nrmse(const PredictionTable& table) {
    if (table.empty()) return {};
    const std::size_t n = table.front().mu_true.size();
    Vec out;
    for (std::size_t d = 0; d < n; ++d) {
        Vec t, p;
        for (const auto& r : table) {
            t.push_back(r.mu_true[d]);
            p.push_back(r.mu_pred[d]);
        }
        out.push_back(nrmse(t, p));
    }
    return out;
}

/// First k after which ||x - r||_inf stays below `band` through the final state.
inline std::optional<std::size_t> settling_step(const RunLog& log, std::span<const double> reference,
                                                double band = 0.1) {
    auto inside = [&](std::span<const double> x) {
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!(std::abs(x[i] - reference[i]) < band)) return false;
        return true;
    };
    if (!log.x_final.empty() && !inside(log.x_final)) return std::nullopt;
    std::optional<std::size_t> settled = log.records.size();
    for (std::size_t i = log.records.size(); i-- > 0;) {
        if (!inside(log.records[i].x_true)) break;
        settled = i;
    }
    return settled;
}

struct Metrics {
    double nominal_cost = 0.0;
    double compensated_cost = 0.0;
    double cost_ratio = 1.0;
    double nominal_rms_mu = 0.0;
    double compensated_rms_mu = 0.0;
    double error_ratio = 1.0;
    std::optional<std::size_t> settling_step_nominal;
    std::optional<std::size_t> settling_step_compensated;
};

namespace detail {
inline double safe_ratio(double num, double den) {
    if (num == den) return 1.0;
    return num / den;
}
}  // namespace detail

inline Metrics metrics(const RunLog& nominal_log, const RunLog& compensated_log, std::span<const double> reference) {
    if (nominal_log.records.size() != compensated_log.records.size()) {
        throw Error("metrics: run logs have different step counts");
    }
    Metrics m;
    m.nominal_cost = nominal_log.cumulative_cost();
    m.compensated_cost = compensated_log.cumulative_cost();
    m.cost_ratio = detail::safe_ratio(m.compensated_cost, m.nominal_cost);
    m.nominal_rms_mu = nominal_log.rms_model_error();
    m.compensated_rms_mu = compensated_log.rms_model_error();
    m.error_ratio = detail::safe_ratio(m.compensated_rms_mu, m.nominal_rms_mu);
    m.settling_step_nominal = settling_step(nominal_log, reference);
    m.settling_step_compensated = settling_step(compensated_log, reference);
    return m;
}

struct PipelineResult {
    Dataset dataset;
    RunLog nominal_log;
    TrainResult training;
    RunLog compensated_log;
    PredictionTable prediction;
    Metrics summary;
};

/// Collect, train, compensated run, open-loop prediction and metrics.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    PipelineResult r;
    std::tie(r.dataset, r.nominal_log) = collect_phase(cfg);
    const EsnWeights base = init(cfg.esn_config());
    r.training = train_with_report(cfg, r.dataset.rows, base);
    r.compensated_log = compensated_phase(cfg, r.training.weights, &r.dataset);
    r.prediction = openloop_predict(cfg, base, r.dataset, cfg.predict_train_len, cfg.predict_horizon);
    r.summary = metrics(r.nominal_log, r.compensated_log, cfg.mpc.reference);
    return r;
}

}  // namespace esnmpc
