#include <gtest/gtest.h>

#include <cmath>

#include "esnmpc/experiment.hpp"

using namespace esnmpc;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.esn.reservoir_size = 200;
    return c;
}

const PipelineResult& benchmark_pipeline() {
    static const PipelineResult r = run_pipeline(ExperimentConfig{});
    return r;
}

}  // namespace

TEST(Collect, NoResidualGivesZeroTargets) {
    ExperimentConfig cfg = small_config();
    cfg.residual.kind = ResidualKind::none;
    const auto [ds, log] = collect_phase(cfg);
    ASSERT_EQ(ds.size(), cfg.sim_steps);
    ASSERT_EQ(log.records.size(), cfg.sim_steps);
    for (const auto& row : ds.rows) EXPECT_EQ(row.mu, (Vec{0, 0})) << "k=" << row.k;
}

TEST(Collect, DatasetLengthFollowsSteps) {
    ExperimentConfig cfg = small_config();
    cfg.sim_steps = 45;
    cfg.predict_train_len = 40;
    cfg.predict_horizon = 5;
    const auto [ds, log] = collect_phase(cfg);
    EXPECT_EQ(ds.size(), 45u);
    for (std::size_t k = 0; k < ds.size(); ++k) EXPECT_EQ(ds.rows[k].k, k);
}

TEST(Collect, FirstRegressorIsInitialStateAndFirstInput) {
    const auto [ds, log] = collect_phase(ExperimentConfig{});
    ASSERT_EQ(ds.rows[0].z.size(), 3u);
    EXPECT_EQ(ds.rows[0].z[0], 10.0);
    EXPECT_EQ(ds.rows[0].z[1], 0.0);
    EXPECT_NEAR(ds.rows[0].z[2], 4.945767384198596, 1e-6);
}

TEST(Collect, LogReplaysAgainstIndependentSimulation) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, log] = collect_phase(cfg);
    const LinearModel m = discretize(cfg.plant);
    const double k_true = cfg.residual.true_params.k, b_true = cfg.residual.true_params.b;
    const double m_true = cfg.residual.true_params.m, dt = cfg.plant.dt;
    ASSERT_EQ(log.records.front().x_true, cfg.x0);
    for (std::size_t k = 0; k < log.records.size(); ++k) {
        const auto& rec = log.records[k];
        const Vec& x = rec.x_true;
        EXPECT_EQ(rec.u, mpc_step(m, cfg.mpc, x, zero_compensation(cfg.mpc.horizon, 2)).u0);
        const double u = rec.u[0];
        const double s = x[0] + dt * x[1];
        const double v = x[1] + dt / m_true * (u - b_true * x[1] - k_true * x[0] - cfg.residual.alpha * x[0] * x[0] * x[0]);
        const Vec nom = nominal_step(m, x, rec.u);
        EXPECT_NEAR(rec.mu[0], s - nom[0], 1e-9);
        EXPECT_NEAR(rec.mu[1], v - nom[1], 1e-9);
        const Vec& next = k + 1 < log.records.size() ? log.records[k + 1].x_true : log.x_final;
        EXPECT_NEAR(next[0], s, 1e-9) << "k=" << k;
        EXPECT_NEAR(next[1], v, 1e-9) << "k=" << k;
    }
}

TEST(Collect, StageCostsSumToCumulativeCost) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, log] = collect_phase(cfg);
    double total = 0.0;
    for (const auto& r : log.records) {
        const double c = 1.0 * r.x_true[0] * r.x_true[0] + 0.1 * r.x_true[1] * r.x_true[1] + 0.1 * r.u[0] * r.u[0];
        EXPECT_NEAR(r.stage_cost, c, 1e-12 * std::max(1.0, c));
        total += c;
    }
    EXPECT_NEAR(log.cumulative_cost(), total, 1e-9 * total);
}

TEST(Collect, DivergentPlantReportsStep) {
    ExperimentConfig cfg = small_config();
    cfg.residual.kind = ResidualKind::cubic_spring;
    cfg.residual.alpha = 50.0;
    try {
        (void)collect_phase(cfg);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(Train, ZeroTargetsGiveZeroReadout) {
    ExperimentConfig cfg = small_config();
    cfg.residual.kind = ResidualKind::none;
    const auto [ds, log] = collect_phase(cfg);
    const EsnWeights w = train_phase(cfg, ds);
    EXPECT_TRUE(w.trained);
    for (double v : w.w_out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Train, ReportCountsColumnsAfterWashout) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, log] = collect_phase(cfg);
    const auto r = train_with_report(cfg, ds).report;
    EXPECT_EQ(r.samples, 100u);
    EXPECT_EQ(r.fit_columns, 70u);
    EXPECT_EQ(r.washout, 30u);
    EXPECT_EQ(r.config_hash, ds.config_hash);
}

TEST(Train, RejectsDatasetNotLongerThanWashout) {
    const ExperimentConfig cfg = small_config();
    auto [ds, log] = collect_phase(cfg);
    ds.rows.resize(30);
    EXPECT_THROW((void)train_phase(cfg, ds), Error);
}

TEST(Train, BenchmarkTrainingFitIsTight) {
    const auto& r = benchmark_pipeline();
    ASSERT_EQ(r.training.report.nrmse.size(), 2u);
    for (double e : r.training.report.nrmse) EXPECT_LT(e, 0.2);
}

TEST(Compensated, ZeroReadoutReproducesNominalRunBitwise) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, nominal] = collect_phase(cfg);
    EsnWeights w = init(cfg.esn_config());
    w.w_out = Mat(2, cfg.esn.reservoir_size + 1);
    w.trained = true;
    EXPECT_EQ(compensated_phase(cfg, w), nominal);
}

TEST(Compensated, ZeroResidualReproducesNominalRunBitwise) {
    ExperimentConfig cfg = small_config();
    cfg.residual.kind = ResidualKind::none;
    const auto [ds, nominal] = collect_phase(cfg);
    EXPECT_EQ(compensated_phase(cfg, train_phase(cfg, ds)), nominal);
}

TEST(Compensated, LaggedZeroReadoutAlsoReproducesNominal) {
    ExperimentConfig cfg = small_config();
    cfg.alignment = CompensationAlignment::lagged;
    const auto [ds, nominal] = collect_phase(cfg);
    EsnWeights w = init(cfg.esn_config());
    w.w_out = Mat(2, cfg.esn.reservoir_size + 1);
    w.trained = true;
    EXPECT_EQ(compensated_phase(cfg, w), nominal);
}

TEST(Compensated, UntrainedWeightsAreRejected) {
    const ExperimentConfig cfg = small_config();
    EXPECT_THROW((void)compensated_phase(cfg, init(cfg.esn_config())), Error);
}

TEST(Compensated, RecordedPredictionIncludesCompensation) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, nominal] = collect_phase(cfg);
    const RunLog log = compensated_phase(cfg, train_phase(cfg, ds));
    const LinearModel m = discretize(cfg.plant);
    for (const auto& r : log.records) {
        const Vec nom = nominal_step(m, r.x_true, r.u);
        EXPECT_NEAR(r.x_pred[0], nom[0] + r.compensation[0], 1e-12);
        EXPECT_NEAR(r.x_pred[1], nom[1] + r.compensation[1], 1e-12);
    }
}

TEST(Compensated, RetrainingRunStaysFinite) {
    ExperimentConfig cfg = small_config();
    cfg.retrain_every = 25;
    const auto [ds, nominal] = collect_phase(cfg);
    const RunLog log = compensated_phase(cfg, train_phase(cfg, ds), &ds);
    EXPECT_EQ(log.records.size(), cfg.sim_steps);
    EXPECT_TRUE(all_finite(log.x_final));
}

TEST(Compensated, BenchmarkImprovesOnNominal) {
    const auto& m = benchmark_pipeline().summary;
    EXPECT_LT(m.cost_ratio, 0.95);
    EXPECT_LT(m.error_ratio, 0.5);
}

TEST(OpenLoop, ZeroHorizonIsEmpty) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, log] = collect_phase(cfg);
    EXPECT_TRUE(openloop_predict(cfg, init(cfg.esn_config()), ds, 70, 0).empty());
}

TEST(OpenLoop, RejectsWindowBeyondDataset) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, log] = collect_phase(cfg);
    EXPECT_THROW((void)openloop_predict(cfg, init(cfg.esn_config()), ds, 80, 30), Error);
}

TEST(OpenLoop, TableCoversHeldOutSteps) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, log] = collect_phase(cfg);
    const auto table = openloop_predict(cfg, init(cfg.esn_config()), ds, 70, 30);
    ASSERT_EQ(table.size(), 30u);
    for (std::size_t i = 0; i < 30; ++i) {
        EXPECT_EQ(table[i].k, 70 + i);
        EXPECT_EQ(table[i].mu_true, ds.rows[70 + i].mu);
    }
}

TEST(OpenLoop, BenchmarkPredictionIsAccurate) {
    const Vec e = prediction_nrmse(benchmark_pipeline().prediction);
    ASSERT_EQ(e.size(), 2u);
    for (double v : e) EXPECT_LT(v, 0.5);
}

TEST(Nrmse, PerfectAndMeanPredictors) {
    const Vec t{1, 2, 3, 4};
    EXPECT_EQ(nrmse(t, t), 0.0);
    EXPECT_NEAR(nrmse(t, Vec{2.5, 2.5, 2.5, 2.5}), 1.0, 1e-15);
}

TEST(Nrmse, ConstantTarget) {
    EXPECT_EQ(nrmse(Vec{0, 0}, Vec{0, 0}), 0.0);
    EXPECT_TRUE(std::isinf(nrmse(Vec{0, 0}, Vec{0, 1})));
}

TEST(Metrics, IdenticalLogsGiveUnitRatios) {
    const ExperimentConfig cfg = small_config();
    const auto [ds, log] = collect_phase(cfg);
    const Metrics m = metrics(log, log, cfg.mpc.reference);
    EXPECT_EQ(m.cost_ratio, 1.0);
    EXPECT_EQ(m.error_ratio, 1.0);
    EXPECT_EQ(m.settling_step_nominal, m.settling_step_compensated);
}

TEST(Metrics, RejectsDifferentLengths) {
    const auto [ds, log] = collect_phase(small_config());
    RunLog shorter = log;
    shorter.records.pop_back();
    EXPECT_THROW((void)metrics(log, shorter, Vec{0, 0}), Error);
}

TEST(Settling, FirstStepOfFinalStretchInsideBand) {
    RunLog log;
    for (double s : {5.0, 0.5, 0.05, 0.2, 0.05, 0.01}) log.records.push_back(StepRecord{0, 0, Vec{s, 0}, {}, {}, {}, {}, 0});
    log.x_final = {0.0, 0.0};
    EXPECT_EQ(settling_step(log, Vec{0, 0}), 4u);
    log.x_final = {1.0, 0.0};
    EXPECT_FALSE(settling_step(log, Vec{0, 0}).has_value());
}

TEST(Pipeline, IsDeterministic) {
    const ExperimentConfig cfg = small_config();
    const auto a = run_pipeline(cfg);
    const auto b = run_pipeline(cfg);
    EXPECT_EQ(a.dataset.rows, b.dataset.rows);
    EXPECT_EQ(a.nominal_log, b.nominal_log);
    EXPECT_EQ(a.compensated_log, b.compensated_log);
    EXPECT_EQ(a.training.weights.w_out, b.training.weights.w_out);
}

TEST(Pipeline, SeedChangesReservoirButNotNominalRun) {
    ExperimentConfig a = small_config(), b = small_config();
    b.seed = 7;
    const auto ra = run_pipeline(a), rb = run_pipeline(b);
    EXPECT_EQ(ra.nominal_log, rb.nominal_log);
    EXPECT_NE(ra.training.weights.w_out, rb.training.weights.w_out);
}
