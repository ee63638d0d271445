#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "esnmpc/mpc.hpp"
#include "oracles.hpp"

using namespace esnmpc;

namespace {

LinearModel benchmark_model() { return discretize({1.0, 0.5, 10.0, 0.1}); }

MpcConfig scalar_config() {
    MpcConfig c;
    c.horizon = 2;
    c.q_diag = {1.0};
    c.r_scalar = 1.0;
    c.reference = {0.0};
    c.terminal_mode = TerminalMode::q_copy;
    return c;
}

CompensationSequence random_comp(std::size_t n, std::mt19937_64& gen, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    CompensationSequence c(n, Vec(2));
    for (auto& v : c)
        for (double& x : v) x = d(gen);
    return c;
}

}  // namespace

TEST(BuildPrediction, SingleStep) {
    const LinearModel m = benchmark_model();
    const auto pm = build_prediction(m, 1);
    EXPECT_EQ(pm.s_x, m.a);
    EXPECT_EQ(pm.s_u, m.b_mat);
    EXPECT_EQ(pm.s_d, Mat::identity(2));
}

TEST(BuildPrediction, TwoStepExpansion) {
    const LinearModel m = benchmark_model();
    const auto pm = build_prediction(m, 2);
    const Vec x0{1.5, -0.5}, u{0.7, -1.1}, d{0.1, 0.2, -0.3, 0.05};
    Vec stacked = matvec(pm.s_x, x0);
    const Vec su = matvec(pm.s_u, u), sd = matvec(pm.s_d, d);
    for (std::size_t i = 0; i < 4; ++i) stacked[i] += su[i] + sd[i];

    // x(2) = A^2 x0 + A B u0 + B u1 + A d0 + d1
    const Mat a2 = oracle::triple_loop_matmul(m.a, m.a);
    const Mat ab = oracle::triple_loop_matmul(m.a, m.b_mat);
    for (std::size_t r = 0; r < 2; ++r) {
        double e = a2(r, 0) * x0[0] + a2(r, 1) * x0[1] + ab(r, 0) * u[0] + m.b_mat(r, 0) * u[1] +
                   m.a(r, 0) * d[0] + m.a(r, 1) * d[1] + d[2 + r];
        EXPECT_NEAR(stacked[2 + r], e, 1e-14);
    }
}

TEST(BuildPrediction, MemorylessDynamics) {
    const LinearModel m{Mat(2, 2), Mat{{0.5}, {2.0}}};
    const auto pm = build_prediction(m, 3);
    for (std::size_t r = 2; r < 6; ++r)
        for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(pm.s_x(r, c), 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t r = 0; r < 2; ++r)
                EXPECT_EQ(pm.s_u(2 * i + r, j), i == j ? m.b_mat(r, 0) : 0.0) << i << "," << j;
}

TEST(MpcSolve, AtReferenceEverythingIsZero) {
    const MpcConfig cfg;
    const auto sol = solve(benchmark_model(), cfg, Vec{0, 0}, zero_compensation(20, 2));
    for (const auto& u : sol.u_seq) EXPECT_EQ(u[0], 0.0);
    EXPECT_EQ(sol.cost, 0.0);
}

TEST(MpcSolve, RiccatiTerminalCostReproducesLqrGain) {
    const LinearModel m = benchmark_model();
    const MpcConfig cfg;
    const MpcSolver solver(m, cfg);
    const Mat q = Mat::diag(cfg.q_diag), r{{cfg.r_scalar}};
    const Mat p = riccati_recursion(m.a, m.b_mat, q, r, 100000);
    const Mat k = oracle::lqr_gain(m.a, m.b_mat, r, p);
    std::mt19937_64 gen(10);
    std::uniform_real_distribution<double> d(-10, 10);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec x0{d(gen), d(gen)};
        const auto sol = solver.solve(x0, zero_compensation(cfg.horizon, 2));
        EXPECT_NEAR(sol.u_seq[0][0], -(k(0, 0) * x0[0] + k(0, 1) * x0[1]), 1e-6);
    }
}

TEST(MpcSolve, ScalarToyMatchesGridSearch) {
    const LinearModel m{Mat{{1.0}}, Mat{{1.0}}};
    const MpcConfig cfg = scalar_config();
    const double x0 = 1.3;
    const auto sol = solve(m, cfg, Vec{x0}, CompensationSequence(2, Vec{0.0}));

    const double step = 1e-3;
    double best = INFINITY, bu0 = 0, bu1 = 0;
    for (double u0 = -2.0; u0 <= 2.0; u0 += step) {
        for (double u1 = -2.0; u1 <= 2.0; u1 += step) {
            const double x1 = x0 + u0, x2 = x1 + u1;
            const double c = x0 * x0 + u0 * u0 + x1 * x1 + u1 * u1 + x2 * x2;
            if (c < best) best = c, bu0 = u0, bu1 = u1;
        }
    }
    EXPECT_NEAR(sol.u_seq[0][0], bu0, step);
    EXPECT_NEAR(sol.u_seq[1][0], bu1, step);
    EXPECT_NEAR(sol.cost, best, 1e-5);
}

TEST(MpcSolve, RejectsWrongCompensationLength) {
    EXPECT_THROW((void)solve(benchmark_model(), MpcConfig{}, Vec{1, 0}, zero_compensation(19, 2)), Error);
}

TEST(MpcSolve, QCopyTerminalUsesQ) {
    MpcConfig cfg;
    cfg.terminal_mode = TerminalMode::q_copy;
    const MpcSolver s(benchmark_model(), cfg);
    EXPECT_EQ(s.terminal(), Mat::diag(cfg.q_diag));
}

TEST(MpcStep, AtReferenceInputIsZero) {
    const auto r = mpc_step(benchmark_model(), MpcConfig{}, Vec{0, 0}, zero_compensation(20, 2));
    EXPECT_EQ(r.u0[0], 0.0);
}

TEST(MpcStep, ZeroBoundForcesZeroInput) {
    MpcConfig cfg;
    cfg.u_limit = 0.0;
    const auto r = mpc_step(benchmark_model(), cfg, Vec{10, -3}, zero_compensation(20, 2));
    EXPECT_EQ(r.u0[0], 0.0);
    EXPECT_NE(r.solution.u_seq[0][0], 0.0);
}

TEST(MpcStep, BenchmarkFirstInputGolden) {
    // u0 = -K x0 with K from the DARE fixed point, computed once with an
    // independent dense implementation: 4.945767384198596.
    const auto r = mpc_step(benchmark_model(), MpcConfig{}, Vec{10, 0}, zero_compensation(20, 2));
    EXPECT_NEAR(r.u0[0], 4.945767384198596, 1e-6);
}

TEST(MpcProperty, ZeroCompensationIsNominal) {
    const MpcSolver s(benchmark_model(), MpcConfig{});
    const auto a = s.solve(Vec{3, 1}, zero_compensation(20, 2));
    const auto b = s.solve(Vec{3, 1}, zero_compensation(20, 2));
    EXPECT_EQ(a.u_seq, b.u_seq);
    EXPECT_EQ(a.x_pred, b.x_pred);
}

TEST(MpcProperty, SolutionIsAffineInCompensation) {
    const MpcSolver s(benchmark_model(), MpcConfig{});
    std::mt19937_64 gen(3);
    const Vec x0{4, -2};
    const auto base = s.solve(x0, zero_compensation(20, 2));
    for (int trial = 0; trial < 5; ++trial) {
        const auto c1 = random_comp(20, gen), c2 = random_comp(20, gen);
        CompensationSequence sum = c1;
        for (std::size_t k = 0; k < 20; ++k)
            for (std::size_t i = 0; i < 2; ++i) sum[k][i] += c2[k][i];
        const auto s1 = s.solve(x0, c1), s2 = s.solve(x0, c2), s12 = s.solve(x0, sum);
        for (std::size_t k = 0; k < 20; ++k) {
            const double lhs = s12.u_seq[k][0] - base.u_seq[k][0];
            const double rhs = (s1.u_seq[k][0] - base.u_seq[k][0]) + (s2.u_seq[k][0] - base.u_seq[k][0]);
            EXPECT_NEAR(lhs, rhs, 1e-8);
        }
    }
}

TEST(MpcProperty, PredictedTrajectoryReplays) {
    const LinearModel m = benchmark_model();
    const MpcSolver s(m, MpcConfig{});
    std::mt19937_64 gen(4);
    const auto comp = random_comp(20, gen, 2.0);
    const auto sol = s.solve(Vec{-6, 3}, comp);
    ASSERT_EQ(sol.x_pred.size(), 21u);
    EXPECT_EQ(sol.x_pred[0], (Vec{-6, 3}));
    Vec x = sol.x_pred[0];
    for (std::size_t k = 0; k < 20; ++k) {
        const double u = sol.u_seq[k][0];
        const Vec next{m.a(0, 0) * x[0] + m.a(0, 1) * x[1] + m.b_mat(0, 0) * u + comp[k][0],
                       m.a(1, 0) * x[0] + m.a(1, 1) * x[1] + m.b_mat(1, 0) * u + comp[k][1]};
        EXPECT_NEAR(next[0], sol.x_pred[k + 1][0], 1e-10);
        EXPECT_NEAR(next[1], sol.x_pred[k + 1][1], 1e-10);
        x = next;
    }
}

TEST(MpcProperty, SingleInputPerturbationNeverLowersCost) {
    const LinearModel m = benchmark_model();
    const MpcConfig cfg;
    const MpcSolver s(m, cfg);
    std::mt19937_64 gen(6);
    const auto comp = random_comp(20, gen);
    const Vec x0{7, 2};
    const auto sol = s.solve(x0, comp);
    for (std::size_t k = 0; k < 20; ++k) {
        for (double delta : {1e-4, -1e-4}) {
            auto u = sol.u_seq;
            u[k][0] += delta;
            std::vector<Vec> x{x0};
            for (std::size_t j = 0; j < 20; ++j) {
                Vec nx = nominal_step(m, x.back(), u[j]);
                nx[0] += comp[j][0];
                nx[1] += comp[j][1];
                x.push_back(nx);
            }
            EXPECT_GE(trajectory_cost(cfg, s.terminal(), x, u), sol.cost - 1e-8) << "k=" << k;
        }
    }
}

TEST(MpcProperty, RecedingHorizonConvergesOnNominalPlant) {
    const LinearModel m = benchmark_model();
    const MpcSolver s(m, MpcConfig{});
    Vec x{10, 0};
    for (int k = 0; k < 100; ++k) x = nominal_step(m, x, s.step(x, zero_compensation(20, 2)).u0);
    EXPECT_LT(std::max(std::abs(x[0]), std::abs(x[1])), 0.05);
}

TEST(MpcConfigValidation, RejectsBadValues) {
    MpcConfig c;
    c.r_scalar = 0.0;
    EXPECT_THROW(c.validate(), Error);
    c = MpcConfig{};
    c.horizon = 0;
    EXPECT_THROW(c.validate(), Error);
    c = MpcConfig{};
    c.q_diag = {1.0, -0.1};
    EXPECT_THROW(c.validate(), Error);
}
