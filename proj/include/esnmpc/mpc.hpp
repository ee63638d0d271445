#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "esnmpc/error.hpp"
#include "esnmpc/linalg.hpp"
#include "esnmpc/plant.hpp"

namespace esnmpc {

enum class TerminalMode { riccati, q_copy };

inline std::string_view to_string(TerminalMode m) { return m == TerminalMode::riccati ? "riccati" : "q_copy"; }

inline TerminalMode terminal_mode_from_string(std::string_view s) {
    if (s == "riccati") return TerminalMode::riccati;
    if (s == "q_copy") return TerminalMode::q_copy;
    throw Error("mpc.terminal_mode: unknown value '" + std::string(s) + "'");
}

struct MpcConfig {
    std::size_t horizon = 20;
    Vec q_diag{1.0, 0.1};
    double r_scalar = 0.1;
    Vec reference{0.0, 0.0};
    TerminalMode terminal_mode = TerminalMode::riccati;
    std::optional<double> u_limit;
    std::size_t riccati_iters = 100000;

    void validate() const {
        if (horizon < 1) throw Error("mpc.horizon must be >= 1");
        if (q_diag.empty()) throw Error("mpc.q_diag must not be empty");
        for (double q : q_diag) {
            if (!(q >= 0.0) || !std::isfinite(q)) throw Error("mpc.q_diag entries must be >= 0");
        }
        if (!(r_scalar > 0.0) || !std::isfinite(r_scalar)) throw Error("mpc.r must be > 0");
        if (reference.size() != q_diag.size()) throw Error("mpc.reference length must match mpc.q_diag");
        if (u_limit && !(*u_limit >= 0.0)) throw Error("mpc.u_limit must be >= 0");
    }

    friend bool operator==(const MpcConfig&, const MpcConfig&) = default;
};

/// Per-step additive terms d(0..N-1) in state space.
using CompensationSequence = std::vector<Vec>;

inline CompensationSequence zero_compensation(std::size_t horizon, std::size_t nx) {
    return CompensationSequence(horizon, Vec(nx, 0.0));
}

inline CompensationSequence constant_compensation(std::size_t horizon, std::span<const double> d) {
    return CompensationSequence(horizon, Vec(d.begin(), d.end()));
}

struct MpcSolution {
    std::vector<Vec> u_seq;   // N inputs
    std::vector<Vec> x_pred;  // N + 1 states, x_pred[0] = x0
    double cost = 0.0;
};

/// Stacked prediction x(1..N) = s_x x0 + s_u u(0..N-1) + s_d d(0..N-1).
struct PredictionMatrices {
    Mat s_x;
    Mat s_u;
    Mat s_d;
};

inline PredictionMatrices build_prediction(const LinearModel& model, std::size_t horizon) {
    if (horizon < 1) throw Error("build_prediction: horizon must be >= 1");
    const std::size_t nx = model.state_dim();
    const std::size_t nu = model.input_dim();
    PredictionMatrices pm{Mat(horizon * nx, nx), Mat(horizon * nx, horizon * nu), Mat(horizon * nx, horizon * nx)};

    // powers[k] = A^k
    std::vector<Mat> powers{Mat::identity(nx)};
    for (std::size_t k = 1; k <= horizon; ++k) powers.push_back(matmul(model.a, powers.back()));
    std::vector<Mat> impulse;  // A^k B
    for (std::size_t k = 0; k < horizon; ++k) impulse.push_back(matmul(powers[k], model.b_mat));

    for (std::size_t i = 0; i < horizon; ++i) {
        for (std::size_t r = 0; r < nx; ++r) {
            for (std::size_t c = 0; c < nx; ++c) pm.s_x(i * nx + r, c) = powers[i + 1](r, c);
            for (std::size_t j = 0; j <= i; ++j) {
                for (std::size_t c = 0; c < nu; ++c) pm.s_u(i * nx + r, j * nu + c) = impulse[i - j](r, c);
                for (std::size_t c = 0; c < nx; ++c) pm.s_d(i * nx + r, j * nx + c) = powers[i - j](r, c);
            }
        }
    }
    return pm;
}

inline Mat terminal_weight(const LinearModel& model, const MpcConfig& config) {
    const Mat q = Mat::diag(config.q_diag);
    if (config.terminal_mode == TerminalMode::q_copy) return q;
    const Mat r = Mat::identity(model.input_dim()) * config.r_scalar;
    return riccati_recursion(model.a, model.b_mat, q, r, config.riccati_iters);
}

/// Objective value of a trajectory: stage costs for k < N plus terminal cost.
inline double trajectory_cost(const MpcConfig& config, const Mat& terminal, std::span<const Vec> x_pred,
                              std::span<const Vec> u_seq) {
    const std::size_t n = u_seq.size();
    double cost = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < config.q_diag.size(); ++i) {
            const double e = x_pred[k][i] - config.reference[i];
            cost += config.q_diag[i] * e * e;
        }
        for (double u : u_seq[k]) cost += config.r_scalar * u * u;
    }
    const Vec e = sub(x_pred[n], config.reference);
    cost += dot(e, matvec(terminal, e));
    return cost;
}

/// Condensed finite-horizon solver for a fixed (model, config).
///
/// The Hessian S_u^T Qbar S_u + R I is factored once; each solve is then a
/// gradient build plus two triangular solves. Immutable after construction.
class MpcSolver {
public:
    MpcSolver(LinearModel model, MpcConfig config) : model_(std::move(model)), config_(std::move(config)) {
        config_.validate();
        if (config_.q_diag.size() != model_.state_dim()) {
            throw Error("mpc.q_diag length " + std::to_string(config_.q_diag.size()) + " does not match state dim " +
                        std::to_string(model_.state_dim()));
        }
        const std::size_t n = config_.horizon;
        const std::size_t nx = model_.state_dim();
        pm_ = build_prediction(model_, n);
        terminal_ = terminal_weight(model_, config_);

        // Qbar = blkdiag(Q, ..., Q, P) over x(1..N).
        qbar_ = Mat(n * nx, n * nx);
        for (std::size_t k = 0; k + 1 < n; ++k)
            for (std::size_t i = 0; i < nx; ++i) qbar_(k * nx + i, k * nx + i) = config_.q_diag[i];
        for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < nx; ++j) qbar_((n - 1) * nx + i, (n - 1) * nx + j) = terminal_(i, j);

        qbar_su_t_ = matmul_tn(pm_.s_u, qbar_);  // S_u^T Qbar
        Mat hessian = matmul(qbar_su_t_, pm_.s_u);
        for (std::size_t i = 0; i < hessian.rows(); ++i) hessian(i, i) += config_.r_scalar;
        chol_.emplace(symmetrized(hessian));
    }

    [[nodiscard]] const LinearModel& model() const noexcept { return model_; }
    [[nodiscard]] const MpcConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Mat& terminal() const noexcept { return terminal_; }
    [[nodiscard]] const PredictionMatrices& prediction() const noexcept { return pm_; }

    [[nodiscard]] MpcSolution solve(std::span<const double> x0, const CompensationSequence& comp) const {
        const std::size_t n = config_.horizon;
        const std::size_t nx = model_.state_dim();
        const std::size_t nu = model_.input_dim();
        if (x0.size() != nx) throw Error("mpc.solve: initial state length mismatch");
        if (comp.size() != n) {
            throw Error("mpc.solve: compensation length " + std::to_string(comp.size()) + ", expected " +
                        std::to_string(n));
        }
        Vec d_stack(n * nx);
        for (std::size_t k = 0; k < n; ++k) {
            if (comp[k].size() != nx) throw Error("mpc.solve: compensation vector length mismatch");
            std::copy(comp[k].begin(), comp[k].end(), d_stack.begin() + static_cast<std::ptrdiff_t>(k * nx));
        }

        // Free response minus stacked reference.
        Vec free = matvec(pm_.s_x, x0);
        const Vec sd = matvec(pm_.s_d, d_stack);
        for (std::size_t i = 0; i < free.size(); ++i) free[i] += sd[i] - config_.reference[i % nx];

        Vec u = matvec(qbar_su_t_, free);
        chol_->solve_in_place(u);
        for (double& v : u) v = -v;
        if (!all_finite(u)) throw Error("mpc.solve: non-finite solution");

        MpcSolution sol;
        sol.u_seq.resize(n);
        sol.x_pred.reserve(n + 1);
        sol.x_pred.emplace_back(x0.begin(), x0.end());
        for (std::size_t k = 0; k < n; ++k) {
            sol.u_seq[k].assign(u.begin() + static_cast<std::ptrdiff_t>(k * nu),
                                u.begin() + static_cast<std::ptrdiff_t>((k + 1) * nu));
            Vec next = nominal_step(model_, sol.x_pred.back(), sol.u_seq[k]);
            for (std::size_t i = 0; i < nx; ++i) next[i] += comp[k][i];
            sol.x_pred.push_back(std::move(next));
        }
        sol.cost = trajectory_cost(config_, terminal_, sol.x_pred, sol.u_seq);
        if (!std::isfinite(sol.cost)) throw Error("mpc.solve: non-finite cost");
        return sol;
    }

    struct StepResult {
        Vec u0;
        MpcSolution solution;
    };

    /// Solves and returns the first input, saturated to u_limit when set.
    [[nodiscard]] StepResult step(std::span<const double> x0, const CompensationSequence& comp) const {
        StepResult r{{}, solve(x0, comp)};
        r.u0 = r.solution.u_seq.front();
        if (config_.u_limit) {
            const double lim = *config_.u_limit;
            for (double& v : r.u0) v = std::clamp(v, -lim, lim);
        }
        return r;
    }

private:
    LinearModel model_;
    MpcConfig config_;
    PredictionMatrices pm_;
    Mat terminal_;
    Mat qbar_;
    Mat qbar_su_t_;
    std::optional<Cholesky> chol_;
};

inline MpcSolution solve(const LinearModel& model, const MpcConfig& config, std::span<const double> x0,
                         const CompensationSequence& comp) {
    return MpcSolver(model, config).solve(x0, comp);
}

inline MpcSolver::StepResult mpc_step(const LinearModel& model, const MpcConfig& config, std::span<const double> x0,
                                      const CompensationSequence& comp) {
    return MpcSolver(model, config).step(x0, comp);
}

}  // namespace esnmpc
