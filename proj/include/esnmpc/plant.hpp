#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "esnmpc/error.hpp"
#include "esnmpc/linalg.hpp"

namespace esnmpc {

/// Mass-spring-damper parameters and the sampling interval.
struct SpringDamperParams {
    double m = 1.0;
    double b = 0.5;
    double k = 10.0;
    double dt = 0.1;

    void validate(std::string_view prefix = "plant") const {
        const std::string p(prefix);
        if (!(m > 0.0) || !std::isfinite(m)) throw Error(p + ".m must be > 0");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(p + ".dt must be > 0");
        if (!(b >= 0.0) || !std::isfinite(b)) throw Error(p + ".b must be >= 0");
        if (!(k >= 0.0) || !std::isfinite(k)) throw Error(p + ".k must be >= 0");
    }

    friend bool operator==(const SpringDamperParams&, const SpringDamperParams&) = default;
};

struct LinearModel {
    Mat a;
    Mat b_mat;

    [[nodiscard]] std::size_t state_dim() const noexcept { return a.rows(); }
    [[nodiscard]] std::size_t input_dim() const noexcept { return b_mat.cols(); }
};

/// Forward-Euler discretisation of m x'' + b x' + k x = F with state [s, v].
inline LinearModel discretize(const SpringDamperParams& p) {
    p.validate();
    return {Mat{{1.0, p.dt}, {-(p.k / p.m) * p.dt, 1.0 - (p.b / p.m) * p.dt}}, Mat{{0.0}, {p.dt / p.m}}};
}

/// A x + B u.
inline Vec nominal_step(const LinearModel& model, std::span<const double> x, std::span<const double> u) {
    if (x.size() != model.state_dim() || u.size() != model.input_dim()) {
        throw Error("nominal_step: state/input length mismatch");
    }
    Vec next = matvec(model.a, x);
    const Vec bu = matvec(model.b_mat, u);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += bu[i];
    return next;
}

enum class ResidualKind { none, param_perturbation, cubic_spring, combined };

inline std::string_view to_string(ResidualKind k) {
    switch (k) {
        case ResidualKind::none: return "none";
        case ResidualKind::param_perturbation: return "param_perturbation";
        case ResidualKind::cubic_spring: return "cubic_spring";
        case ResidualKind::combined: return "combined";
    }
    return "none";
}

inline ResidualKind residual_kind_from_string(std::string_view s) {
    if (s == "none") return ResidualKind::none;
    if (s == "param_perturbation") return ResidualKind::param_perturbation;
    if (s == "cubic_spring") return ResidualKind::cubic_spring;
    if (s == "combined") return ResidualKind::combined;
    throw Error("residual.kind: unknown value '" + std::string(s) + "'");
}

/// Ground-truth dynamics the nominal model does not capture.
struct ResidualSpec {
    ResidualKind kind = ResidualKind::combined;
    SpringDamperParams true_params{1.0, 0.5, 20.0, 0.1};
    double alpha = 0.005;  // cubic stiffness, N/m^3

    friend bool operator==(const ResidualSpec&, const ResidualSpec&) = default;
};

/// One step of the true plant.
///
/// The cubic term uses the nominal mass for `cubic_spring` and the true mass
/// for `combined`. Position updates are the same forward-Euler row as the
/// nominal model, so the position residual is zero whenever dt matches.
inline Vec true_step(const ResidualSpec& spec, const LinearModel& nominal, const SpringDamperParams& nominal_params,
                     std::span<const double> x, std::span<const double> u) {
    switch (spec.kind) {
        case ResidualKind::none:
            return nominal_step(nominal, x, u);
        case ResidualKind::param_perturbation:
            return nominal_step(discretize(spec.true_params), x, u);
        case ResidualKind::cubic_spring: {
            Vec next = nominal_step(nominal, x, u);
            next[1] -= (spec.alpha / nominal_params.m) * nominal_params.dt * x[0] * x[0] * x[0];
            return next;
        }
        case ResidualKind::combined: {
            Vec next = nominal_step(discretize(spec.true_params), x, u);
            next[1] -= (spec.alpha / spec.true_params.m) * spec.true_params.dt * x[0] * x[0] * x[0];
            return next;
        }
    }
    throw Error("true_step: invalid residual kind");
}

/// B_n maps residual features into state space; B_z picks regressors from [x; u].
class ResidualSelector {
public:
    ResidualSelector(Mat b_n, Mat b_z) : b_n_(std::move(b_n)), b_z_(std::move(b_z)) {
        // Left pseudo-inverse (B_n^T B_n)^{-1} B_n^T; the factorisation fails
        // exactly when B_n lacks full column rank.
        try {
            const Cholesky chol(matmul_tn(b_n_, b_n_));
            Mat pinv_t = b_n_;  // rows of B_n solved against the Gram matrix
            for (std::size_t i = 0; i < pinv_t.rows(); ++i) chol.solve_in_place(pinv_t.row(i));
            b_n_pinv_ = pinv_t.transpose();
        } catch (const Error&) {
            throw Error("selector.b_n must have full column rank, got " + b_n_.shape());
        }
    }

    static ResidualSelector identity(std::size_t nx, std::size_t nu) {
        return {Mat::identity(nx), Mat::identity(nx + nu)};
    }

    [[nodiscard]] const Mat& b_n() const noexcept { return b_n_; }
    [[nodiscard]] const Mat& b_z() const noexcept { return b_z_; }
    [[nodiscard]] const Mat& b_n_pinv() const noexcept { return b_n_pinv_; }
    [[nodiscard]] std::size_t residual_dim() const noexcept { return b_n_.cols(); }
    [[nodiscard]] std::size_t regressor_dim() const noexcept { return b_z_.rows(); }

private:
    Mat b_n_;
    Mat b_z_;
    Mat b_n_pinv_;
};

/// B_n^+ (x_true_next - x_nom_next).
inline Vec residual_target(const ResidualSelector& sel, std::span<const double> x_true_next,
                           std::span<const double> x_nom_next) {
    if (x_true_next.size() != sel.b_n().rows() || x_nom_next.size() != sel.b_n().rows()) {
        throw Error("residual_target: state length mismatch");
    }
    return matvec(sel.b_n_pinv(), sub(x_true_next, x_nom_next));
}

/// B_z [x; u].
inline Vec regressor(const ResidualSelector& sel, std::span<const double> x, std::span<const double> u) {
    Vec xu(x.begin(), x.end());
    xu.insert(xu.end(), u.begin(), u.end());
    return matvec(sel.b_z(), xu);
}

/// B_n d, the state-space compensation for a residual feature vector.
inline Vec apply_residual(const ResidualSelector& sel, std::span<const double> d) { return matvec(sel.b_n(), d); }

}  // namespace esnmpc
