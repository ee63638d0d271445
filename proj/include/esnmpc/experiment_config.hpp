#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "esnmpc/esn.hpp"
#include "esnmpc/mpc.hpp"
#include "esnmpc/plant.hpp"

namespace esnmpc {

/// How the Phase-2 reservoir produces the compensation for step k -> k+1.
///
/// `predictive`: the persistent state is stepped hypothetically with
/// z(k) = B_z [x(k); u_guess], u_guess being the previous plan's second input,
/// and the readout of that state is used. This matches training, where the
/// state after z(k) is regressed on mu(k+1).
/// `lagged`: the persistent state is advanced with z(k-1) and its readout used
/// directly, one step behind the training alignment.
enum class CompensationAlignment { predictive, lagged };

inline std::string_view to_string(CompensationAlignment a) {
    return a == CompensationAlignment::predictive ? "predictive" : "lagged";
}

inline CompensationAlignment alignment_from_string(std::string_view s) {
    if (s == "predictive") return CompensationAlignment::predictive;
    if (s == "lagged") return CompensationAlignment::lagged;
    throw Error("experiment.compensation: unknown value '" + std::string(s) + "'");
}

struct ExperimentConfig {
    SpringDamperParams plant;
    ResidualSpec residual;
    Mat b_n = Mat::identity(2);
    Mat b_z = Mat::identity(3);
    EsnConfig esn;
    MpcConfig mpc;
    std::size_t sim_steps = 100;
    Vec x0{10.0, 0.0};
    std::optional<std::size_t> retrain_every;
    CompensationAlignment alignment = CompensationAlignment::predictive;
    std::uint64_t seed = 42;
    std::size_t predict_train_len = 70;
    std::size_t predict_horizon = 30;

    /// EsnConfig with the dimensions and seed implied by the experiment.
    [[nodiscard]] EsnConfig esn_config() const {
        EsnConfig c = esn;
        c.input_dim = b_z.rows();
        c.output_dim = b_n.cols();
        c.seed = seed;
        return c;
    }

    [[nodiscard]] ResidualSelector selector() const { return ResidualSelector(b_n, b_z); }

    void validate() const {
        plant.validate("plant");
        residual.true_params.validate("residual");
        if (!std::isfinite(residual.alpha)) throw Error("residual.alpha must be finite");
        esn_config().validate();
        mpc.validate();
        constexpr std::size_t nx = 2;
        constexpr std::size_t nu = 1;
        if (mpc.q_diag.size() != nx) throw Error("mpc.q_diag must have 2 entries");
        if (x0.size() != nx) throw Error("experiment.x0 must have 2 entries");
        if (b_n.rows() != nx) throw Error("selector.b_n must have 2 rows");
        if (b_z.cols() != nx + nu) throw Error("selector.b_z must have 3 columns");
        (void)selector();
        if (sim_steps < esn.washout + 2) throw Error("experiment.steps must be >= esn.washout + 2");
        if (retrain_every && *retrain_every == 0) throw Error("experiment.retrain_every must be >= 1");
        if (predict_train_len <= esn.washout) throw Error("predict.train_len must exceed esn.washout");
        if (predict_train_len + predict_horizon > sim_steps) {
            throw Error("predict.train_len + predict.horizon must not exceed experiment.steps");
        }
    }
};

}  // namespace esnmpc
