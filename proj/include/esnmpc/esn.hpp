#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "esnmpc/error.hpp"
#include "esnmpc/linalg.hpp"
#include "esnmpc/rng.hpp"

namespace esnmpc {

struct EsnConfig {
    std::size_t reservoir_size = 1500;
    std::size_t input_dim = 3;
    std::size_t output_dim = 2;
    double leak_rate = 0.4;
    double spectral_radius = 1.0;
    std::size_t degree = 3;  // nonzeros per reservoir row
    double input_scale = 1.0;
    double beta = 1e-4;
    std::size_t washout = 30;
    std::uint64_t seed = 42;

    void validate() const {
        if (reservoir_size == 0) throw Error("esn.reservoir_size must be >= 1");
        if (input_dim == 0) throw Error("esn.input_dim must be >= 1");
        if (output_dim == 0) throw Error("esn.output_dim must be >= 1");
        if (!(leak_rate > 0.0 && leak_rate <= 1.0)) throw Error("esn.leak_rate must lie in (0, 1]");
        if (!(spectral_radius > 0.0) || !std::isfinite(spectral_radius)) {
            throw Error("esn.spectral_radius must be > 0");
        }
        if (degree < 1 || degree > reservoir_size) throw Error("esn.degree must lie in [1, reservoir_size]");
        if (!(input_scale > 0.0) || !std::isfinite(input_scale)) throw Error("esn.input_scale must be > 0");
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error("esn.beta must be >= 0");
    }

    friend bool operator==(const EsnConfig&, const EsnConfig&) = default;
};

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Square sparse matrix as (row, col, value) triplets sorted by row, then column.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t n, std::vector<Triplet> entries) : n_(n), entries_(std::move(entries)) {
        for (const auto& e : entries_) {
            if (e.row >= n_ || e.col >= n_) throw Error("SparseMatrix: triplet index out of range");
        }
        std::sort(entries_.begin(), entries_.end(),
                  [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t nonzeros() const noexcept { return entries_.size(); }
    [[nodiscard]] std::span<const Triplet> entries() const noexcept { return entries_; }

    [[nodiscard]] Vec apply(std::span<const double> x) const {
        Vec y(n_, 0.0);
        for (const auto& e : entries_) y[e.row] += e.value * x[e.col];
        return y;
    }

    void scale(double s) noexcept {
        for (auto& e : entries_) e.value *= s;
    }

    [[nodiscard]] Mat to_dense() const {
        Mat m(n_, n_);
        for (const auto& e : entries_) m(e.row, e.col) += e.value;
        return m;
    }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<Triplet> entries_;
};

inline SpectralRadiusResult spectral_radius(const SparseMatrix& m, std::size_t max_iters = 100000,
                                            double tol = 1e-12) {
    return spectral_radius_of([&m](std::span<const double> x) { return m.apply(x); }, m.size(), max_iters, tol);
}

struct EsnWeights {
    EsnConfig config;
    Mat w_in;          // reservoir_size x input_dim
    SparseMatrix w_res;
    Mat w_out;         // output_dim x (reservoir_size + 1), trailing bias column
    bool trained = false;

    friend bool operator==(const EsnWeights&, const EsnWeights&) = default;
};

struct EsnState {
    Vec s;

    static EsnState zero(std::size_t n) { return {Vec(n, 0.0)}; }
    friend bool operator==(const EsnState&, const EsnState&) = default;
};

/// Draws the fixed input and reservoir weights from `config.seed`.
/// The readout starts zero-filled and untrained.
inline EsnWeights init(const EsnConfig& config) {
    config.validate();
    const std::size_t n = config.reservoir_size;
    Rng rng(config.seed);

    EsnWeights w;
    w.config = config;
    w.w_in = Mat(n, config.input_dim);
    for (double& v : w.w_in.data()) v = rng.uniform(-config.input_scale, config.input_scale);

    std::vector<Triplet> entries;
    entries.reserve(n * config.degree);
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < n; ++i) {
        cols.clear();
        while (cols.size() < config.degree) {
            const auto c = static_cast<std::size_t>(rng.below(n));
            if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
        }
        for (std::size_t c : cols) entries.push_back({i, c, rng.uniform(-1.0, 1.0)});
    }
    w.w_res = SparseMatrix(n, std::move(entries));

    const double raw = spectral_radius(w.w_res).value;
    if (!(raw >= 1e-12)) {
        throw Error("esn.init: degenerate reservoir draw (spectral radius " + std::to_string(raw) + "), reseed");
    }
    w.w_res.scale(config.spectral_radius / raw);

    w.w_out = Mat(config.output_dim, n + 1);
    w.trained = false;
    return w;
}

/// Leaky tanh update: s' = (1 - leak) s + leak tanh(W_res s + W_in z).
inline EsnState step(const EsnWeights& w, const EsnState& state, std::span<const double> z) {
    const std::size_t n = w.config.reservoir_size;
    if (z.size() != w.config.input_dim) {
        throw Error("esn.step: input length " + std::to_string(z.size()) + ", expected " +
                    std::to_string(w.config.input_dim));
    }
    if (state.s.size() != n) throw Error("esn.step: state length mismatch");

    Vec pre = w.w_res.apply(state.s);
    for (std::size_t i = 0; i < n; ++i) {
        auto wi = w.w_in.row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) acc += wi[k] * z[k];
        pre[i] += acc;
    }
    const double leak = w.config.leak_rate;
    EsnState next{Vec(n)};
    for (std::size_t i = 0; i < n; ++i) next.s[i] = (1.0 - leak) * state.s[i] + leak * std::tanh(pre[i]);
    if (!all_finite(next.s)) throw Error("esn.step: non-finite reservoir state");
    return next;
}

struct HarvestResult {
    Mat states;  // (reservoir_size + 1) x (T - washout), last row is the bias
    EsnState final_state;
};

/// Drives the reservoir from the zero state over `inputs` and keeps [s(t); 1]
/// for every t after the first `washout` steps.
inline HarvestResult harvest_with_state(const EsnWeights& w, std::span<const Vec> inputs, std::size_t washout) {
    const std::size_t t_total = inputs.size();
    if (t_total <= washout) {
        throw Error("esn.harvest: sequence length " + std::to_string(t_total) + " must exceed washout " +
                    std::to_string(washout));
    }
    const std::size_t n = w.config.reservoir_size;
    HarvestResult out{Mat(n + 1, t_total - washout), EsnState::zero(n)};
    for (std::size_t t = 0; t < t_total; ++t) {
        out.final_state = step(w, out.final_state, inputs[t]);
        if (t < washout) continue;
        const std::size_t c = t - washout;
        for (std::size_t i = 0; i < n; ++i) out.states(i, c) = out.final_state.s[i];
        out.states(n, c) = 1.0;
    }
    return out;
}

inline Mat harvest(const EsnWeights& w, std::span<const Vec> inputs, std::size_t washout) {
    return harvest_with_state(w, inputs, washout).states;
}

inline EsnWeights fit_readout(const EsnWeights& w, const Mat& harvested, const Mat& targets, double beta) {
    const std::size_t n = w.config.reservoir_size;
    if (harvested.rows() != n + 1) {
        throw Error("esn.fit_readout: harvested matrix " + harvested.shape() + " needs " + std::to_string(n + 1) +
                    " rows");
    }
    if (targets.rows() != w.config.output_dim || targets.cols() != harvested.cols()) {
        throw Error("esn.fit_readout: targets " + targets.shape() + " do not match harvested " + harvested.shape());
    }
    EsnWeights fitted = w;
    fitted.w_out = ridge_solve(harvested, targets, beta);
    fitted.trained = true;
    return fitted;
}

/// y = W_out [s; 1] for an already-advanced state.
inline Vec readout(const EsnWeights& w, const EsnState& state) {
    const std::size_t n = w.config.reservoir_size;
    Vec y(w.config.output_dim, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto wi = w.w_out.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += wi[j] * state.s[j];
        y[i] = acc + wi[n];
    }
    return y;
}

struct Prediction {
    Vec y;
    EsnState next_state;
};

inline Prediction predict(const EsnWeights& w, const EsnState& state, std::span<const double> z) {
    if (!w.trained) throw Error("esn.predict: readout not fitted");
    Prediction p;
    p.next_state = step(w, state, z);
    p.y = readout(w, p.next_state);
    return p;
}

}  // namespace esnmpc
