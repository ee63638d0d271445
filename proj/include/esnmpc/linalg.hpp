#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "esnmpc/error.hpp"

namespace esnmpc {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;

    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) {
            throw Error("Mat: dimensions must be positive, got " + shape_string(rows, cols));
        }
    }

    Mat(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        if (rows_ == 0 || cols_ == 0) throw Error("Mat: empty initializer");
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) throw Error("Mat: ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Mat diag(std::span<const double> d) {
        Mat m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    static Mat column(std::span<const double> v) {
        Mat m(v.size(), 1);
        std::copy(v.begin(), v.end(), m.data_.begin());
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] std::string shape() const { return shape_string(rows_, cols_); }

    [[nodiscard]] Mat transpose() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    [[nodiscard]] Vec col(std::size_t j) const {
        Vec v(rows_);
        for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
        return v;
    }

    Mat& operator+=(const Mat& o) {
        require_same_shape(o, "operator+");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        require_same_shape(o, "operator-");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Mat& operator*=(double s) noexcept {
        for (double& x : data_) x *= s;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, double s) { return a *= s; }
    friend Mat operator*(double s, Mat a) { return a *= s; }

    friend bool operator==(const Mat&, const Mat&) = default;

    static std::string shape_string(std::size_t r, std::size_t c) {
        return std::to_string(r) + "x" + std::to_string(c);
    }

private:
    void require_same_shape(const Mat& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) {
            throw Error(std::string(op) + ": shape mismatch " + shape() + " vs " + o.shape());
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) {
        throw Error("matmul: dimension mismatch " + a.shape() + " * " + b.shape());
    }
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

inline Vec matvec(const Mat& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw Error("matvec: dimension mismatch " + a.shape() + " * " + std::to_string(x.size()));
    }
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        auto ai = a.row(i);
        for (std::size_t j = 0; j < x.size(); ++j) acc += ai[j] * x[j];
        y[i] = acc;
    }
    return y;
}

/// a * b^T without forming the transpose.
inline Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols() != b.cols()) {
        throw Error("matmul_nt: dimension mismatch " + a.shape() + " * (" + b.shape() + ")^T");
    }
    Mat c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto bj = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += ai[k] * bj[k];
            c(i, j) = acc;
        }
    }
    return c;
}

/// a^T * b without forming the transpose.
inline Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows()) {
        throw Error("matmul_tn: dimension mismatch (" + a.shape() + ")^T * " + b.shape());
    }
    Mat c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto ak = a.row(k);
        auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

inline double max_abs(const Mat& m) noexcept {
    double r = 0.0;
    for (double x : m.data()) r = std::max(r, std::abs(x));
    return r;
}

inline double frobenius_norm(const Mat& m) noexcept {
    double s = 0.0;
    for (double x : m.data()) s += x * x;
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> xs) noexcept {
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Mat symmetrized(const Mat& m) {
    Mat s = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    return s;
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Only the lower triangle of `m` is read.
class Cholesky {
public:
    explicit Cholesky(const Mat& m) : l_(m.rows(), m.cols()) {
        if (m.rows() != m.cols()) throw Error("cholesky: matrix not square: " + m.shape());
        const std::size_t n = m.rows();
        for (std::size_t j = 0; j < n; ++j) {
            double d = m(j, j);
            auto lj = l_.row(j);
            for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
            if (!(d > 0.0) || !std::isfinite(d)) {
                throw Error("cholesky: matrix not positive definite (pivot " + std::to_string(j) + ")");
            }
            const double ljj = std::sqrt(d);
            lj[j] = ljj;
            for (std::size_t i = j + 1; i < n; ++i) {
                auto li = l_.row(i);
                double s = m(i, j);
                for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
                li[j] = s / ljj;
            }
        }
    }

    [[nodiscard]] const Mat& factor() const noexcept { return l_; }

    /// Solves (L L^T) x = b in place.
    void solve_in_place(std::span<double> b) const {
        const std::size_t n = l_.rows();
        for (std::size_t i = 0; i < n; ++i) {
            auto li = l_.row(i);
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= li[k] * b[k];
            b[i] = s / li[i];
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = b[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * b[k];
            b[ii] = s / l_(ii, ii);
        }
    }

    [[nodiscard]] Vec solve(std::span<const double> b) const {
        Vec x(b.begin(), b.end());
        solve_in_place(x);
        return x;
    }

    /// Solves X (L L^T) = B for X, i.e. each row of B independently.
    [[nodiscard]] Mat solve_right(const Mat& b) const {
        if (b.cols() != l_.rows()) {
            throw Error("cholesky: right-hand side " + b.shape() + " incompatible with " + l_.shape());
        }
        Mat x = b;
        for (std::size_t i = 0; i < x.rows(); ++i) solve_in_place(x.row(i));
        return x;
    }

private:
    Mat l_;
};

/// Regularised least-squares readout: W = Y S^T (S S^T + beta I)^{-1}.
///
/// `s_matrix` is (d x T) with one regressor per column, `y_matrix` is (n x T).
/// For beta > 0 and T < d the equivalent T x T system Y (S^T S + beta I)^{-1} S^T
/// is factored instead. Both paths use a Cholesky factorisation.
inline Mat ridge_solve(const Mat& s_matrix, const Mat& y_matrix, double beta) {
    if (s_matrix.cols() != y_matrix.cols()) {
        throw Error("ridge_solve: sample count mismatch, S is " + s_matrix.shape() + ", Y is " + y_matrix.shape());
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error("ridge_solve: beta must be finite and >= 0");
    if (!all_finite(s_matrix.data()) || !all_finite(y_matrix.data())) {
        throw Error("ridge_solve: non-finite entries in inputs");
    }
    const std::size_t d = s_matrix.rows();
    const std::size_t t = s_matrix.cols();

    Mat w;
    try {
        if (beta > 0.0 && t < d) {
            Mat gram = matmul_tn(s_matrix, s_matrix);
            for (std::size_t i = 0; i < t; ++i) gram(i, i) += beta;
            const Cholesky chol(gram);
            w = matmul_nt(chol.solve_right(y_matrix), s_matrix);
        } else {
            Mat normal = matmul_nt(s_matrix, s_matrix);
            for (std::size_t i = 0; i < d; ++i) normal(i, i) += beta;
            const Cholesky chol(normal);
            w = chol.solve_right(matmul_nt(y_matrix, s_matrix));
        }
    } catch (const Error& e) {
        throw Error(std::string("ridge_solve: singular normal matrix (") + e.what() + ")");
    }
    if (!all_finite(w.data())) throw Error("ridge_solve: non-finite solution");
    return w;
}

struct SpectralRadiusResult {
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

namespace detail {

/// Largest eigenvalue magnitude of a real 2x2 matrix.
inline double max_abs_eig2(double a, double b, double c, double d) noexcept {
    const double tr = a + d;
    const double det = a * d - b * c;
    const double disc = tr * tr / 4.0 - det;
    if (disc < 0.0) return std::sqrt(std::max(det, 0.0));
    const double r = std::sqrt(disc);
    return std::max(std::abs(tr / 2.0 + r), std::abs(tr / 2.0 - r));
}

}  // namespace detail

/// Power-iteration estimate of the spectral radius of the operator `apply`
/// (y = M x) acting on vectors of length `n`.
///
/// Each iteration projects M onto span{x, Mx} and takes the larger Ritz value,
/// so a dominant complex-conjugate pair converges as well as a real one.
template <class Apply>
SpectralRadiusResult spectral_radius_of(Apply&& apply, std::size_t n, std::size_t max_iters, double tol) {
    if (max_iters == 0) throw Error("spectral_radius: max_iters must be >= 1");
    if (n == 0) throw Error("spectral_radius: empty operator");

    // Fixed deterministic start vector with no special structure.
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(1.0 + 2.0 * static_cast<double>(i));
    const double nx = norm2(x);
    for (double& v : x) v /= nx;

    SpectralRadiusResult result;
    double previous = -1.0;
    Vec q2(n);
    for (std::size_t it = 1; it <= max_iters; ++it) {
        Vec y = apply(std::span<const double>(x));
        const double ynorm = norm2(y);
        if (ynorm == 0.0) {
            result = {0.0, true, it};
            return result;
        }

        const double h11 = dot(x, y);
        for (std::size_t i = 0; i < n; ++i) q2[i] = y[i] - h11 * x[i];
        const double q2norm = norm2(q2);

        double estimate;
        if (q2norm <= 1e-12 * ynorm) {
            estimate = std::abs(h11);
        } else {
            for (double& v : q2) v /= q2norm;
            const Vec mq2 = apply(std::span<const double>(q2));
            // Rayleigh-Ritz on the orthonormal basis {x, q2}: H = Q^T M Q.
            const double h21 = q2norm;
            const double h12 = dot(x, mq2);
            const double h22 = dot(q2, mq2);
            estimate = detail::max_abs_eig2(h11, h12, h21, h22);
        }

        result.value = estimate;
        result.iterations = it;
        if (!std::isfinite(estimate)) throw Error("spectral_radius: non-finite estimate");
        if (previous >= 0.0 && std::abs(estimate - previous) < tol) {
            result.converged = true;
            return result;
        }
        previous = estimate;
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ynorm;
    }
    return result;
}

inline SpectralRadiusResult spectral_radius(const Mat& m, std::size_t max_iters = 10000, double tol = 1e-12) {
    if (m.rows() != m.cols()) throw Error("spectral_radius: matrix not square: " + m.shape());
    return spectral_radius_of([&m](std::span<const double> x) { return matvec(m, x); }, m.rows(), max_iters, tol);
}

/// Backward Riccati recursion P <- Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A,
/// starting from P = Q. Stops after `iters` steps or when successive iterates
/// differ by less than 1e-10 in max-norm.
inline Mat riccati_recursion(const Mat& a, const Mat& b, const Mat& q, const Mat& r, std::size_t iters) {
    const std::size_t nx = a.rows();
    if (a.cols() != nx || b.rows() != nx || q.rows() != nx || q.cols() != nx || r.rows() != b.cols() ||
        r.cols() != b.cols()) {
        throw Error("riccati_recursion: inconsistent shapes A " + a.shape() + ", B " + b.shape() + ", Q " + q.shape() +
                    ", R " + r.shape());
    }
    Mat p = q;
    for (std::size_t it = 0; it < iters; ++it) {
        const Mat pa = matmul(p, a);
        const Mat pb = matmul(p, b);
        Mat gram = r + matmul_tn(b, pb);
        const Mat btpa = matmul_tn(b, pa);
        Mat next;
        try {
            const Cholesky chol(symmetrized(gram));
            // K = (R + B^T P B)^{-1} B^T P A, solved column by column.
            Mat k = btpa;
            Mat kt = k.transpose();
            for (std::size_t i = 0; i < kt.rows(); ++i) chol.solve_in_place(kt.row(i));
            k = kt.transpose();
            next = q + matmul_tn(a, pa) - matmul_tn(btpa, k);
        } catch (const Error& e) {
            throw Error(std::string("riccati_recursion: ") + e.what());
        }
        next = symmetrized(next);
        if (!all_finite(next.data())) throw Error("riccati_recursion: non-finite iterate (divergent recursion)");
        const double change = max_abs(next - p);
        p = std::move(next);
        if (change < 1e-10) break;
    }
    return p;
}

/// State-feedback gain K = (R + B^T P B)^{-1} B^T P A.
inline Mat lqr_gain(const Mat& a, const Mat& b, const Mat& r, const Mat& p) {
    const Mat pb = matmul(p, b);
    const Cholesky chol(symmetrized(r + matmul_tn(b, pb)));
    Mat kt = matmul_tn(matmul(p, a), b);  // (B^T P A)^T = A^T P B
    for (std::size_t i = 0; i < kt.rows(); ++i) chol.solve_in_place(kt.row(i));
    return kt.transpose();
}

}  // namespace esnmpc
