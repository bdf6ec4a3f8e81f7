#pragma once

// Covariance formation and eigenvalue extraction.
//
// Eigenvalues of a (weighted, optionally centered) covariance are obtained
// from the squared singular values of the scaled data matrix
// Y = diag(sqrt(w)) (X - 1 mu^T), computed with Lanczos on the smaller of the
// two Gram operators Y^T Y / Y Y^T without materializing either. The dense
// p x p route (sample_covariance + full_spectrum) is kept as the reference.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <vector>

#include "errors.hpp"
#include "lanczos.hpp"

namespace hdboot {

using Eigen::Index;

class DataMatrix {
public:
    DataMatrix() = default;

    explicit DataMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
        detail::require(values_.rows() >= 2, "DataMatrix: need at least 2 observations (rows)");
        detail::require(values_.cols() >= 1, "DataMatrix: need at least 1 variable (column)");
        detail::require(values_.allFinite(), "DataMatrix: non-finite entry");
    }

    Index n() const noexcept { return values_.rows(); }
    Index p() const noexcept { return values_.cols(); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }

    DataMatrix scaled(double c) const { return DataMatrix(values_ * c); }

private:
    Eigen::MatrixXd values_;
};

enum class Divisor { NMinus1, N };

struct CovarianceOptions {
    bool center = true;
    Divisor divisor = Divisor::NMinus1;

    // 1/(n-1) (X - Xbar)^T (X - Xbar): the simulation convention.
    static constexpr CovarianceOptions sample() noexcept { return {true, Divisor::NMinus1}; }
    // (1/n) sum X_i X_i^T: the convention of the concentration and spiked-model theory.
    static constexpr CovarianceOptions uncentered() noexcept { return {false, Divisor::N}; }

    double divisor_value(Index n) const {
        const double d = divisor == Divisor::N ? static_cast<double>(n) : static_cast<double>(n - 1);
        detail::require(d > 0.0, "CovarianceOptions: divisor must be positive (n >= 2)");
        return d;
    }

    friend bool operator==(const CovarianceOptions&, const CovarianceOptions&) = default;
};

struct SpectralSummary {
    std::vector<double> eigenvalues;  // non-increasing
    Index k = 0;
    double trace = 0.0;
    Index p = 0;  // dimension of the matrix the eigenvalues came from

    double operator[](std::size_t i) const { return eigenvalues.at(i); }
    bool complete() const noexcept { return k == p && p > 0; }
};

namespace detail {

// Clamp tiny negatives, sort non-increasing (stable on ties).
inline SpectralSummary finish_summary(std::vector<double> ev, Index k, Index p, double trace) {
    const double eps = 1e-10 * std::abs(trace);
    for (auto& v : ev) {
        if (v < 0.0 && v >= -eps) v = 0.0;
    }
    std::stable_sort(ev.begin(), ev.end(), std::greater<>());
    ev.resize(static_cast<std::size_t>(k));
    return SpectralSummary{std::move(ev), k, trace, p};
}

inline void check_weights(const DataMatrix& X, std::span<const double> w) {
    require(static_cast<Index>(w.size()) == X.n(), "weights: length must equal n");
    for (double v : w) {
        require(std::isfinite(v), "weights: non-finite weight");
        require(v >= 0.0, "weights: negative weight");
    }
}

// Rows of diag(sqrt(w)) (X - 1 mu_w^T) for w_i > 0, where mu_w is the
// w-weighted mean when centering (zero otherwise).
inline Eigen::MatrixXd scaled_rows(const Eigen::MatrixXd& X, std::span<const double> w, bool center) {
    const Index n = X.rows();
    const Index p = X.cols();
    double total = 0.0;
    Index nnz = 0;
    for (Index i = 0; i < n; ++i) {
        total += w[static_cast<std::size_t>(i)];
        if (w[static_cast<std::size_t>(i)] > 0.0) ++nnz;
    }
    Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(p);
    if (center && total > 0.0) {
        for (Index i = 0; i < n; ++i) {
            const double wi = w[static_cast<std::size_t>(i)];
            if (wi > 0.0) mu.noalias() += wi * X.row(i);
        }
        mu /= total;
    }
    Eigen::MatrixXd Y(nnz, p);
    Index r = 0;
    for (Index i = 0; i < n; ++i) {
        const double wi = w[static_cast<std::size_t>(i)];
        if (wi > 0.0) Y.row(r++) = std::sqrt(wi) * (X.row(i) - mu);
    }
    return Y;
}

inline std::vector<double> dense_gram_eigenvalues(const Eigen::MatrixXd& Y) {
    const bool tall = Y.rows() >= Y.cols();
    const Index d = tall ? Y.cols() : Y.rows();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    if (tall)
        G.selfadjointView<Eigen::Lower>().rankUpdate(Y.transpose());
    else
        G.selfadjointView<Eigen::Lower>().rankUpdate(Y);
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

// k largest eigenvalues of Y^T Y (p-dimensional, zero-padded past rank).
inline std::vector<double> gram_top_eigenvalues(const Eigen::MatrixXd& Y, Index k) {
    const Index p = Y.cols();
    const Index d = std::min(Y.rows(), p);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(k));
    const Index kk = std::min(k, d);
    constexpr Index kDenseBelow = 48;

    if (kk > 0) {
        std::optional<Eigen::VectorXd> top;
        if (d > kDenseBelow && 2 * kk < d) {
            Eigen::VectorXd tmp;
            if (Y.rows() >= p) {
                tmp.resize(Y.rows());
                top = lanczos_top(
                    [&](const Eigen::VectorXd& v, Eigen::VectorXd& out_v) {
                        tmp.noalias() = Y * v;
                        out_v.noalias() = Y.transpose() * tmp;
                    },
                    p, kk);
            } else {
                tmp.resize(p);
                top = lanczos_top(
                    [&](const Eigen::VectorXd& u, Eigen::VectorXd& out_u) {
                        tmp.noalias() = Y.transpose() * u;
                        out_u.noalias() = Y * tmp;
                    },
                    Y.rows(), kk);
            }
        }
        if (top) {
            out.assign(top->data(), top->data() + top->size());
        } else if (d > 0) {
            auto all = dense_gram_eigenvalues(Y);
            std::sort(all.begin(), all.end(), std::greater<>());
            out.assign(all.begin(), all.begin() + kk);
        }
    }
    out.resize(static_cast<std::size_t>(k), 0.0);
    return out;
}

}  // namespace detail

// p x p covariance; symmetric by construction.
inline Eigen::MatrixXd sample_covariance(const DataMatrix& X, CovarianceOptions opts = CovarianceOptions::sample()) {
    const double d = opts.divisor_value(X.n());
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(X.p(), X.p());
    if (opts.center) {
        Eigen::MatrixXd Xc = X.values().rowwise() - X.values().colwise().mean();
        C.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose(), 1.0 / d);
    } else {
        C.selfadjointView<Eigen::Lower>().rankUpdate(X.values().transpose(), 1.0 / d);
    }
    C.triangularView<Eigen::StrictlyUpper>() = C.transpose();
    return C;
}

// Resampled / reweighted covariance (1/d) sum_i w_i (x_i - mu_w)(x_i - mu_w)^T
// with mu_w the w-weighted mean when opts.center, zero otherwise. Multinomial
// counts give exactly the covariance of the resampled rows.
inline Eigen::MatrixXd resampled_covariance(const DataMatrix& X, std::span<const double> w,
                                            CovarianceOptions opts) {
    detail::check_weights(X, w);
    const double d = opts.divisor_value(X.n());
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Index>(w.size()));
    Eigen::MatrixXd Xc = X.values();
    const double total = wv.sum();
    if (opts.center && total > 0.0) {
        const Eigen::RowVectorXd mu = (wv.transpose() * X.values()) / total;
        Xc.rowwise() -= mu;
    }
    const Eigen::VectorXd scale = wv / d;
    Eigen::MatrixXd C = Xc.transpose() * (scale.asDiagonal() * Xc);
    return (C + C.transpose()) * 0.5;
}

// S_w = (1/n) sum_i w_i x_i x_i^T, uncentered.
inline Eigen::MatrixXd weighted_covariance(const DataMatrix& X, std::span<const double> w) {
    return resampled_covariance(X, w, CovarianceOptions::uncentered());
}

// Eigenvalues of resampled_covariance(X, w, opts) via the singular-value route.
inline SpectralSummary weighted_top_eigenvalues(const DataMatrix& X, std::span<const double> w, Index k,
                                                CovarianceOptions opts) {
    detail::require(k >= 1 && k <= X.p(), "top eigenvalues: k must be in [1, p]");
    detail::check_weights(X, w);
    const double d = opts.divisor_value(X.n());
    Eigen::MatrixXd Y = detail::scaled_rows(X.values(), w, opts.center);
    auto ev = detail::gram_top_eigenvalues(Y, k);
    for (auto& v : ev) v /= d;
    return detail::finish_summary(std::move(ev), k, X.p(), Y.squaredNorm() / d);
}

// k largest eigenvalues of the covariance: s_i^2 / divisor for the
// descending singular values s_i of the (centered) data matrix.
inline SpectralSummary top_eigenvalues(const DataMatrix& X, Index k,
                                       CovarianceOptions opts = CovarianceOptions::sample()) {
    detail::require(k >= 1 && k <= std::min(X.n(), X.p()), "top_eigenvalues: k must be in [1, min(n, p)]");
    const std::vector<double> ones(static_cast<std::size_t>(X.n()), 1.0);
    return weighted_top_eigenvalues(X, ones, k, opts);
}

// All eigenvalues of a symmetric matrix given explicitly.
inline SpectralSummary spectrum_of(const Eigen::MatrixXd& symmetric) {
    detail::require(symmetric.rows() == symmetric.cols() && symmetric.rows() >= 1,
                    "spectrum_of: matrix must be square and non-empty");
    detail::require(symmetric.allFinite(), "spectrum_of: non-finite entry");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return detail::finish_summary({ev.data(), ev.data() + ev.size()}, symmetric.rows(), symmetric.rows(),
                                  symmetric.trace());
}

// Full p x p symmetric decomposition of sample_covariance(X, opts).
inline SpectralSummary full_spectrum(const DataMatrix& X, CovarianceOptions opts = CovarianceOptions::sample()) {
    return spectrum_of(sample_covariance(X, opts));
}

// m(z) = (1/p) sum_i 1 / (lambda_i - z), Im z > 0.
inline std::complex<double> empirical_stieltjes(const SpectralSummary& s, std::complex<double> z) {
    detail::require(z.imag() > 0.0, "empirical_stieltjes: Im z must be positive");
    detail::require(s.complete() && s.k == static_cast<Index>(s.eigenvalues.size()),
                    "empirical_stieltjes: spectrum must be complete (k = p)");
    std::complex<double> acc{0.0, 0.0};
    for (double l : s.eigenvalues) acc += 1.0 / (l - z);
    return acc / static_cast<double>(s.eigenvalues.size());
}

}  // namespace hdboot
