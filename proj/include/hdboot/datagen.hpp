#pragma once

// Spiked population models and Gaussian / elliptical data generation.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace hdboot {

enum class Basis { Identity, RandomOrthogonal };

// Population spectrum {lambda1, bulk, ..., bulk} in dimension p.
struct CovarianceModel {
    Index p = 1;
    double lambda1 = 1.0;
    double bulk = 1.0;
    Basis basis = Basis::RandomOrthogonal;

    void validate() const {
        detail::require(p >= 1, "CovarianceModel: p must be >= 1");
        detail::require(std::isfinite(lambda1) && std::isfinite(bulk), "CovarianceModel: non-finite eigenvalue");
        detail::require(bulk > 0.0, "CovarianceModel: bulk must be positive");
        detail::require(lambda1 >= bulk, "CovarianceModel: lambda1 must be >= bulk");
    }
};

enum class EllipticalKind { Gaussian, EllipNormal, EllipUniform, EllipExp };

inline std::string_view to_string(EllipticalKind k) {
    switch (k) {
        case EllipticalKind::Gaussian: return "gaussian";
        case EllipticalKind::EllipNormal: return "ellip_normal";
        case EllipticalKind::EllipUniform: return "ellip_uniform";
        case EllipticalKind::EllipExp: return "ellip_exp";
    }
    return "unknown";
}

inline std::optional<EllipticalKind> parse_elliptical_kind(std::string_view s) {
    for (auto k : {EllipticalKind::Gaussian, EllipticalKind::EllipNormal, EllipticalKind::EllipUniform,
                   EllipticalKind::EllipExp}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

// Marsaglia polar method; keeps the spare deviate.
class NormalSampler {
public:
    double operator()(CounterEngine& eng) noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * eng.uniform() - 1.0;
            v = 2.0 * eng.uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Law of the per-row scale D_ii in X_i = D_ii Z_i. Every kind has E[D^2] = 1
// so the population covariance of a row is the model's Sigma.
struct EllipticalLaw {
    EllipticalKind kind = EllipticalKind::Gaussian;

    static constexpr double kExpRate = 1.4142135623730951;  // sqrt(2): E[D^2] = 2 / rate^2 = 1
    static constexpr double kUniformLow = 0.5;

    static double uniform_high() { return std::sqrt(3.0) * std::sqrt(4.0 - 0.25) / 2.0 - 0.25; }

    // E[D^2] of the raw interval before rescaling; (a^2 + ab + b^2) / 3.
    static double uniform_raw_second_moment() {
        const double a = kUniformLow, b = uniform_high();
        return (a * a + a * b + b * b) / 3.0;
    }

    double sample(CounterEngine& eng, NormalSampler& normal) const {
        switch (kind) {
            case EllipticalKind::Gaussian: return 1.0;
            case EllipticalKind::EllipNormal: return std::abs(normal(eng));
            case EllipticalKind::EllipUniform: {
                const double a = kUniformLow, b = uniform_high();
                return (a + (b - a) * eng.uniform()) / std::sqrt(uniform_raw_second_moment());
            }
            case EllipticalKind::EllipExp: return -std::log1p(-eng.uniform()) / kExpRate;
        }
        return 1.0;
    }

    // Analytic E[D^2] after rescaling.
    double second_moment() const noexcept { return 1.0; }
};

// Symmetric square root A = V Lambda^{1/2} V^T, so A A^T = Sigma. For a
// random basis V is the right singular basis of a basis_rows x p standard
// normal draw (basis_rows = 0 means p).
inline Eigen::MatrixXd build_sigma_factor(const CovarianceModel& model, const RngStream& rng, Index basis_rows = 0) {
    model.validate();
    const Index p = model.p;
    Eigen::VectorXd root = Eigen::VectorXd::Constant(p, std::sqrt(model.bulk));
    root(0) = std::sqrt(model.lambda1);
    if (model.basis == Basis::Identity || model.lambda1 == model.bulk) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
        A.diagonal() = root;
        return A;
    }
    const Index rows = basis_rows > 0 ? basis_rows : p;
    auto eng = rng.engine();
    NormalSampler normal;
    Eigen::MatrixXd G(rows, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < rows; ++i) G(i, j) = normal(eng);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeFullV);
    const Eigen::MatrixXd& V = svd.matrixV();
    Eigen::MatrixXd A = V * root.asDiagonal() * V.transpose();
    return (A + A.transpose()) * 0.5;
}

// Rows X_i = D_ii (Z0_i A) with Z0 i.i.d. N(0, 1) and D_ii from the law.
inline DataMatrix generate_dataset(const Eigen::MatrixXd& sigma_factor, const EllipticalLaw& law, Index n,
                                   const RngStream& rng) {
    detail::require(n >= 2, "generate_dataset: n must be >= 2");
    detail::require(sigma_factor.rows() == sigma_factor.cols(), "generate_dataset: factor must be square");
    const Index p = sigma_factor.rows();

    auto z_eng = rng.child(0).engine();
    NormalSampler normal;
    Eigen::MatrixXd Z(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) Z(i, j) = normal(z_eng);

    Eigen::MatrixXd off = sigma_factor;
    off.diagonal().setZero();
    Eigen::MatrixXd X;
    if ((off.array() == 0.0).all()) {
        X = Z * sigma_factor.diagonal().asDiagonal();
    } else {
        X.noalias() = Z * sigma_factor;
    }

    if (law.kind != EllipticalKind::Gaussian) {
        auto d_eng = rng.child(1).engine();
        NormalSampler d_normal;
        for (Index i = 0; i < n; ++i) X.row(i) *= law.sample(d_eng, d_normal);
    }
    return DataMatrix(std::move(X));
}

inline DataMatrix generate_dataset(const CovarianceModel& model, const EllipticalLaw& law, Index n,
                                   const RngStream& rng) {
    const auto A = build_sigma_factor(model, rng.child(StreamTag::Basis), n);
    return generate_dataset(A, law, n, rng.child(StreamTag::Data));
}

}  // namespace hdboot
