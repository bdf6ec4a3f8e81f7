#pragma once

// Symmetric Lanczos with full reorthogonalization for the k largest
// eigenvalues of an implicitly applied positive semidefinite operator.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "rng.hpp"

namespace hdboot {

struct LanczosOptions {
    // Stop when every wanted Ritz pair has residual <= rel_tol * |theta_max|.
    double rel_tol = 1e-11;
    // Krylov dimension cap; 0 means the operator dimension.
    Eigen::Index max_dim = 0;
    // Steps between convergence checks.
    Eigen::Index check_every = 4;
};

// Returns the k largest Ritz values in descending order, or nullopt when the
// iteration hit an invariant subspace or the dimension cap before converging.
// Callers fall back to a dense solver in that case.
template <class Apply>
std::optional<Eigen::VectorXd> lanczos_top(Apply&& apply, Eigen::Index dim, Eigen::Index k,
                                           const LanczosOptions& opts = {}) {
    using Eigen::Index;
    using Eigen::VectorXd;
    if (k < 1 || k > dim) return std::nullopt;
    const Index mmax = std::min(dim, opts.max_dim > 0 ? opts.max_dim : dim);

    Eigen::MatrixXd Q(dim, mmax);
    std::vector<double> alpha;
    std::vector<double> beta;
    alpha.reserve(static_cast<std::size_t>(mmax));
    beta.reserve(static_cast<std::size_t>(mmax));

    // Fixed pseudo-random start keeps the routine a pure function of its input.
    CounterEngine eng(0x5EEDC0FFEEULL + static_cast<std::uint64_t>(dim));
    VectorXd q(dim);
    for (Index i = 0; i < dim; ++i) q(i) = eng.uniform() - 0.5;
    q.normalize();

    VectorXd w(dim);
    VectorXd coeff;
    double scale = 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;

    for (Index j = 0; j < mmax; ++j) {
        Q.col(j) = q;
        apply(q, w);
        const double a = q.dot(w);
        alpha.push_back(a);
        scale = std::max(scale, std::abs(a));

        // Two passes of classical Gram-Schmidt against the whole basis.
        auto basis = Q.leftCols(j + 1);
        for (int pass = 0; pass < 2; ++pass) {
            coeff.noalias() = basis.transpose() * w;
            w.noalias() -= basis * coeff;
        }
        const double b = w.norm();
        scale = std::max(scale, b);

        const Index m = j + 1;
        const bool last = (m == mmax);
        const bool breakdown = b <= 1e-13 * std::max(scale, 1e-300);

        if (m >= k && (last || breakdown || (m - k) % opts.check_every == 0)) {
            Eigen::Map<const VectorXd> diag(alpha.data(), m);
            VectorXd sub = Eigen::Map<const VectorXd>(beta.data(), m - 1);
            tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            const VectorXd& theta = tri.eigenvalues();  // ascending
            const double top = std::max(std::abs(theta(m - 1)), 1e-300);
            bool converged = true;
            for (Index i = 0; i < k; ++i) {
                const double resid = b * std::abs(tri.eigenvectors()(m - 1, m - 1 - i));
                if (resid > opts.rel_tol * top) {
                    converged = false;
                    break;
                }
            }
            if (m == dim || (converged && !breakdown)) {
                VectorXd out(k);
                for (Index i = 0; i < k; ++i) out(i) = theta(m - 1 - i);
                return out;
            }
        }
        if (breakdown || last) return std::nullopt;
        beta.push_back(b);
        q = w / b;
    }
    return std::nullopt;
}

}  // namespace hdboot
