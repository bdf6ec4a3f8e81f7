#pragma once

// Random-matrix reference quantities: Marchenko-Pastur law and equation,
// the weighted-covariance Stieltjes system, Johnstone and BBP edge
// parameters, the Azuma concentration bound for bootstrapped Stieltjes
// transforms and the Wielandt bound for spiked block models.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "spectral.hpp"

namespace hdboot {

using cplx = std::complex<double>;

// Finite discrete probability law: population spectral law H or weight law nu.
class DiscreteLaw {
public:
    struct Atom {
        double location;
        double mass;
    };

    DiscreteLaw() = default;

    explicit DiscreteLaw(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        detail::require(!atoms_.empty(), "DiscreteLaw: no atoms");
        double total = 0.0;
        for (const auto& a : atoms_) {
            detail::require(std::isfinite(a.location), "DiscreteLaw: non-finite location");
            detail::require(a.mass > 0.0 && std::isfinite(a.mass), "DiscreteLaw: masses must be positive");
            total += a.mass;
        }
        detail::require(std::abs(total - 1.0) <= 1e-12, "DiscreteLaw: masses must sum to 1");
    }

    static DiscreteLaw point_mass(double x) { return DiscreteLaw({{x, 1.0}}); }

    // Rescales the masses to sum to one.
    static DiscreteLaw normalized(std::vector<Atom> atoms) {
        double total = 0.0;
        for (const auto& a : atoms) total += a.mass;
        detail::require(total > 0.0, "DiscreteLaw::normalized: zero total mass");
        for (auto& a : atoms) a.mass /= total;
        // Absorb the last rounding error into the largest atom.
        double sum = 0.0;
        std::size_t big = 0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            sum += atoms[i].mass;
            if (atoms[i].mass > atoms[big].mass) big = i;
        }
        atoms[big].mass += 1.0 - sum;
        return DiscreteLaw(std::move(atoms));
    }

    // m equal-mass atoms at the mid-quantiles of a continuous law.
    static DiscreteLaw from_quantiles(const std::function<double(double)>& quantile, int m) {
        detail::require(m >= 1, "DiscreteLaw::from_quantiles: need at least one atom");
        std::vector<Atom> atoms;
        atoms.reserve(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) atoms.push_back({quantile((i + 0.5) / m), 1.0 / m});
        return normalized(std::move(atoms));
    }

    const std::vector<Atom>& atoms() const noexcept { return atoms_; }

    template <class F>
    auto expect(F&& f) const {
        decltype(f(0.0)) acc{};
        for (const auto& a : atoms_) acc += a.mass * f(a.location);
        return acc;
    }

private:
    std::vector<Atom> atoms_;
};

// Law of the scale w = sqrt(K), K ~ Poisson(1) truncated at kmax: the weight
// scale whose square is a multinomial bootstrap count in the large-n limit.
inline DiscreteLaw multinomial_limit_scale_law(int kmax = 30) {
    std::vector<DiscreteLaw::Atom> atoms;
    double pmf = std::exp(-1.0);
    for (int k = 0; k <= kmax; ++k) {
        if (k > 0) pmf /= k;
        atoms.push_back({std::sqrt(static_cast<double>(k)), pmf});
    }
    return DiscreteLaw::normalized(std::move(atoms));
}

struct StieltjesSolution {
    cplx z;
    cplx value;                  // v_F for the MP equation, m for the weighted system
    std::optional<cplx> gamma;   // weighted system only
    int iterations = 0;
    double residual = 0.0;
};

struct SolverOptions {
    double tol = 1e-10;
    int max_iter = 10000;
    double damping = 0.5;
};

inline constexpr double kMinImagZ = 1e-4;

inline std::pair<double, double> mp_support(double r) {
    detail::require(r > 0.0 && r < 1.0, "mp_support: r must be in (0, 1)");
    const double s = std::sqrt(r);
    return {(1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s)};
}

inline double mp_density(double x, double r) {
    const auto [lo, hi] = mp_support(r);
    if (x <= lo || x >= hi) return 0.0;
    return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * r * x);
}

// CDF of the MP law (0 < r < 1, no atom). Integrates the density after the
// substitution x = c - h cos(theta), which removes the square-root edges.
inline double mp_cdf(double x, double r) {
    const auto [lo, hi] = mp_support(r);
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    const double c = 0.5 * (hi + lo), h = 0.5 * (hi - lo);
    const double theta_max = std::acos(std::clamp((c - x) / h, -1.0, 1.0));
    auto integrand = [&](double t) {
        const double s = std::sin(t);
        return h * h * s * s / (2.0 * std::numbers::pi * r * (c - h * std::cos(t)));
    };
    return std::clamp(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, theta_max, 15, 1e-13),
                      0.0, 1.0);
}

namespace detail {

inline void require_upper_half(cplx z) {
    require(z.imag() >= kMinImagZ, "Stieltjes solver: Im z must be >= 1e-4");
}

inline void require_herglotz(const char* who, cplx value, int it, double res) {
    if (!(value.imag() > 0.0)) throw solver_error(std::string(who) + ": solution left the upper half-plane", it, res);
}

}  // namespace detail

// Solves -1/v = z - r * int lambda dH(lambda) / (1 + lambda v) for v = v_F(z)
// by damped fixed-point iteration from v0 = -1/z.
inline StieltjesSolution mp_stieltjes(cplx z, const DiscreteLaw& H, double r, const SolverOptions& opts = {}) {
    detail::require_upper_half(z);
    detail::require(r > 0.0, "mp_stieltjes: r must be positive");
    auto map = [&](cplx v) {
        const cplx integral = H.expect([&](double l) { return cplx(l) / (1.0 + l * v); });
        return -1.0 / (z - r * integral);
    };
    cplx v = -1.0 / z;
    double res = 0.0;
    for (int it = 0; it <= opts.max_iter; ++it) {
        const cplx g = map(v);
        res = std::abs(v - g);
        if (res <= opts.tol) {
            detail::require_herglotz("mp_stieltjes", v, it, res);
            return {z, v, std::nullopt, it, res};
        }
        v = (1.0 - opts.damping) * v + opts.damping * g;
    }
    throw solver_error("mp_stieltjes: no convergence", opts.max_iter, res);
}

// m(z) of the p x p matrix from v_F(z) = (1 - r)(-1/z) + r m(z).
inline cplx mp_m_from_v(cplx v, cplx z, double r) { return (v + (1.0 - r) / z) / r; }

// Solves, for the spectral Stieltjes transform m of (1/n) sum_i w_i^2 X_i X_i^T
// (w the weight scale with law nu, population law H):
//   m     = int dH(tau) / (tau I(gamma) - z)
//   gamma = int tau dH(tau) / (tau I(gamma) - z)
//   I(g)  = int w^2 / (1 + r w^2 g) dnu(w)
// by damped iteration on gamma from gamma0 = -1/z.
inline StieltjesSolution weighted_stieltjes(cplx z, const DiscreteLaw& H, const DiscreteLaw& nu, double r,
                                            const SolverOptions& opts = {}) {
    detail::require_upper_half(z);
    detail::require(r > 0.0, "weighted_stieltjes: r must be positive");
    for (const auto& a : nu.atoms()) detail::require(a.location >= 0.0, "weighted_stieltjes: weights must be >= 0");

    auto weight_integral = [&](cplx g) { return nu.expect([&](double w) { return cplx(w * w) / (1.0 + r * w * w * g); }); };
    auto gamma_map = [&](cplx g) {
        const cplx I = weight_integral(g);
        return H.expect([&](double tau) { return cplx(tau) / (tau * I - z); });
    };
    cplx g = -1.0 / z;
    double res = 0.0;
    for (int it = 0; it <= opts.max_iter; ++it) {
        const cplx next = gamma_map(g);
        res = std::abs(g - next);
        if (res <= opts.tol) {
            const cplx I = weight_integral(g);
            const cplx m = H.expect([&](double tau) { return 1.0 / (tau * I - z); });
            detail::require_herglotz("weighted_stieltjes (m)", m, it, res);
            detail::require_herglotz("weighted_stieltjes (gamma)", g, it, res);
            return {z, m, g, it, res};
        }
        g = (1.0 - opts.damping) * g + opts.damping * next;
    }
    throw solver_error("weighted_stieltjes: no convergence", opts.max_iter, res);
}

struct EdgeParams {
    double mu_np;
    double sigma_np;
};

// Centering and scale of the largest eigenvalue under the null.
inline EdgeParams johnstone_params(Index n, Index p) {
    detail::require(n >= 1 && p >= 1, "johnstone_params: n and p must be >= 1");
    const double r = static_cast<double>(p) / static_cast<double>(n);
    const double a = 1.0 + std::sqrt(r);
    return {a * a, a * std::cbrt(1.0 + std::sqrt(1.0 / r))};
}

// 1 + sqrt(r).
inline double phase_transition(double r) {
    detail::require(r > 0.0, "phase_transition: r must be positive");
    return 1.0 + std::sqrt(r);
}

enum class SpikeRegime { Subcritical, Supercritical };

struct SpikeParams {
    double eta = 0.0;
    SpikeRegime regime = SpikeRegime::Subcritical;
    std::optional<double> mu_eta;
    std::optional<double> sigma_eta;
};

// lambda1 = 1 + eta sqrt(p/n). Above the transition (eta > 1):
// mu = lambda1 (1 + sqrt(p/n) / eta), sigma = lambda1 sqrt(1 - eta^-2).
inline SpikeParams bbp_params(double lambda1, Index n, Index p) {
    detail::require(lambda1 > 1.0 && std::isfinite(lambda1), "bbp_params: lambda1 must be > 1");
    detail::require(n >= 1 && p >= 1, "bbp_params: n and p must be >= 1");
    const double s = std::sqrt(static_cast<double>(p) / static_cast<double>(n));
    SpikeParams out;
    out.eta = (lambda1 - 1.0) / s;
    if (out.eta > 1.0) {
        out.regime = SpikeRegime::Supercritical;
        out.mu_eta = lambda1 * (1.0 + s / out.eta);
        out.sigma_eta = lambda1 * std::sqrt(1.0 - 1.0 / (out.eta * out.eta));
    }
    return out;
}

// min(1, 4 exp(-p^2 v^2 t^2 / (16 n))).
inline double azuma_bound(double t, Index p, double v, Index n) {
    detail::require(t > 0.0 && v > 0.0 && p >= 1 && n >= 1, "azuma_bound: arguments must be positive");
    const double pd = static_cast<double>(p);
    const double e = pd * pd * v * v * t * t / (16.0 * static_cast<double>(n));
    return std::min(1.0, 4.0 * std::exp(-e));
}

enum class WielandtForm {
    // lambda_max(T) n^-a lambda_max(V) / (lambda_q(T) - n^-a lambda_max(V)):
    // Wielandt combined with lambda_max(U U^T) <= lambda_max(T) n^-a ||V||.
    Rigorous,
    // n^-a lambda_max(V) / (lambda_q(T) - n^-a lambda_max(V)); agrees with
    // Rigorous only when lambda_max(T) <= 1.
    Unscaled,
};

// Upper bound on lambda_i(S) - lambda_i(T), i <= q, for the partitioned
// S = [[T, U], [U^T, n^-a V]]. nullopt when lambda_q(T) <= n^-a lambda_max(V).
inline std::optional<double> wielandt_gap_bound(const SpectralSummary& spectrum_T, double lambda_max_V, double alpha,
                                                Index n, Index q, WielandtForm form = WielandtForm::Rigorous) {
    detail::require(q >= 1 && static_cast<Index>(spectrum_T.eigenvalues.size()) >= q,
                    "wielandt_gap_bound: spectrum_T needs at least q eigenvalues");
    detail::require(n >= 1, "wielandt_gap_bound: n must be >= 1");
    const double shrink = std::pow(static_cast<double>(n), -alpha);
    const double lq = spectrum_T.eigenvalues[static_cast<std::size_t>(q - 1)];
    const double denom = lq - shrink * lambda_max_V;
    if (!(denom > 0.0)) return std::nullopt;
    const double scale = form == WielandtForm::Rigorous ? spectrum_T.eigenvalues.front() : 1.0;
    return scale * shrink * lambda_max_V / denom;
}

}  // namespace hdboot
