#pragma once

// Row-resampling bootstrap of spectral statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "spectral.hpp"
#include "stats.hpp"

namespace hdboot {

enum class WeightScheme { Multinomial, IidWeights };

// Laws for independent weights; all have mean 1.
enum class WeightLaw { Constant, Poisson, Exponential };

// How a replicate is centered when the covariance options ask for centering.
enum class ReplicateCentering {
    ResampleMean,  // re-center at the resample's own (weighted) mean
    OriginalMean,  // keep the original data mean
};

struct BootstrapConfig {
    int B = 999;
    WeightScheme scheme = WeightScheme::Multinomial;
    WeightLaw iid_law = WeightLaw::Poisson;
    ReplicateCentering centering = ReplicateCentering::ResampleMean;
    RngStream rng{};

    void validate() const { detail::require(B >= 1, "BootstrapConfig: B must be >= 1"); }
};

// A statistic of the top eigenvalues of a covariance matrix.
struct Statistic {
    std::string name;
    Index eigenvalues_needed = 1;
    std::function<double(const SpectralSummary&)> eval;
};

struct BootstrapDistribution {
    std::string statistic_name;
    double point_estimate = 0.0;
    std::vector<double> replicates;

    std::size_t B() const noexcept { return replicates.size(); }
};

enum class IntervalMethod { Percentile, Normal, BiasCorrected };

inline std::string_view to_string(IntervalMethod m) {
    switch (m) {
        case IntervalMethod::Percentile: return "percentile";
        case IntervalMethod::Normal: return "normal";
        case IntervalMethod::BiasCorrected: return "bias_corrected";
    }
    return "unknown";
}

struct IntervalResult {
    IntervalMethod method = IntervalMethod::Percentile;
    double level = 0.95;
    double lower = 0.0;
    double upper = 0.0;
    // Set when the bias-corrected interval could not be formed and the
    // percentile interval was returned instead.
    bool degenerate = false;

    bool covers(double value) const noexcept { return lower <= value && value <= upper; }

    // NaN bounds compare equal to each other.
    friend bool operator==(const IntervalResult& a, const IntervalResult& b) {
        auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
        return a.method == b.method && a.level == b.level && same(a.lower, b.lower) && same(a.upper, b.upper) &&
               a.degenerate == b.degenerate;
    }
};

// Multinomial(n, 1/n) counts: n independent uniform index draws.
inline std::vector<int> multinomial_weights(Index n, const RngStream& rng) {
    detail::require(n >= 1, "multinomial_weights: n must be >= 1");
    std::vector<int> w(static_cast<std::size_t>(n), 0);
    auto eng = rng.engine();
    for (Index k = 0; k < n; ++k) ++w[eng.below(static_cast<std::uint64_t>(n))];
    return w;
}

inline std::vector<double> iid_weights(Index n, WeightLaw law, const RngStream& rng) {
    detail::require(n >= 1, "iid_weights: n must be >= 1");
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (law == WeightLaw::Constant) return w;
    auto eng = rng.engine();
    for (auto& v : w) {
        if (law == WeightLaw::Exponential) {
            v = -std::log1p(-eng.uniform());
        } else {
            // Poisson(1) by inversion.
            const double u = eng.uniform();
            double pmf = std::exp(-1.0), cdf = pmf;
            int k = 0;
            while (u > cdf && k < 64) {
                ++k;
                pmf /= k;
                cdf += pmf;
            }
            v = k;
        }
    }
    return w;
}

inline std::vector<double> bootstrap_weights(Index n, const BootstrapConfig& cfg, const RngStream& rng) {
    if (cfg.scheme == WeightScheme::Multinomial) {
        const auto counts = multinomial_weights(n, rng);
        return {counts.begin(), counts.end()};
    }
    return iid_weights(n, cfg.iid_law, rng);
}

namespace statistics {

inline Statistic eigenvalue(Index i) {
    return {"lambda" + std::to_string(i + 1), i + 1, [i](const SpectralSummary& s) {
                return s[static_cast<std::size_t>(i)];
            }};
}

inline Statistic top_eigenvalue() {
    auto s = eigenvalue(0);
    s.name = "top_eigenvalue";
    return s;
}

}  // namespace statistics

// lambda_1 - lambda_2.
inline double gap_statistic(const SpectralSummary& s) {
    if (s.eigenvalues.size() < 2) throw input_error("gap_statistic: need at least 2 eigenvalues");
    return s.eigenvalues[0] - s.eigenvalues[1];
}

// (lambda_1 - lambda_2) / (lambda_2 - lambda_3).
inline double gap_ratio(const SpectralSummary& s) {
    if (s.eigenvalues.size() < 3) throw input_error("gap_ratio: need at least 3 eigenvalues");
    const double den = s.eigenvalues[1] - s.eigenvalues[2];
    if (!(den > 0.0)) throw degenerate_spectrum_error("gap_ratio: lambda_2 - lambda_3 is zero");
    return (s.eigenvalues[0] - s.eigenvalues[1]) / den;
}

namespace statistics {

inline Statistic gap() { return {"gap", 2, [](const SpectralSummary& s) { return gap_statistic(s); }}; }
inline Statistic gap_ratio() {
    return {"gap_ratio", 3, [](const SpectralSummary& s) { return hdboot::gap_ratio(s); }};
}

}  // namespace statistics

// Top-k spectra of B resampled covariance matrices. Replicate b uses weights
// drawn from cfg.rng.child(b), so results do not depend on evaluation order.
inline std::vector<SpectralSummary> bootstrap_spectra(const DataMatrix& X, Index k, const BootstrapConfig& cfg,
                                                      CovarianceOptions opts) {
    cfg.validate();
    detail::require(k >= 1 && k <= std::min(X.n(), X.p()), "bootstrap_spectra: k must be in [1, min(n, p)]");

    // Keeping the original mean means centering once and treating replicates as uncentered.
    const bool fixed_center = opts.center && cfg.centering == ReplicateCentering::OriginalMean;
    const DataMatrix centered =
        fixed_center ? DataMatrix(Eigen::MatrixXd(X.values().rowwise() - X.values().colwise().mean())) : DataMatrix{};
    const DataMatrix& source = fixed_center ? centered : X;
    CovarianceOptions rep_opts = opts;
    if (fixed_center) rep_opts.center = false;

    std::vector<SpectralSummary> out;
    out.reserve(static_cast<std::size_t>(cfg.B));
    for (int b = 0; b < cfg.B; ++b) {
        const auto w = bootstrap_weights(X.n(), cfg, cfg.rng.child(static_cast<std::uint64_t>(b)));
        out.push_back(weighted_top_eigenvalues(source, w, k, rep_opts));
    }
    return out;
}

// Bootstraps several statistics from the same resamples.
inline std::vector<BootstrapDistribution> bootstrap_statistics(const DataMatrix& X, std::span<const Statistic> stats,
                                                               const BootstrapConfig& cfg, CovarianceOptions opts) {
    detail::require(!stats.empty(), "bootstrap_statistics: no statistic requested");
    Index k = 1;
    for (const auto& s : stats) k = std::max(k, s.eigenvalues_needed);
    detail::require(k <= std::min(X.n(), X.p()), "bootstrap_statistics: statistic needs more eigenvalues than min(n, p)");

    const auto point = top_eigenvalues(X, k, opts);
    const auto spectra = bootstrap_spectra(X, k, cfg, opts);
    std::vector<BootstrapDistribution> out(stats.size());
    for (std::size_t s = 0; s < stats.size(); ++s) {
        out[s].statistic_name = stats[s].name;
        out[s].point_estimate = stats[s].eval(point);
        out[s].replicates.reserve(spectra.size());
        for (const auto& rep : spectra) out[s].replicates.push_back(stats[s].eval(rep));
    }
    return out;
}

inline BootstrapDistribution bootstrap_statistic(const DataMatrix& X, const Statistic& stat,
                                                 const BootstrapConfig& cfg, CovarianceOptions opts) {
    return std::move(bootstrap_statistics(X, std::span<const Statistic>(&stat, 1), cfg, opts).front());
}

// mean(replicates) - point_estimate.
inline double bias_estimate(const BootstrapDistribution& dist) {
    detail::require(dist.B() >= 1, "bias_estimate: need at least 1 replicate");
    return stats::mean(dist.replicates) - dist.point_estimate;
}

// Unbiased sample variance of the replicates.
inline double variance_estimate(const BootstrapDistribution& dist) {
    detail::require(dist.B() >= 2, "variance_estimate: need at least 2 replicates");
    return stats::variance(dist.replicates);
}

// Percentile: type-7 quantiles at (1 -/+ level)/2. Normal: point -/+ z * sd.
// Bias-corrected: Efron's BC percentile with z0 = Phi^-1(#{theta* < theta_hat} / B)
// and no acceleration; falls back to percentile when every replicate sits on
// one side of the point estimate.
inline IntervalResult confidence_interval(const BootstrapDistribution& dist, IntervalMethod method, double level) {
    detail::require(dist.B() >= 2, "confidence_interval: need at least 2 replicates");
    detail::require(level > 0.0 && level < 1.0, "confidence_interval: level must be in (0, 1)");
    IntervalResult r{method, level, 0.0, 0.0, false};
    const double lo_p = (1.0 - level) / 2.0;
    const double hi_p = (1.0 + level) / 2.0;

    if (method == IntervalMethod::Normal) {
        const double half = stats::normal_quantile(hi_p) * std::sqrt(variance_estimate(dist));
        r.lower = dist.point_estimate - half;
        r.upper = dist.point_estimate + half;
        return r;
    }

    std::vector<double> sorted = dist.replicates;
    std::sort(sorted.begin(), sorted.end());
    double a1 = lo_p, a2 = hi_p;
    if (method == IntervalMethod::BiasCorrected) {
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), dist.point_estimate) - sorted.begin();
        const double frac = static_cast<double>(below) / static_cast<double>(sorted.size());
        if (frac <= 0.0 || frac >= 1.0) {
            r.degenerate = true;
        } else {
            const double z0 = stats::normal_quantile(frac);
            a1 = stats::normal_cdf(2.0 * z0 + stats::normal_quantile(lo_p));
            a2 = stats::normal_cdf(2.0 * z0 + stats::normal_quantile(hi_p));
        }
    }
    r.lower = stats::quantile_sorted(sorted, a1);
    r.upper = stats::quantile_sorted(sorted, a2);
    return r;
}

}  // namespace hdboot
