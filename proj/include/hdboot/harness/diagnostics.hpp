#pragma once

// Empirical checks of the concentration bound for the bootstrapped Stieltjes
// transform and of the spiked-model approximations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "../bootstrap.hpp"
#include "../datagen.hpp"
#include "../errors.hpp"
#include "../rmt.hpp"
#include "../rng.hpp"
#include "../spectral.hpp"
#include "../stats.hpp"
#include "parallel.hpp"

namespace hdboot::harness {

struct ConcentrationPoint {
    double t = 0.0;
    double empirical = 0.0;  // fraction of replicates with |m_b - mean| > t
    double bound = 0.0;
};

struct ConcentrationReport {
    Index n = 0;
    Index p = 0;
    std::complex<double> z;
    int B = 0;
    std::complex<double> mean_m;
    double max_deviation = 0.0;
    std::vector<ConcentrationPoint> curve;
    bool violated = false;
};

// Geometric t-grid from 1e-4 to 10, 61 points.
inline std::vector<double> default_t_grid() {
    std::vector<double> t;
    for (int i = 0; i <= 60; ++i) t.push_back(std::pow(10.0, -4.0 + 5.0 * i / 60.0));
    return t;
}

// m_b(z) = (1/p) tr(S*_b - z)^-1 for S*_b = (1/n) sum_i w_i x_i x_i^T with
// multinomial weights drawn from rng.child(b).
inline ConcentrationReport concentration_check(const DataMatrix& X, std::complex<double> z, int B,
                                               const RngStream& rng, std::vector<double> t_grid = default_t_grid()) {
    hdboot::detail::require(z.imag() >= kMinImagZ, "concentration_check: Im z must be >= 1e-4");
    hdboot::detail::require(B >= 1, "concentration_check: B must be >= 1");
    hdboot::detail::require(!t_grid.empty(), "concentration_check: empty t grid");
    ConcentrationReport rep{X.n(), X.p(), z, B, {}, 0.0, {}, false};

    std::vector<std::complex<double>> m;
    m.reserve(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
        const auto counts = multinomial_weights(X.n(), rng.child(static_cast<std::uint64_t>(b)));
        const std::vector<double> w(counts.begin(), counts.end());
        const auto spec = weighted_top_eigenvalues(X, w, X.p(), CovarianceOptions::uncentered());
        m.push_back(empirical_stieltjes(spec, z));
    }
    std::complex<double> sum{};
    for (const auto& v : m) sum += v;
    rep.mean_m = sum / static_cast<double>(B);

    std::vector<double> dev;
    for (const auto& v : m) dev.push_back(std::abs(v - rep.mean_m));
    rep.max_deviation = *std::max_element(dev.begin(), dev.end());
    for (double t : t_grid) {
        const auto exceed = std::count_if(dev.begin(), dev.end(), [t](double d) { return d > t; });
        ConcentrationPoint pt{t, static_cast<double>(exceed) / static_cast<double>(B), azuma_bound(t, X.p(), z.imag(), X.n())};
        rep.violated = rep.violated || pt.empirical > pt.bound;
        rep.curve.push_back(pt);
    }
    return rep;
}

// Block model Sigma = diag(Sigma11, n^-alpha I_{p-q}) with p = round(ratio n)
// and Sigma11 = diag(spike, spike / 2, ..., spike / 2^(q-1)). Covariances are
// uncentered with divisor n.
struct SpikedCheckConfig {
    Index q = 1;
    double alpha = 1.0;
    std::vector<Index> n_grid{250, 500, 1000};
    EllipticalKind law = EllipticalKind::Gaussian;
    double ratio = 0.1;
    // Top population eigenvalue; defaults to 1 + 50 sqrt(ratio).
    std::optional<double> spike;
    int nsim = 300;
    // Bootstrap replicates per simulation for the KS comparison; 0 skips it.
    int B = 299;
    std::uint64_t seed = 1;
    unsigned workers = 1;

    double top_spike() const { return spike.value_or(1.0 + 50.0 * std::sqrt(ratio)); }

    void validate() const {
        hdboot::detail::require(q >= 1 && q <= 3, "spiked check: q must be in [1, 3]");
        hdboot::detail::require(alpha > 0.5, "spiked check: alpha must exceed 1/2");
        hdboot::detail::require(!n_grid.empty(), "spiked check: empty n grid");
        hdboot::detail::require(ratio > 0.0, "spiked check: ratio must be positive");
        hdboot::detail::require(nsim >= 2 && B >= 0, "spiked check: need nsim >= 2 and B >= 0");
        hdboot::detail::require(top_spike() > 1.0, "spiked check: spike must exceed 1");
        for (Index n : n_grid) {
            const auto p = static_cast<Index>(std::llround(ratio * static_cast<double>(n)));
            hdboot::detail::require(n >= 2 && p > q, "spiked check: need p = round(ratio n) > q");
        }
    }
};

struct SpikedLevelReport {
    Index n = 0;
    Index p = 0;
    // sqrt(n) max_i |lambda_i(S) - lambda_i(T)| over simulations.
    double median_scaled_gap = 0.0;
    double mean_scaled_gap = 0.0;
    // KS distance between pooled sqrt(n)(lambda1* - lambda1_hat) and the
    // simulated sqrt(n)(lambda1_hat - lambda1); nullopt when B = 0.
    std::optional<double> ks_distance;
    double wielandt_satisfied = 0.0;  // fraction, rigorous form, among checked simulations
    double unscaled_satisfied = 0.0;  // same for the unscaled form
    int wielandt_checked = 0;
    // Simulations where lambda_q(T) <= n^-alpha lambda_max(V).
    std::vector<int> proviso_failures;
};

struct SpikedReport {
    SpikedCheckConfig config;
    std::vector<SpikedLevelReport> levels;

    bool gap_decreasing() const {
        for (std::size_t i = 1; i < levels.size(); ++i)
            if (!(levels[i].median_scaled_gap < levels[i - 1].median_scaled_gap)) return false;
        return true;
    }
};

inline std::vector<double> spiked_population(const SpikedCheckConfig& cfg, Index n, Index p) {
    std::vector<double> ev(static_cast<std::size_t>(p), std::pow(static_cast<double>(n), -cfg.alpha));
    for (Index i = 0; i < cfg.q; ++i) ev[static_cast<std::size_t>(i)] = cfg.top_spike() / std::pow(2.0, static_cast<double>(i));
    return ev;
}

inline SpikedReport spiked_consistency_check(const SpikedCheckConfig& cfg) {
    cfg.validate();
    SpikedReport report{cfg, {}};
    const EllipticalLaw law{cfg.law};
    const auto opts = CovarianceOptions::uncentered();
    const RngStream root = RngStream(cfg.seed).child(StreamTag::Spiked);

    for (Index n : cfg.n_grid) {
        const auto p = static_cast<Index>(std::llround(cfg.ratio * static_cast<double>(n)));
        const auto pop = spiked_population(cfg, n, p);
        Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(p, p);
        for (Index j = 0; j < p; ++j) factor(j, j) = std::sqrt(pop[static_cast<std::size_t>(j)]);
        const double sqrt_n = std::sqrt(static_cast<double>(n));
        const double lambda1 = pop.front();

        struct Sim {
            double scaled_gap = 0.0;
            double sampling = 0.0;
            std::vector<double> boot;
            std::optional<bool> rigorous, unscaled;
            std::string error;
        };
        std::vector<Sim> sims(static_cast<std::size_t>(cfg.nsim));
        const RngStream level = root.child(static_cast<std::uint64_t>(n));

        parallel_for(sims.size(), cfg.workers, [&](std::size_t s) {
            Sim& out = sims[s];
            try {
                const RngStream sim_rng = level.child(static_cast<std::uint64_t>(s));
                const auto X = generate_dataset(factor, law, n, sim_rng.child(StreamTag::Data));
                const auto S = top_eigenvalues(X, cfg.q, opts);
                const DataMatrix X1(Eigen::MatrixXd(X.values().leftCols(cfg.q)));
                const DataMatrix X2(Eigen::MatrixXd(X.values().rightCols(p - cfg.q)));
                const auto T = full_spectrum(X1, opts);
                const double lambda_max_V =
                    std::pow(static_cast<double>(n), cfg.alpha) * top_eigenvalues(X2, 1, opts)[0];

                double gap = 0.0;
                for (Index i = 0; i < cfg.q; ++i)
                    gap = std::max(gap, std::abs(S[static_cast<std::size_t>(i)] - T[static_cast<std::size_t>(i)]));
                out.scaled_gap = sqrt_n * gap;
                out.sampling = sqrt_n * (S[0] - lambda1);

                auto satisfied = [&](WielandtForm form) -> std::optional<bool> {
                    const auto bound = wielandt_gap_bound(T, lambda_max_V, cfg.alpha, n, cfg.q, form);
                    if (!bound) return std::nullopt;
                    for (Index i = 0; i < cfg.q; ++i) {
                        const double d = S[static_cast<std::size_t>(i)] - T[static_cast<std::size_t>(i)];
                        // Interlacing gives d >= 0; allow rounding at the 1e-12 relative level.
                        const double slack = 1e-12 * std::abs(S[0]);
                        if (d < -slack || d > *bound + slack) return false;
                    }
                    return true;
                };
                out.rigorous = satisfied(WielandtForm::Rigorous);
                out.unscaled = satisfied(WielandtForm::Unscaled);

                if (cfg.B > 0) {
                    BootstrapConfig bcfg;
                    bcfg.B = cfg.B;
                    bcfg.rng = sim_rng.child(StreamTag::Bootstrap);
                    for (const auto& rep : bootstrap_spectra(X, 1, bcfg, opts)) out.boot.push_back(sqrt_n * (rep[0] - S[0]));
                }
            } catch (const std::exception& e) {
                out.error = e.what();
            }
        });

        SpikedLevelReport lr;
        lr.n = n;
        lr.p = p;
        std::vector<double> gaps, sampling, pooled;
        int rig = 0, uns = 0;
        for (std::size_t s = 0; s < sims.size(); ++s) {
            const auto& sim = sims[s];
            if (!sim.error.empty())
                throw std::runtime_error("spiked check, n = " + std::to_string(n) + ", simulation " +
                                         std::to_string(s) + ": " + sim.error);
            gaps.push_back(sim.scaled_gap);
            sampling.push_back(sim.sampling);
            pooled.insert(pooled.end(), sim.boot.begin(), sim.boot.end());
            if (!sim.rigorous) {
                lr.proviso_failures.push_back(static_cast<int>(s));
                continue;
            }
            ++lr.wielandt_checked;
            rig += *sim.rigorous ? 1 : 0;
            uns += sim.unscaled.value_or(false) ? 1 : 0;
        }
        lr.median_scaled_gap = stats::median(gaps);
        lr.mean_scaled_gap = stats::mean(gaps);
        if (!pooled.empty()) lr.ks_distance = stats::ks_two_sample(pooled, sampling);
        if (lr.wielandt_checked > 0) {
            lr.wielandt_satisfied = static_cast<double>(rig) / lr.wielandt_checked;
            lr.unscaled_satisfied = static_cast<double>(uns) / lr.wielandt_checked;
        }
        report.levels.push_back(std::move(lr));
    }
    return report;
}

}  // namespace hdboot::harness
