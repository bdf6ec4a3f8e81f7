#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hdboot/datagen.hpp"
#include "hdboot/rmt.hpp"
#include "hdboot/spectral.hpp"

using namespace hdboot;
using Catch::Approx;
using Eigen::MatrixXd;

namespace {

const cplx I1{0.0, 1.0};

SpectralSummary spectrum(std::vector<double> ev) {
    const auto k = static_cast<Index>(ev.size());
    double tr = 0.0;
    for (double v : ev) tr += v;
    return {std::move(ev), k, tr, k};
}

MatrixXd normal_matrix(Index n, Index p, std::uint64_t seed) {
    auto eng = RngStream(seed).engine();
    std::normal_distribution<double> nd;
    MatrixXd X(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) X(i, j) = nd(eng);
    return X;
}

// |v - G(v)| for the MP equation.
double mp_residual(const StieltjesSolution& s, const DiscreteLaw& H, double r) {
    const cplx v = s.value;
    const cplx integral = H.expect([&](double l) { return cplx(l) / (1.0 + l * v); });
    return std::abs(-1.0 / v - (s.z - r * integral)) * std::abs(v) * std::abs(-1.0 / (s.z - r * integral));
}

DiscreteLaw random_law(std::mt19937_64& g, int atoms, double lo, double hi) {
    std::uniform_real_distribution<double> loc(lo, hi), mass(0.1, 1.0);
    std::vector<DiscreteLaw::Atom> a;
    for (int i = 0; i < atoms; ++i) a.push_back({loc(g), mass(g)});
    return DiscreteLaw::normalized(std::move(a));
}

}  // namespace

TEST_CASE("DiscreteLaw") {
    CHECK_THROWS_AS(DiscreteLaw(std::vector<DiscreteLaw::Atom>{}), input_error);
    CHECK_THROWS_AS(DiscreteLaw({{1.0, 0.5}}), input_error);
    CHECK_THROWS_AS(DiscreteLaw({{1.0, 0.5}, {2.0, -0.5}, {3.0, 1.0}}), input_error);
    CHECK_THROWS_AS(DiscreteLaw({{NAN, 1.0}}), input_error);
    CHECK_NOTHROW(DiscreteLaw({{1.0, 0.25}, {2.0, 0.75}}));
    const auto law = DiscreteLaw::normalized({{1.0, 3.0}, {2.0, 1.0}});
    CHECK(law.expect([](double x) { return x; }) == Approx(1.25));
    const auto q = DiscreteLaw::from_quantiles([](double u) { return u; }, 4);
    CHECK(q.atoms().size() == 4);
    CHECK(q.atoms()[0].location == Approx(0.125));
    SECTION("multinomial limit scale law: w^2 is Poisson(1)") {
        const auto nu = multinomial_limit_scale_law();
        CHECK(nu.expect([](double w) { return w * w; }) == Approx(1.0).epsilon(1e-12));
        CHECK(nu.expect([](double w) { return w * w * w * w; }) == Approx(2.0).epsilon(1e-12));
        CHECK(nu.atoms()[0].location == 0.0);
        CHECK(nu.atoms()[0].mass == Approx(std::exp(-1.0)).epsilon(1e-12));
    }
}

TEST_CASE("mp_support") {
    auto [a, b] = mp_support(0.25);
    CHECK(a == Approx(0.25));
    CHECK(b == Approx(2.25));
    std::tie(a, b) = mp_support(1e-12);
    CHECK(a == Approx(1.0).margin(1e-5));
    CHECK(b == Approx(1.0).margin(1e-5));
    std::tie(a, b) = mp_support(0.5);
    CHECK(a == Approx(0.0857864376269049).epsilon(1e-14));
    CHECK(b == Approx(2.9142135623730951).epsilon(1e-14));
    CHECK_THROWS_AS(mp_support(0.0), input_error);
    CHECK_THROWS_AS(mp_support(1.0), input_error);
}

TEST_CASE("mp_density") {
    const auto [lo, hi] = mp_support(0.3);
    CHECK(mp_density(lo, 0.3) == 0.0);
    CHECK(mp_density(hi, 0.3) == 0.0);
    CHECK(mp_density(-1.0, 0.3) == 0.0);
    CHECK(mp_density(1.0, 0.25) == Approx(std::sqrt(1.25 * 0.75) / (2.0 * std::numbers::pi * 0.25)).epsilon(1e-14));
    CHECK(mp_density(1.0, 0.25) == Approx(0.6164).margin(1e-4));
    SECTION("integrates to one") {
        boost::math::quadrature::tanh_sinh<double> integrator;
        for (double r : {0.01, 0.1, 0.3, 0.5}) {
            const auto [a, b] = mp_support(r);
            const double total = integrator.integrate([r](double x) { return mp_density(x, r); }, a, b);
            INFO("r = " << r);
            CHECK(std::abs(total - 1.0) <= 1e-6);
            CHECK(mp_cdf(b, r) == 1.0);
            CHECK(std::abs(mp_cdf(b - 1e-12, r) - 1.0) <= 1e-6);
        }
    }
    SECTION("cdf is monotone and matches quadrature of the density") {
        boost::math::quadrature::tanh_sinh<double> integrator;
        const double r = 0.5;
        const auto [a, b] = mp_support(r);
        double prev = 0.0;
        for (int i = 1; i < 20; ++i) {
            const double x = a + (b - a) * i / 20.0;
            const double F = mp_cdf(x, r);
            CHECK(F > prev);
            prev = F;
            CHECK(F == Approx(integrator.integrate([r](double t) { return mp_density(t, r); }, a, x)).margin(1e-9));
        }
    }
}

TEST_CASE("mp_stieltjes") {
    const auto H = DiscreteLaw::point_mass(1.0);
    SECTION("Stieltjes inversion recovers the density") {
        const double r = 0.5;
        const auto [a, b] = mp_support(r);
        CHECK(std::abs(std::imag(mp_m_from_v(mp_stieltjes({1.5, 0.01}, H, r).value, {1.5, 0.01}, r)) /
                           std::numbers::pi -
                       mp_density(1.5, r)) <= 0.01);
        for (int i = 0; i < 50; ++i) {
            const double x = a + (b - a) * (i + 1) / 51.0;
            const cplx z{x, 1e-3};
            const auto sol = mp_stieltjes(z, H, r);
            const double dens = std::imag(mp_m_from_v(sol.value, z, r)) / std::numbers::pi;
            INFO("x = " << x);
            CHECK(std::abs(dens - mp_density(x, r)) <= 0.01);
        }
    }
    SECTION("large |z| asymptotics") {
        const cplx z = 100.0 * I1;
        const auto sol = mp_stieltjes(z, H, 0.5);
        CHECK(std::abs(sol.value + 1.0 / z) <= 2.0 / std::norm(z));
    }
    SECTION("agrees with a simulated spectrum") {
        const DataMatrix X(normal_matrix(4000, 2000, 11));
        const auto ev = full_spectrum(X, CovarianceOptions::uncentered());
        const cplx z = I1;
        const double r = 0.5;
        const cplx m_emp = empirical_stieltjes(ev, z);
        const cplx v_emp = (1.0 - r) * (-1.0 / z) + r * m_emp;
        const auto sol = mp_stieltjes(z, H, r);
        CHECK(std::abs(sol.value - v_emp) <= 0.01);
        CHECK(std::abs(mp_m_from_v(sol.value, z, r) - m_emp) <= 0.01);
    }
    SECTION("invalid arguments and non-convergence") {
        CHECK_THROWS_AS(mp_stieltjes({1.0, 0.0}, H, 0.5), input_error);
        CHECK_THROWS_AS(mp_stieltjes({1.0, 1e-5}, H, 0.5), input_error);
        CHECK_THROWS_AS(mp_stieltjes(I1, H, 0.0), input_error);
        SolverOptions tight;
        tight.max_iter = 2;
        tight.tol = 1e-15;
        CHECK_THROWS_AS(mp_stieltjes({1.0, 0.01}, H, 0.5, tight), solver_error);
    }
}

TEST_CASE("weighted_stieltjes") {
    const auto H = DiscreteLaw::point_mass(1.0);
    const auto unit = DiscreteLaw::point_mass(1.0);
    SECTION("unit weights reduce to the unweighted equation") {
        for (double r : {0.1, 0.3, 0.5}) {
            for (int i = 0; i < 20; ++i) {
                const cplx z{-0.5 + 0.2 * i, 0.05 + 0.1 * (i % 5)};
                const auto w = weighted_stieltjes(z, H, unit, r);
                const cplx m = mp_m_from_v(mp_stieltjes(z, H, r).value, z, r);
                INFO("r = " << r << ", z = " << z);
                CHECK(std::abs(w.value - m) <= 1e-8);
            }
        }
    }
    SECTION("multinomial-limit weights move the transform") {
        const cplx z{1.0, 0.05};
        const SolverOptions opts;
        const auto w = weighted_stieltjes(z, H, multinomial_limit_scale_law(), 0.5, opts);
        const cplx m = mp_m_from_v(mp_stieltjes(z, H, 0.5).value, z, 0.5);
        CHECK(std::abs(w.value - m) > 10.0 * opts.tol);
        CHECK(std::abs(w.value - m) > 1e-3);
    }
    SECTION("agrees with a simulated weighted covariance") {
        // Covariance weights E^2 / 2 with E ~ Exp(1): scale law of E / sqrt(2).
        const Index n = 4000, p = 2000;
        const double r = static_cast<double>(p) / static_cast<double>(n);
        const DataMatrix X(normal_matrix(n, p, 12));
        auto eng = RngStream(13).engine();
        std::vector<double> w(static_cast<std::size_t>(n));
        for (auto& v : w) {
            const double e = -std::log1p(-eng.uniform());
            v = e * e / 2.0;
        }
        const auto ev = weighted_top_eigenvalues(X, w, p, CovarianceOptions::uncentered());
        const auto nu = DiscreteLaw::from_quantiles([](double u) { return -std::log1p(-u) / std::sqrt(2.0); }, 4000);
        const cplx z{1.0, 0.1};
        const auto sol = weighted_stieltjes(z, H, nu, r);
        CHECK(std::abs(sol.value - empirical_stieltjes(ev, z)) <= 0.01);
    }
    SECTION("errors") {
        CHECK_THROWS_AS(weighted_stieltjes({1.0, 0.0}, H, unit, 0.5), input_error);
        CHECK_THROWS_AS(weighted_stieltjes(I1, H, DiscreteLaw::point_mass(-1.0), 0.5), input_error);
    }
}

TEST_CASE("Herglotz property and residual contract") {
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> re(-2.0, 6.0), im(0.01, 3.0), rr(0.05, 0.9);
    const SolverOptions opts;
    for (int inst = 0; inst < 200; ++inst) {
        const cplx z{re(g), im(g)};
        const double r = rr(g);
        const auto H = random_law(g, 1 + inst % 4, 0.5, 5.0);
        const auto nu = random_law(g, 1 + inst % 3, 0.0, 2.0);
        const auto s = mp_stieltjes(z, H, r, opts);
        CHECK(s.value.imag() > 0.0);
        CHECK(s.residual <= opts.tol);
        CHECK(mp_residual(s, H, r) <= 10.0 * opts.tol);
        CHECK(std::imag(mp_m_from_v(s.value, z, r)) > 0.0);

        const auto w = weighted_stieltjes(z, H, nu, r, opts);
        REQUIRE(w.gamma.has_value());
        CHECK(w.value.imag() > 0.0);
        CHECK(w.gamma->imag() > 0.0);
        CHECK(w.residual <= opts.tol);
        // Re-substitute both equations.
        const cplx Iw = nu.expect([&](double x) { return cplx(x * x) / (1.0 + r * x * x * *w.gamma); });
        const cplx m = H.expect([&](double t) { return 1.0 / (t * Iw - z); });
        const cplx gam = H.expect([&](double t) { return cplx(t) / (t * Iw - z); });
        CHECK(std::abs(m - w.value) <= 1e-12 * std::max(1.0, std::abs(m)));
        CHECK(std::abs(gam - *w.gamma) <= 10.0 * opts.tol);
    }
}

TEST_CASE("johnstone_params") {
    auto e = johnstone_params(100, 100);
    CHECK(e.mu_np == Approx(4.0));
    CHECK(e.sigma_np == Approx(2.0 * std::cbrt(2.0)).epsilon(1e-14));
    CHECK(e.sigma_np == Approx(2.51984).epsilon(1e-5));
    e = johnstone_params(1000000000, 1);
    CHECK(e.mu_np == Approx(1.0).margin(1e-4));
    e = johnstone_params(1000, 500);
    CHECK(e.mu_np == Approx(2.9142135623730951).epsilon(1e-14));
    CHECK_THROWS_AS(johnstone_params(0, 1), input_error);
}

TEST_CASE("phase_transition") {
    CHECK(phase_transition(0.25) == 1.5);
    CHECK(phase_transition(1.0) == 2.0);
    CHECK(phase_transition(0.3) == Approx(1.5477225575051661).epsilon(1e-14));
}

TEST_CASE("bbp_params") {
    const double r = 0.25;
    auto s = bbp_params(1.0 + 0.9 * std::sqrt(r), 400, 100);
    CHECK(s.regime == SpikeRegime::Subcritical);
    CHECK_FALSE(s.mu_eta.has_value());
    CHECK_FALSE(s.sigma_eta.has_value());
    s = bbp_params(3.0, 400, 100);
    CHECK(s.eta == Approx(4.0));
    CHECK(s.regime == SpikeRegime::Supercritical);
    CHECK(*s.mu_eta == Approx(3.375));
    CHECK(*s.sigma_eta == Approx(2.9047375096555625).epsilon(1e-12));
    s = bbp_params(1.0 + 3.0 * std::sqrt(0.3), 1000, 300);
    CHECK(*s.mu_eta - (1.0 + 3.0 * std::sqrt(0.3)) == Approx(0.483).margin(5e-4));
    SECTION("mu strictly increasing above the transition") {
        for (double rr : {0.01, 0.1, 0.3, 0.5}) {
            const Index n = 1000, p = static_cast<Index>(std::llround(rr * 1000));
            const double sr = std::sqrt(static_cast<double>(p) / n);
            double prev = -INFINITY;
            for (int i = 1; i < 200; ++i) {
                const double l1 = 1.0 + sr * (1.0 + 9.0 * i / 200.0);
                const auto b = bbp_params(l1, n, p);
                REQUIRE(b.regime == SpikeRegime::Supercritical);
                CHECK(*b.mu_eta > prev);
                prev = *b.mu_eta;
            }
        }
    }
    CHECK_THROWS_AS(bbp_params(1.0, 10, 5), input_error);
}

TEST_CASE("azuma_bound") {
    // Exponent p^2 v^2 t^2 / (16 n): 6.25 at t = 1, 0.0625 at t = 0.1.
    CHECK(azuma_bound(1.0, 100, 1.0, 100) == Approx(4.0 * std::exp(-6.25)).epsilon(1e-14));
    CHECK(azuma_bound(1.0, 100, 1.0, 100) == Approx(0.007722).epsilon(1e-3));
    CHECK(azuma_bound(0.1, 100, 1.0, 100) == 1.0);
    CHECK(azuma_bound(1e-9, 100, 1.0, 100) == 1.0);
    const double e1 = -std::log(azuma_bound(1.0, 100, 1.0, 100) / 4.0);
    const double e2 = -std::log(azuma_bound(1.0, 200, 1.0, 100) / 4.0);
    CHECK(e2 == Approx(4.0 * e1));
    CHECK_THROWS_AS(azuma_bound(0.0, 100, 1.0, 100), input_error);
}

TEST_CASE("wielandt_gap_bound") {
    auto b = wielandt_gap_bound(spectrum({2.0}), 1.0, 1.0, 100, 1, WielandtForm::Unscaled);
    REQUIRE(b.has_value());
    CHECK(*b == Approx(0.01 / 1.99).epsilon(1e-14));
    CHECK(*b == Approx(0.0050251).epsilon(1e-5));
    b = wielandt_gap_bound(spectrum({2.0}), 1.0, 1.0, 100, 1);
    CHECK(*b == Approx(0.02 / 1.99).epsilon(1e-14));
    CHECK_FALSE(wielandt_gap_bound(spectrum({0.001}), 1.0, 1.0, 100, 1).has_value());
    CHECK_FALSE(wielandt_gap_bound(spectrum({0.001}), 1.0, 1.0, 100, 1, WielandtForm::Unscaled).has_value());
    CHECK_THROWS_AS(wielandt_gap_bound(spectrum({3.0}), 1.0, 1.0, 100, 2), input_error);

    SECTION("simulated spiked block model") {
        // Sigma = diag(spike, n^-a, ..., n^-a), q = 1, a = 1, n = 500.
        const Index n = 500, p = 50, q = 1;
        const double alpha = 1.0, spike = 1.0 + 50.0 * std::sqrt(0.1);
        const double shrink = std::pow(static_cast<double>(n), -alpha);
        int held = 0, checked = 0;
        for (std::uint64_t rep = 0; rep < 200; ++rep) {
            MatrixXd X = normal_matrix(n, p, 1000 + rep);
            X.col(0) *= std::sqrt(spike);
            X.rightCols(p - q) *= std::sqrt(shrink);
            const MatrixXd S = X.transpose() * X / static_cast<double>(n);
            const auto sS = spectrum_of(S);
            const auto sT = spectrum_of(S.topLeftCorner(q, q));
            const double vmax = spectrum_of(S.bottomRightCorner(p - q, p - q) / shrink)[0];
            const double diff = sS[0] - sT[0];
            CHECK(diff >= -1e-12 * sS[0]);
            const auto bound = wielandt_gap_bound(spectrum({sT[0]}), vmax, alpha, n, q);
            if (!bound) continue;
            ++checked;
            held += diff <= *bound + 1e-12 * sS[0];
        }
        CHECK(checked == 200);
        CHECK(held == checked);
    }
}
