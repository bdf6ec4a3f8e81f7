#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "hdboot/rng.hpp"
#include "hdboot/stats.hpp"

using namespace hdboot;

TEST_CASE("same seed and path reproduce the sequence") {
    const RngStream a(42, {1, 2, 3});
    const RngStream b(42, {1, 2, 3});
    auto ea = a.engine(), eb = b.engine();
    for (int i = 0; i < 1000; ++i) REQUIRE(ea() == eb());
    CHECK(a == b);
    CHECK(a.child(7) == RngStream(42, {1, 2, 3, 7}));
    CHECK(a.child({7, 8}) == a.child(7).child(8));
}

TEST_CASE("distinct paths give distinct keys") {
    std::set<std::uint64_t> keys;
    const RngStream root(5);
    for (std::uint64_t i = 0; i < 200; ++i)
        for (std::uint64_t j = 0; j < 50; ++j) keys.insert(root.child({i, j}).key());
    CHECK(keys.size() == 200u * 50u);
    CHECK(RngStream(5, {0}).key() != RngStream(5, {0, 0}).key());
    CHECK(RngStream(5, {1, 2}).key() != RngStream(5, {2, 1}).key());
    CHECK(RngStream(5).key() != RngStream(6).key());
    CHECK(root.child(StreamTag::Data).key() != root.child(StreamTag::Bootstrap).key());
}

TEST_CASE("uniform output looks uniform and sibling streams are uncorrelated") {
    auto e1 = RngStream(9, {1}).engine();
    auto e2 = RngStream(9, {2}).engine();
    const int n = 200000;
    std::vector<double> u1(n), u2(n);
    for (int i = 0; i < n; ++i) {
        u1[i] = e1.uniform();
        u2[i] = e2.uniform();
        REQUIRE(u1[i] >= 0.0);
        REQUIRE(u1[i] < 1.0);
    }
    CHECK(std::abs(stats::mean(u1) - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(stats::variance(u1) - 1.0 / 12.0) < 0.002);
    CHECK(stats::ks_one_sample(u1, [](double x) { return std::clamp(x, 0.0, 1.0); }) < 1.63 / std::sqrt(n));
    double cov = 0.0;
    for (int i = 0; i < n; ++i) cov += (u1[i] - 0.5) * (u2[i] - 0.5);
    const double corr = cov / n * 12.0;
    CHECK(std::abs(corr) < 5.0 / std::sqrt(n));
}

TEST_CASE("below() is unbiased over small ranges") {
    auto e = RngStream(3).engine();
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = e.below(7);
        REQUIRE(v < 7u);
        ++counts[v];
    }
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
    CHECK(chi2 < 22.5);  // chi-square(6) upper 0.1% point
}

TEST_CASE("engine works with standard distributions") {
    auto e = RngStream(1).engine();
    std::normal_distribution<double> nd;
    double s = 0.0;
    for (int i = 0; i < 1000; ++i) s += nd(e);
    CHECK(std::isfinite(s));
}

TEST_CASE("stream labels are stable and distinguish grid values") {
    CHECK(stream_label(0.5) == stream_label(0.5));
    CHECK(stream_label(0.5) != stream_label(0.3));
    CHECK(stream_label(0.0) != stream_label(-0.0));
    CHECK(stream_label(std::string_view("gaussian")) != stream_label(std::string_view("ellip_exp")));
}
