#pragma once

// Small descriptive-statistics helpers shared by the engine and the harness.

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "errors.hpp"

namespace hdboot::stats {

inline double mean(std::span<const double> x) {
    detail::require(!x.empty(), "mean: empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Unbiased sample variance (divisor size - 1).
inline double variance(std::span<const double> x) {
    detail::require(x.size() >= 2, "variance: need at least 2 values");
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

// Type-7 quantile (linear interpolation between order statistics) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double prob) {
    detail::require(!sorted.empty(), "quantile: empty sample");
    detail::require(prob >= 0.0 && prob <= 1.0, "quantile: probability outside [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> x, double prob) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    return quantile_sorted(s, prob);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

inline double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<>(), x); }

inline double normal_quantile(double prob) {
    detail::require(prob > 0.0 && prob < 1.0, "normal_quantile: probability must be in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<>(), prob);
}

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    detail::require(!a.empty() && !b.empty(), "ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

// One-sample KS distance between the empirical law of x and a continuous CDF.
inline double ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
    detail::require(!x.empty(), "ks_one_sample: empty sample");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return d;
}

}  // namespace hdboot::stats
