#pragma once

// Kernel density curves of centered bootstrap distributions.
//
// Each distribution contributes theta*_b - theta_hat. The kernel is Gaussian
// with Silverman's bandwidth h = 0.9 min(sd, IQR / 1.34) B^(-1/5), falling back
// to sd when the IQR is zero. A distribution whose replicates are all equal
// gets a single point-mass marker row instead of a curve.

#include <algorithm>
#include <limits>
#include <span>
#include <tuple>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "../bootstrap.hpp"
#include "../errors.hpp"
#include "../stats.hpp"
#include "output.hpp"

namespace hdboot::harness {

struct GridSpec {
    std::size_t points = 512;
    // Explicit range; when absent the grid spans every centered replicate
    // plus four bandwidths on each side.
    std::optional<std::pair<double, double>> range;
};

enum class DensityKind { Kde, PointMass };

struct DensityRow {
    std::string dist_id;
    double x = 0.0;
    double density = 0.0;  // +inf for a point-mass marker
    DensityKind kind = DensityKind::Kde;
};

inline double silverman_bandwidth(std::span<const double> x) {
    hdboot::detail::require(x.size() >= 2, "silverman_bandwidth: need at least 2 values");
    const double sd = std::sqrt(stats::variance(x));
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double iqr = stats::quantile_sorted(s, 0.75) - stats::quantile_sorted(s, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

inline std::vector<DensityRow> emit_density_data(const std::vector<std::pair<std::string, BootstrapDistribution>>& dists,
                                                 const GridSpec& grid = {}) {
    hdboot::detail::require(grid.points >= 2, "emit_density_data: grid needs at least 2 points");
    struct Prepared {
        std::vector<double> centered;
        double h = 0.0;  // 0 marks a point mass
    };
    std::vector<Prepared> prep;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [id, d] : dists) {
        hdboot::detail::require(d.B() >= 2, "emit_density_data: '" + id + "' has fewer than 2 replicates");
        Prepared p;
        for (double v : d.replicates) p.centered.push_back(v - d.point_estimate);
        const auto [mn, mx] = std::minmax_element(p.centered.begin(), p.centered.end());
        if (*mn != *mx) {
            p.h = silverman_bandwidth(p.centered);
            lo = std::min(lo, *mn - 4.0 * p.h);
            hi = std::max(hi, *mx + 4.0 * p.h);
        }
        prep.push_back(std::move(p));
    }
    if (grid.range) {
        hdboot::detail::require(grid.range->first < grid.range->second, "emit_density_data: empty grid range");
        std::tie(lo, hi) = *grid.range;
    }

    std::vector<DensityRow> out;
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t k = 0; k < dists.size(); ++k) {
        const auto& p = prep[k];
        const auto& id = dists[k].first;
        if (p.h == 0.0) {
            out.push_back({id, p.centered.front(), std::numeric_limits<double>::infinity(), DensityKind::PointMass});
            continue;
        }
        const double scale = inv_sqrt_2pi / (static_cast<double>(p.centered.size()) * p.h);
        for (std::size_t g = 0; g < grid.points; ++g) {
            const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid.points - 1);
            double acc = 0.0;
            for (double v : p.centered) {
                const double u = (x - v) / p.h;
                acc += std::exp(-0.5 * u * u);
            }
            out.push_back({id, x, acc * scale, DensityKind::Kde});
        }
    }
    return out;
}

inline constexpr std::string_view kDensityHeader = "dist_id,x,density,kind";

inline void write_density_csv(std::ostream& out, const std::vector<DensityRow>& rows) {
    out << kDensityHeader << '\n';
    for (const auto& r : rows)
        out << csv_quote(r.dist_id) << ',' << format_number(r.x) << ',' << format_number(r.density) << ','
            << (r.kind == DensityKind::Kde ? "kde" : "point_mass") << '\n';
}

inline void emit_density_csv(const std::vector<DensityRow>& rows, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_density_csv(out, rows);
    detail::finish_output(out, path);
}

}  // namespace hdboot::harness
