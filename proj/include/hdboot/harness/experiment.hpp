#pragma once

// Monte-Carlo runner over (r, c) cells and the per-cell summary.

#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

#include "../bootstrap.hpp"
#include "../datagen.hpp"
#include "../rng.hpp"
#include "../spectral.hpp"
#include "../stats.hpp"
#include "config.hpp"
#include "parallel.hpp"

namespace hdboot::harness {

inline constexpr std::array<IntervalMethod, 3> kIntervalMethods{IntervalMethod::Percentile, IntervalMethod::Normal,
                                                                IntervalMethod::BiasCorrected};

struct CellId {
    EllipticalKind law = EllipticalKind::Gaussian;
    double r = 0.0;
    double c = 0.0;
    StatisticKind statistic = StatisticKind::TopEigenvalue;

    friend bool operator==(const CellId&, const CellId&) = default;
};

inline double spike_value(double r, double c) { return 1.0 + c * std::sqrt(r); }

// Population value of a statistic; gap_ratio has none.
inline std::optional<double> population_value(StatisticKind s, double lambda1) {
    switch (s) {
        case StatisticKind::TopEigenvalue: return lambda1;
        case StatisticKind::Gap: return lambda1 - 1.0;
        case StatisticKind::GapRatio: return std::nullopt;
    }
    return std::nullopt;
}

// Value under the null lambda1 = 1.
inline std::optional<double> null_value(StatisticKind s) {
    switch (s) {
        case StatisticKind::TopEigenvalue: return 1.0;
        case StatisticKind::Gap: return 0.0;
        case StatisticKind::GapRatio: return std::nullopt;
    }
    return std::nullopt;
}

struct SimulationRecord {
    int sim = 0;
    double point_estimate = 0.0;
    // NaN when B < 2 (variance and intervals) or B < 1 (bias).
    double boot_bias = 0.0;
    double boot_variance = 0.0;
    std::array<IntervalResult, 3> intervals{};  // order of kIntervalMethods
    std::array<std::optional<bool>, 3> covers_true{};
    std::array<std::optional<bool>, 3> covers_null{};

    friend bool operator==(const SimulationRecord& a, const SimulationRecord& b) {
        auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
        return a.sim == b.sim && same(a.point_estimate, b.point_estimate) && same(a.boot_bias, b.boot_bias) &&
               same(a.boot_variance, b.boot_variance) && a.intervals == b.intervals &&
               a.covers_true == b.covers_true && a.covers_null == b.covers_null;
    }
};

struct KeptDistribution {
    int sim = 0;
    BootstrapDistribution dist;
};

struct ResultRow {
    CellId cell;
    Index n = 0;
    Index p = 0;
    std::optional<double> true_value;
    std::optional<double> null_value;
    std::vector<SimulationRecord> records;
    // Point estimates from the independent truth run, if any.
    std::vector<double> truth_estimates;
    std::vector<KeptDistribution> kept;
    std::optional<std::string> failure;
};

namespace detail {

inline RngStream cell_stream(const ExperimentConfig& cfg, StreamTag tag, double r, double c) {
    return RngStream(cfg.master_seed)
        .child({static_cast<std::uint64_t>(tag), stream_label(to_string(cfg.law)), stream_label(r), stream_label(c)});
}

inline CovarianceModel cell_model(const ExperimentConfig& cfg, double r, double c) {
    return {cfg.p_for(r), spike_value(r, c), 1.0, cfg.basis};
}

inline Eigen::MatrixXd cell_factor(const ExperimentConfig& cfg, double r, double c, std::optional<int> sim) {
    auto s = cell_stream(cfg, StreamTag::Basis, r, c);
    if (sim) s = s.child(static_cast<std::uint64_t>(*sim));
    return build_sigma_factor(cell_model(cfg, r, c), s, cfg.n);
}

inline SimulationRecord make_record(int sim, const BootstrapDistribution& dist, double level,
                                    const std::optional<double>& truth, const std::optional<double>& null) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    SimulationRecord rec;
    rec.sim = sim;
    rec.point_estimate = dist.point_estimate;
    rec.boot_bias = dist.B() >= 1 ? bias_estimate(dist) : nan;
    rec.boot_variance = dist.B() >= 2 ? variance_estimate(dist) : nan;
    for (std::size_t m = 0; m < kIntervalMethods.size(); ++m) {
        if (dist.B() >= 2) {
            rec.intervals[m] = confidence_interval(dist, kIntervalMethods[m], level);
            if (truth) rec.covers_true[m] = rec.intervals[m].covers(*truth);
            if (null) rec.covers_null[m] = rec.intervals[m].covers(*null);
        } else {
            rec.intervals[m] = {kIntervalMethods[m], level, nan, nan, false};
        }
    }
    return rec;
}

}  // namespace detail

// One ResultRow per (r, c, statistic), ordered by ratio, then multiplier, then
// statistic as listed in the config. Every simulation s of a cell draws its
// data from stream (master_seed, Data, law, r, c, s) and its resampling
// weights from (master_seed, Bootstrap, law, r, c, s), so the output does not
// depend on the worker count.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, unsigned workers = 1) {
    cfg.validate();
    const Index k = cfg.eigenvalues_needed();
    const auto opts = cfg.covariance_options();
    const EllipticalLaw law{cfg.law};

    struct Cell {
        double r, c;
        Eigen::MatrixXd factor;
        std::optional<std::string> setup_error;
    };
    std::vector<Cell> cells;
    for (double r : cfg.ratios)
        for (double c : cfg.spike_multipliers) cells.push_back({r, c, {}, std::nullopt});

    if (!cfg.redraw_basis_per_simulation) {
        parallel_for(cells.size(), workers, [&](std::size_t i) {
            try {
                cells[i].factor = detail::cell_factor(cfg, cells[i].r, cells[i].c, std::nullopt);
            } catch (const std::exception& e) {
                cells[i].setup_error = e.what();
            }
        });
    }

    const std::size_t nstat = cfg.statistics.size();
    std::vector<Statistic> stats;
    for (auto s : cfg.statistics) stats.push_back(make_statistic(s));

    struct Slot {
        std::vector<std::optional<SimulationRecord>> records;  // per statistic
        std::vector<std::string> errors;                       // per statistic, empty when fine
        std::vector<BootstrapDistribution> dists;              // kept distributions
        std::vector<double> truth;                             // truth-run point estimates
    };
    const auto nsim = static_cast<std::size_t>(cfg.nsim);
    const auto ntruth = static_cast<std::size_t>(cfg.truth_nsim);
    const std::size_t per_cell = nsim + ntruth;
    std::vector<Slot> slots(cells.size() * per_cell);

    parallel_for(slots.size(), workers, [&](std::size_t u) {
        const std::size_t ci = u / per_cell;
        const std::size_t local = u % per_cell;
        const bool truth_run = local >= nsim;
        const int sim = static_cast<int>(truth_run ? local - nsim : local);
        const Cell& cell = cells[ci];
        Slot& slot = slots[u];
        slot.records.resize(nstat);
        slot.errors.assign(nstat, {});
        try {
            if (cell.setup_error) throw std::runtime_error(*cell.setup_error);
            const auto data_stream =
                detail::cell_stream(cfg, truth_run ? StreamTag::Truth : StreamTag::Data, cell.r, cell.c)
                    .child(static_cast<std::uint64_t>(sim));
            const auto X = cfg.redraw_basis_per_simulation
                               ? generate_dataset(detail::cell_factor(cfg, cell.r, cell.c, sim), law, cfg.n, data_stream)
                               : generate_dataset(cell.factor, law, cfg.n, data_stream);
            const auto point = top_eigenvalues(X, k, opts);
            if (truth_run) {
                slot.truth.resize(nstat, std::numeric_limits<double>::quiet_NaN());
                for (std::size_t s = 0; s < nstat; ++s) {
                    try {
                        slot.truth[s] = stats[s].eval(point);
                    } catch (const std::exception& e) {
                        slot.errors[s] = e.what();
                    }
                }
                return;
            }
            BootstrapConfig bcfg;
            bcfg.B = cfg.B;
            bcfg.centering = cfg.replicate_centering;
            bcfg.rng = detail::cell_stream(cfg, StreamTag::Bootstrap, cell.r, cell.c).child(static_cast<std::uint64_t>(sim));
            const auto spectra = bootstrap_spectra(X, k, bcfg, opts);
            const bool keep = sim < cfg.keep_distributions;
            if (keep) slot.dists.resize(nstat);
            const double lambda1 = spike_value(cell.r, cell.c);
            for (std::size_t s = 0; s < nstat; ++s) {
                try {
                    BootstrapDistribution dist{stats[s].name, stats[s].eval(point), {}};
                    dist.replicates.reserve(spectra.size());
                    for (const auto& rep : spectra) dist.replicates.push_back(stats[s].eval(rep));
                    slot.records[s] = detail::make_record(sim, dist, cfg.ci_level,
                                                          population_value(cfg.statistics[s], lambda1),
                                                          null_value(cfg.statistics[s]));
                    if (keep) slot.dists[s] = std::move(dist);
                } catch (const std::exception& e) {
                    slot.errors[s] = e.what();
                }
            }
        } catch (const std::exception& e) {
            for (auto& err : slot.errors) err = e.what();
        }
    });

    // Ordered fold into rows.
    std::vector<ResultRow> rows;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const double lambda1 = spike_value(cells[ci].r, cells[ci].c);
        for (std::size_t s = 0; s < nstat; ++s) {
            ResultRow row;
            row.cell = {cfg.law, cells[ci].r, cells[ci].c, cfg.statistics[s]};
            row.n = cfg.n;
            row.p = cfg.p_for(cells[ci].r);
            row.true_value = population_value(cfg.statistics[s], lambda1);
            row.null_value = null_value(cfg.statistics[s]);
            for (std::size_t local = 0; local < per_cell; ++local) {
                const Slot& slot = slots[ci * per_cell + local];
                if (!slot.errors[s].empty()) {
                    if (!row.failure) {
                        const bool truth_run = local >= nsim;
                        row.failure = std::string(truth_run ? "truth simulation " : "simulation ") +
                                      std::to_string(truth_run ? local - nsim : local) + ": " + slot.errors[s];
                    }
                    continue;
                }
                if (local >= nsim) {
                    row.truth_estimates.push_back(slot.truth[s]);
                } else {
                    row.records.push_back(*slot.records[s]);
                    if (!slot.dists.empty()) row.kept.push_back({static_cast<int>(local), slot.dists[s]});
                }
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

struct CoverageEstimate {
    double fraction = 0.0;
    double se = 0.0;  // sqrt(p (1 - p) / count)
    std::size_t count = 0;
};

struct SummaryRow {
    CellId cell;
    Index n = 0;
    Index p = 0;
    std::size_t nsim = 0;
    std::optional<double> true_value;
    double mean_point_estimate = 0.0;
    std::optional<double> true_bias;      // mean point estimate - population value
    std::optional<double> true_variance;  // variance of the point estimates
    std::optional<double> median_boot_bias;
    std::optional<double> median_boot_variance;
    std::optional<double> median_variance_ratio;  // median of boot variance / true variance
    std::array<std::optional<CoverageEstimate>, 3> coverage_true{};
    std::array<std::optional<CoverageEstimate>, 3> coverage_null{};
    double bc_degenerate_fraction = 0.0;
};

struct SummaryTable {
    std::vector<SummaryRow> rows;
    // Cells without a summary row, with the reason.
    std::vector<std::pair<CellId, std::string>> flagged;
};

namespace detail {

inline std::optional<CoverageEstimate> coverage_of(const std::vector<SimulationRecord>& recs, std::size_t m,
                                                   bool vs_truth) {
    std::size_t hit = 0, count = 0;
    for (const auto& r : recs) {
        const auto& flag = vs_truth ? r.covers_true[m] : r.covers_null[m];
        if (!flag) continue;
        ++count;
        hit += *flag ? 1 : 0;
    }
    if (count == 0) return std::nullopt;
    const double f = static_cast<double>(hit) / static_cast<double>(count);
    return CoverageEstimate{f, std::sqrt(f * (1.0 - f) / static_cast<double>(count)), count};
}

inline std::optional<double> median_finite(const std::vector<double>& v) {
    std::vector<double> f;
    for (double x : v)
        if (std::isfinite(x)) f.push_back(x);
    if (f.empty()) return std::nullopt;
    return stats::median(f);
}

}  // namespace detail

// Aggregates rows into per-cell summaries. Failed or empty cells are listed
// in `flagged` instead of producing a row. The true bias and variance use the
// truth-run estimates when present, otherwise the simulations themselves.
inline SummaryTable summarize(const std::vector<ResultRow>& rows) {
    SummaryTable table;
    for (const auto& row : rows) {
        if (row.failure) {
            table.flagged.emplace_back(row.cell, *row.failure);
            continue;
        }
        if (row.records.empty()) {
            table.flagged.emplace_back(row.cell, "no simulations");
            continue;
        }
        SummaryRow s;
        s.cell = row.cell;
        s.n = row.n;
        s.p = row.p;
        s.nsim = row.records.size();
        s.true_value = row.true_value;

        std::vector<double> points, biases, variances;
        for (const auto& r : row.records) {
            points.push_back(r.point_estimate);
            biases.push_back(r.boot_bias);
            variances.push_back(r.boot_variance);
        }
        s.mean_point_estimate = stats::mean(points);
        const auto& truth_sample = row.truth_estimates.empty() ? points : row.truth_estimates;
        if (row.true_value) s.true_bias = stats::mean(truth_sample) - *row.true_value;
        if (truth_sample.size() >= 2) s.true_variance = stats::variance(truth_sample);
        s.median_boot_bias = detail::median_finite(biases);
        s.median_boot_variance = detail::median_finite(variances);
        if (s.true_variance && *s.true_variance > 0.0) {
            std::vector<double> ratios;
            for (double v : variances) ratios.push_back(v / *s.true_variance);
            s.median_variance_ratio = detail::median_finite(ratios);
        }
        for (std::size_t m = 0; m < kIntervalMethods.size(); ++m) {
            s.coverage_true[m] = detail::coverage_of(row.records, m, true);
            s.coverage_null[m] = detail::coverage_of(row.records, m, false);
        }
        std::size_t degenerate = 0;
        for (const auto& r : row.records) degenerate += r.intervals[2].degenerate ? 1 : 0;
        s.bc_degenerate_fraction = static_cast<double>(degenerate) / static_cast<double>(s.nsim);
        table.rows.push_back(std::move(s));
    }
    return table;
}

}  // namespace hdboot::harness
