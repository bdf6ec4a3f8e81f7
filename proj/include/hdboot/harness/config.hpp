#pragma once

// Experiment configuration, presets and its JSON form. The JSON object
// mirrors ExperimentConfig field for field; unknown keys are rejected and
// missing keys keep the value they already had (preset or default).

#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "../bootstrap.hpp"
#include "../datagen.hpp"
#include "../errors.hpp"

namespace hdboot::harness {

enum class StatisticKind { TopEigenvalue, Gap, GapRatio };

inline std::string_view to_string(StatisticKind s) {
    switch (s) {
        case StatisticKind::TopEigenvalue: return "top_eigenvalue";
        case StatisticKind::Gap: return "gap";
        case StatisticKind::GapRatio: return "gap_ratio";
    }
    return "unknown";
}

inline std::optional<StatisticKind> parse_statistic_kind(std::string_view s) {
    for (auto k : {StatisticKind::TopEigenvalue, StatisticKind::Gap, StatisticKind::GapRatio})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

inline Statistic make_statistic(StatisticKind k) {
    switch (k) {
        case StatisticKind::TopEigenvalue: return statistics::top_eigenvalue();
        case StatisticKind::Gap: return statistics::gap();
        case StatisticKind::GapRatio: return statistics::gap_ratio();
    }
    throw input_error("unknown statistic");
}

enum class Preset { Desk, Paper };

inline std::optional<Preset> parse_preset(std::string_view s) {
    if (s == "desk") return Preset::Desk;
    if (s == "paper") return Preset::Paper;
    return std::nullopt;
}

struct ExperimentConfig {
    Index n = 500;
    std::vector<double> ratios{0.01, 0.1, 0.3, 0.5};
    // lambda1 = 1 + c sqrt(r) for each c.
    std::vector<double> spike_multipliers{0.0, 0.9, 1.1, 1.5, 2.0, 3.0, 6.0, 11.0, 50.0, 100.0};
    EllipticalKind law = EllipticalKind::Gaussian;
    int nsim = 200;
    int B = 199;
    std::vector<StatisticKind> statistics{StatisticKind::TopEigenvalue};
    double ci_level = 0.95;
    std::uint64_t master_seed = 20240917;
    Divisor divisor = Divisor::NMinus1;
    bool center = true;
    Basis basis = Basis::RandomOrthogonal;
    // Draw a fresh eigenbasis for every simulation instead of once per cell.
    bool redraw_basis_per_simulation = false;
    ReplicateCentering replicate_centering = ReplicateCentering::ResampleMean;
    // > 0: estimate the true bias / variance from this many extra simulations
    // instead of reusing the nsim bootstrap simulations.
    int truth_nsim = 0;
    // Number of simulations per cell whose full bootstrap distributions are kept.
    int keep_distributions = 0;

    static ExperimentConfig preset(Preset p) {
        ExperimentConfig c;
        if (p == Preset::Paper) {
            c.n = 1000;
            c.nsim = 1000;
            c.B = 999;
        }
        return c;
    }

    CovarianceOptions covariance_options() const { return {center, divisor}; }

    Index p_for(double r) const { return static_cast<Index>(std::llround(r * static_cast<double>(n))); }

    Index eigenvalues_needed() const {
        Index k = 1;
        for (auto s : statistics) k = std::max(k, make_statistic(s).eigenvalues_needed);
        return k;
    }

    void validate() const {
        hdboot::detail::require(n >= 2, "config: n must be >= 2");
        hdboot::detail::require(!ratios.empty(), "config: ratios must not be empty");
        hdboot::detail::require(!spike_multipliers.empty(), "config: spike_multipliers must not be empty");
        hdboot::detail::require(!statistics.empty(), "config: statistics must not be empty");
        hdboot::detail::require(nsim >= 1, "config: nsim must be >= 1");
        hdboot::detail::require(B >= 1, "config: B must be >= 1");
        hdboot::detail::require(ci_level > 0.0 && ci_level < 1.0, "config: ci_level must be in (0, 1)");
        hdboot::detail::require(truth_nsim >= 0 && keep_distributions >= 0, "config: counts must be non-negative");
        const Index k = eigenvalues_needed();
        for (double r : ratios) {
            hdboot::detail::require(r > 0.0 && std::isfinite(r), "config: ratios must be positive");
            const Index p = p_for(r);
            hdboot::detail::require(p >= 1, "config: round(r * n) must be >= 1");
            hdboot::detail::require(p >= k && n >= k, "config: statistics need more eigenvalues than min(n, p)");
        }
        for (double c : spike_multipliers)
            hdboot::detail::require(c >= 0.0 && std::isfinite(c), "config: multipliers must be >= 0");
    }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string_view divisor_name(Divisor d) { return d == Divisor::N ? "n" : "n_minus_1"; }
inline std::string_view basis_name(Basis b) { return b == Basis::Identity ? "identity" : "random_orthogonal"; }
inline std::string_view centering_name(ReplicateCentering c) {
    return c == ReplicateCentering::ResampleMean ? "resample_mean" : "original_mean";
}

template <class T, class Parse>
T parse_enum(const nlohmann::json& j, std::string_view key, Parse&& parse) {
    if (!j.is_string()) throw input_error("config: '" + std::string(key) + "' must be a string");
    auto v = parse(j.get<std::string>());
    if (!v) throw input_error("config: bad value for '" + std::string(key) + "': " + j.get<std::string>());
    return *v;
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json stats = nlohmann::json::array();
    for (auto s : c.statistics) stats.push_back(std::string(to_string(s)));
    return {
        {"n", c.n},
        {"ratios", c.ratios},
        {"spike_multipliers", c.spike_multipliers},
        {"law", std::string(to_string(c.law))},
        {"nsim", c.nsim},
        {"B", c.B},
        {"statistics", stats},
        {"ci_level", c.ci_level},
        {"master_seed", c.master_seed},
        {"divisor", std::string(detail::divisor_name(c.divisor))},
        {"center", c.center},
        {"basis", std::string(detail::basis_name(c.basis))},
        {"redraw_basis_per_simulation", c.redraw_basis_per_simulation},
        {"replicate_centering", std::string(detail::centering_name(c.replicate_centering))},
        {"truth_nsim", c.truth_nsim},
        {"keep_distributions", c.keep_distributions},
    };
}

// Applies the keys present in j on top of base.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
    if (!j.is_object()) throw input_error("config: top level must be a JSON object");
    static const std::set<std::string> known{"n",          "ratios",         "spike_multipliers",
                                             "law",        "nsim",           "B",
                                             "statistics", "ci_level",       "master_seed",
                                             "divisor",    "center",         "basis",
                                             "redraw_basis_per_simulation", "replicate_centering",
                                             "truth_nsim", "keep_distributions"};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw input_error("config: unknown key '" + key + "'");

    ExperimentConfig c = std::move(base);
    try {
        if (j.contains("n")) c.n = j.at("n").get<Index>();
        if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::vector<double>>();
        if (j.contains("spike_multipliers")) c.spike_multipliers = j.at("spike_multipliers").get<std::vector<double>>();
        if (j.contains("law"))
            c.law = detail::parse_enum<EllipticalKind>(j.at("law"), "law", parse_elliptical_kind);
        if (j.contains("nsim")) c.nsim = j.at("nsim").get<int>();
        if (j.contains("B")) c.B = j.at("B").get<int>();
        if (j.contains("statistics")) {
            c.statistics.clear();
            for (const auto& s : j.at("statistics"))
                c.statistics.push_back(detail::parse_enum<StatisticKind>(s, "statistics", parse_statistic_kind));
        }
        if (j.contains("ci_level")) c.ci_level = j.at("ci_level").get<double>();
        if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("divisor")) {
            c.divisor = detail::parse_enum<Divisor>(j.at("divisor"), "divisor", [](std::string_view s) -> std::optional<Divisor> {
                if (s == "n") return Divisor::N;
                if (s == "n_minus_1") return Divisor::NMinus1;
                return std::nullopt;
            });
        }
        if (j.contains("center")) c.center = j.at("center").get<bool>();
        if (j.contains("basis")) {
            c.basis = detail::parse_enum<Basis>(j.at("basis"), "basis", [](std::string_view s) -> std::optional<Basis> {
                if (s == "identity") return Basis::Identity;
                if (s == "random_orthogonal") return Basis::RandomOrthogonal;
                return std::nullopt;
            });
        }
        if (j.contains("redraw_basis_per_simulation"))
            c.redraw_basis_per_simulation = j.at("redraw_basis_per_simulation").get<bool>();
        if (j.contains("replicate_centering")) {
            c.replicate_centering = detail::parse_enum<ReplicateCentering>(
                j.at("replicate_centering"), "replicate_centering",
                [](std::string_view s) -> std::optional<ReplicateCentering> {
                    if (s == "resample_mean") return ReplicateCentering::ResampleMean;
                    if (s == "original_mean") return ReplicateCentering::OriginalMean;
                    return std::nullopt;
                });
        }
        if (j.contains("truth_nsim")) c.truth_nsim = j.at("truth_nsim").get<int>();
        if (j.contains("keep_distributions")) c.keep_distributions = j.at("keep_distributions").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace hdboot::harness
