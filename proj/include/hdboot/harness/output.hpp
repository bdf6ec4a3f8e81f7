#pragma once

// CSV and JSON artifacts.
//
// Numbers are written with 17 significant digits (printf "%.17g" style),
// NaN as "nan", and absent values as empty fields, so equal inputs give
// byte-identical files.
//
// summary.csv        law,r,c,statistic,metric,value
// rows.csv           law,r,c,statistic,n,p,sim,true_value,null_value,point_estimate,boot_bias,boot_variance,
//                    percentile_lower,percentile_upper,normal_lower,normal_upper,
//                    bias_corrected_lower,bias_corrected_upper,bias_corrected_degenerate,
//                    covers_true_percentile,covers_true_normal,covers_true_bias_corrected,
//                    covers_null_percentile,covers_null_normal,covers_null_bias_corrected
// truth.csv          law,r,c,statistic,sim,point_estimate
// failures.csv       law,r,c,statistic,message
// distributions.csv  law,r,c,statistic,sim,point_estimate,replicate_index,replicate

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <vector>

#include "../errors.hpp"
#include "config.hpp"
#include "experiment.hpp"

#ifndef HDBOOT_VERSION
#define HDBOOT_VERSION "0.0.0"
#endif
#ifndef HDBOOT_GIT_REVISION
#define HDBOOT_GIT_REVISION "unknown"
#endif

namespace hdboot::harness {

inline std::string artifact_version() { return std::string("hdboot ") + HDBOOT_VERSION + " (" + HDBOOT_GIT_REVISION + ")"; }

inline constexpr std::string_view kSummaryHeader = "law,r,c,statistic,metric,value";
inline constexpr std::string_view kRowsHeader =
    "law,r,c,statistic,n,p,sim,true_value,null_value,point_estimate,boot_bias,boot_variance,"
    "percentile_lower,percentile_upper,normal_lower,normal_upper,"
    "bias_corrected_lower,bias_corrected_upper,bias_corrected_degenerate,"
    "covers_true_percentile,covers_true_normal,covers_true_bias_corrected,"
    "covers_null_percentile,covers_null_normal,covers_null_bias_corrected";
inline constexpr std::string_view kTruthHeader = "law,r,c,statistic,sim,point_estimate";
inline constexpr std::string_view kFailuresHeader = "law,r,c,statistic,message";
inline constexpr std::string_view kDistributionsHeader = "law,r,c,statistic,sim,point_estimate,replicate_index,replicate";

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline std::string format_flag(const std::optional<bool>& v) { return v ? (*v ? "1" : "0") : std::string(); }

inline double parse_number(std::string_view s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw input_error("csv: bad number '" + std::string(s) + "'");
    return v;
}

inline std::optional<double> parse_optional(std::string_view s) {
    if (s.empty()) return std::nullopt;
    return parse_number(s);
}

inline std::optional<bool> parse_flag(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s == "1") return true;
    if (s == "0") return false;
    throw input_error("csv: bad flag '" + std::string(s) + "'");
}

inline std::string csv_quote(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

inline std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                fields.back() += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.emplace_back();
        } else if (ch != '\r') {
            fields.back() += ch;
        }
    }
    return fields;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("error writing '" + path.string() + "'");
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    return in;
}

inline std::string cell_prefix(const CellId& id) {
    return std::string(to_string(id.law)) + ',' + format_number(id.r) + ',' + format_number(id.c) + ',' +
           std::string(to_string(id.statistic));
}

inline CellId parse_cell(const std::vector<std::string>& f, const std::string& where) {
    const auto law = parse_elliptical_kind(f.at(0));
    const auto stat = parse_statistic_kind(f.at(3));
    if (!law || !stat) throw input_error(where + ": bad law or statistic");
    return {*law, parse_number(f.at(1)), parse_number(f.at(2)), *stat};
}

// Reads a CSV with the expected header; calls fn(fields, location) per data line.
template <class Fn>
void read_csv(const std::filesystem::path& path, std::string_view header, std::size_t nfields, Fn&& fn) {
    auto in = open_input(path);
    std::string line;
    if (std::getline(in, line) && !line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw input_error(path.string() + ": unexpected header");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = csv_split(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (f.size() != nfields) throw input_error(where + ": expected " + std::to_string(nfields) + " fields");
        try {
            fn(f, where);
        } catch (const input_error& e) {
            throw input_error(where + ": " + e.what());
        }
    }
}

}  // namespace detail

// Summary lines for one row, in a fixed metric order. Absent metrics are skipped.
inline std::vector<std::pair<std::string, double>> summary_metrics(const SummaryRow& s) {
    std::vector<std::pair<std::string, double>> m;
    m.emplace_back("n", static_cast<double>(s.n));
    m.emplace_back("p", static_cast<double>(s.p));
    m.emplace_back("nsim", static_cast<double>(s.nsim));
    if (s.true_value) m.emplace_back("true_value", *s.true_value);
    m.emplace_back("mean_point_estimate", s.mean_point_estimate);
    if (s.true_bias) m.emplace_back("true_bias", *s.true_bias);
    if (s.true_variance) m.emplace_back("true_variance", *s.true_variance);
    if (s.median_boot_bias) m.emplace_back("median_bootstrap_bias", *s.median_boot_bias);
    if (s.median_boot_variance) m.emplace_back("median_bootstrap_variance", *s.median_boot_variance);
    if (s.median_variance_ratio) m.emplace_back("median_variance_ratio", *s.median_variance_ratio);
    for (std::size_t k = 0; k < kIntervalMethods.size(); ++k) {
        const std::string method(to_string(kIntervalMethods[k]));
        if (const auto& c = s.coverage_true[k]) {
            m.emplace_back("coverage_true_" + method, c->fraction);
            m.emplace_back("coverage_true_" + method + "_se", c->se);
        }
    }
    for (std::size_t k = 0; k < kIntervalMethods.size(); ++k) {
        const std::string method(to_string(kIntervalMethods[k]));
        if (const auto& c = s.coverage_null[k]) {
            m.emplace_back("coverage_null_" + method, c->fraction);
            m.emplace_back("coverage_null_" + method + "_se", c->se);
        }
    }
    m.emplace_back("bias_corrected_degenerate_fraction", s.bc_degenerate_fraction);
    return m;
}

inline void write_summary_csv(std::ostream& out, const SummaryTable& table) {
    out << kSummaryHeader << '\n';
    for (const auto& row : table.rows) {
        const auto prefix = detail::cell_prefix(row.cell);
        for (const auto& [metric, value] : summary_metrics(row))
            out << prefix << ',' << metric << ',' << format_number(value) << '\n';
    }
}

inline void emit_summary_csv(const SummaryTable& table, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    write_summary_csv(out, table);
    detail::finish_output(out, path);
}

inline void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kRowsHeader << '\n';
    for (const auto& row : rows) {
        const auto prefix = detail::cell_prefix(row.cell);
        for (const auto& r : row.records) {
            out << prefix << ',' << row.n << ',' << row.p << ',' << r.sim << ',' << format_optional(row.true_value)
                << ',' << format_optional(row.null_value) << ',' << format_number(r.point_estimate) << ','
                << format_number(r.boot_bias) << ',' << format_number(r.boot_variance);
            for (const auto& iv : r.intervals) out << ',' << format_number(iv.lower) << ',' << format_number(iv.upper);
            out << ',' << (r.intervals[2].degenerate ? 1 : 0);
            for (const auto& f : r.covers_true) out << ',' << format_flag(f);
            for (const auto& f : r.covers_null) out << ',' << format_flag(f);
            out << '\n';
        }
    }
}

inline void write_truth_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kTruthHeader << '\n';
    for (const auto& row : rows) {
        const auto prefix = detail::cell_prefix(row.cell);
        for (std::size_t s = 0; s < row.truth_estimates.size(); ++s)
            out << prefix << ',' << s << ',' << format_number(row.truth_estimates[s]) << '\n';
    }
}

inline void write_failures_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kFailuresHeader << '\n';
    for (const auto& row : rows)
        if (row.failure) out << detail::cell_prefix(row.cell) << ',' << csv_quote(*row.failure) << '\n';
}

inline void write_distributions_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kDistributionsHeader << '\n';
    for (const auto& row : rows) {
        const auto prefix = detail::cell_prefix(row.cell);
        for (const auto& kd : row.kept) {
            const auto pe = format_number(kd.dist.point_estimate);
            for (std::size_t b = 0; b < kd.dist.replicates.size(); ++b)
                out << prefix << ',' << kd.sim << ',' << pe << ',' << b << ','
                    << format_number(kd.dist.replicates[b]) << '\n';
        }
    }
}

// Parses rows.csv plus, when present next to it, truth.csv and failures.csv.
// Cells appear in first-seen order.
inline std::vector<ResultRow> read_rows(const std::filesystem::path& rows_csv) {
    std::vector<ResultRow> rows;
    auto find = [&](const CellId& id) -> ResultRow& {
        for (auto& r : rows)
            if (r.cell == id) return r;
        rows.emplace_back().cell = id;
        return rows.back();
    };
    detail::read_csv(rows_csv, kRowsHeader, 25, [&](const std::vector<std::string>& f, const std::string& where) {
        ResultRow& row = find(detail::parse_cell(f, where));
        row.n = static_cast<Index>(parse_number(f[4]));
        row.p = static_cast<Index>(parse_number(f[5]));
        row.true_value = parse_optional(f[7]);
        row.null_value = parse_optional(f[8]);
        SimulationRecord r;
        r.sim = static_cast<int>(parse_number(f[6]));
        r.point_estimate = parse_number(f[9]);
        r.boot_bias = parse_number(f[10]);
        r.boot_variance = parse_number(f[11]);
        for (std::size_t m = 0; m < 3; ++m) {
            r.intervals[m].method = kIntervalMethods[m];
            r.intervals[m].lower = parse_number(f[12 + 2 * m]);
            r.intervals[m].upper = parse_number(f[13 + 2 * m]);
        }
        r.intervals[2].degenerate = parse_flag(f[18]).value_or(false);
        for (std::size_t m = 0; m < 3; ++m) {
            r.covers_true[m] = parse_flag(f[19 + m]);
            r.covers_null[m] = parse_flag(f[22 + m]);
        }
        row.records.push_back(r);
    });
    const auto dir = rows_csv.parent_path();
    if (std::filesystem::exists(dir / "truth.csv")) {
        detail::read_csv(dir / "truth.csv", kTruthHeader, 6, [&](const std::vector<std::string>& f, const std::string& where) {
            find(detail::parse_cell(f, where)).truth_estimates.push_back(parse_number(f[5]));
        });
    }
    if (std::filesystem::exists(dir / "failures.csv")) {
        detail::read_csv(dir / "failures.csv", kFailuresHeader, 5,
                         [&](const std::vector<std::string>& f, const std::string& where) {
                             find(detail::parse_cell(f, where)).failure = f[4];
                         });
    }
    return rows;
}

// Distributions keyed by "law/r/c/statistic/sim", in file order.
inline std::vector<std::pair<std::string, BootstrapDistribution>> read_distributions(const std::filesystem::path& path) {
    std::vector<std::pair<std::string, BootstrapDistribution>> out;
    detail::read_csv(path, kDistributionsHeader, 8, [&](const std::vector<std::string>& f, const std::string&) {
        const std::string id = f[0] + '/' + f[1] + '/' + f[2] + '/' + f[3] + '/' + f[4];
        if (out.empty() || out.back().first != id) out.push_back({id, BootstrapDistribution{f[3], parse_number(f[5]), {}}});
        out.back().second.replicates.push_back(parse_number(f[7]));
    });
    return out;
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const SummaryTable& table) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& row : table.rows) {
        nlohmann::json metrics = nlohmann::json::object();
        for (const auto& [metric, value] : summary_metrics(row)) {
            if (std::isfinite(value))
                metrics[metric] = value;
            else
                metrics[metric] = format_number(value);
        }
        cells.push_back({{"law", std::string(to_string(row.cell.law))},
                         {"r", row.cell.r},
                         {"c", row.cell.c},
                         {"statistic", std::string(to_string(row.cell.statistic))},
                         {"metrics", metrics}});
    }
    nlohmann::json flagged = nlohmann::json::array();
    for (const auto& [id, reason] : table.flagged)
        flagged.push_back({{"law", std::string(to_string(id.law))},
                           {"r", id.r},
                           {"c", id.c},
                           {"statistic", std::string(to_string(id.statistic))},
                           {"reason", reason}});
    return {{"artifact_version", artifact_version()}, {"config", to_json(cfg)}, {"cells", cells}, {"flagged_cells", flagged}};
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
    detail::finish_output(out, path);
}

inline void emit_summary_json(const ExperimentConfig& cfg, const SummaryTable& table, const std::filesystem::path& path) {
    write_json(summary_json(cfg, table), path);
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw input_error(path.string() + ": " + e.what());
    }
}

// Loads a config file on top of base; accepts either a bare config object or
// a summary JSON carrying a "config" member.
inline ExperimentConfig read_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
    const auto j = read_json(path);
    try {
        if (j.is_object() && j.contains("config") && j.contains("artifact_version"))
            return config_from_json(j.at("config"), std::move(base));
        return config_from_json(j, std::move(base));
    } catch (const input_error& e) {
        throw input_error(path.string() + ": " + e.what());
    }
}

// Writes config.json, rows.csv, failures.csv, summary.csv, summary.json and,
// when present, truth.csv and distributions.csv into dir.
inline SummaryTable write_run_outputs(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows,
                                      const std::filesystem::path& dir) {
    auto write_with = [&](const std::filesystem::path& path, auto&& writer) {
        auto out = detail::open_output(path);
        writer(out, rows);
        detail::finish_output(out, path);
    };
    write_json(to_json(cfg), dir / "config.json");
    write_with(dir / "rows.csv", [](std::ostream& o, const auto& r) { write_rows_csv(o, r); });
    write_with(dir / "failures.csv", [](std::ostream& o, const auto& r) { write_failures_csv(o, r); });
    if (cfg.truth_nsim > 0) write_with(dir / "truth.csv", [](std::ostream& o, const auto& r) { write_truth_csv(o, r); });
    if (cfg.keep_distributions > 0)
        write_with(dir / "distributions.csv", [](std::ostream& o, const auto& r) { write_distributions_csv(o, r); });
    const auto table = summarize(rows);
    emit_summary_csv(table, dir / "summary.csv");
    emit_summary_json(cfg, table, dir / "summary.json");
    return table;
}

}  // namespace hdboot::harness
