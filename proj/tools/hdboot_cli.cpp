// hdboot command-line driver.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "hdboot/datagen.hpp"
#include "hdboot/errors.hpp"
#include "hdboot/harness/config.hpp"
#include "hdboot/harness/density.hpp"
#include "hdboot/harness/diagnostics.hpp"
#include "hdboot/harness/experiment.hpp"
#include "hdboot/harness/output.hpp"

namespace fs = std::filesystem;
using namespace hdboot;
using namespace hdboot::harness;

namespace {

harness::GridSpec parse_grid(const std::string& spec) {
    GridSpec g;
    if (spec.empty()) return g;
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    try {
        if (parts.size() == 1) {
            g.points = std::stoul(parts[0]);
        } else if (parts.size() == 3) {
            g.range = std::pair{std::stod(parts[0]), std::stod(parts[1])};
            g.points = std::stoul(parts[2]);
        } else {
            throw input_error("");
        }
    } catch (const std::exception&) {
        throw input_error("--grid must be N or LO:HI:N, got '" + spec + "'");
    }
    return g;
}

EllipticalKind parse_law(const std::string& s) {
    auto k = parse_elliptical_kind(s);
    if (!k) throw input_error("unknown law '" + s + "'");
    return *k;
}

nlohmann::json to_json(const ConcentrationReport& r) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& pt : r.curve) curve.push_back({{"t", pt.t}, {"empirical", pt.empirical}, {"bound", pt.bound}});
    return {{"n", r.n},
            {"p", r.p},
            {"z", {r.z.real(), r.z.imag()}},
            {"B", r.B},
            {"mean_m", {r.mean_m.real(), r.mean_m.imag()}},
            {"max_deviation", r.max_deviation},
            {"violated", r.violated},
            {"curve", curve}};
}

nlohmann::json to_json(const SpikedReport& r) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : r.levels) {
        levels.push_back({{"n", l.n},
                          {"p", l.p},
                          {"median_scaled_gap", l.median_scaled_gap},
                          {"mean_scaled_gap", l.mean_scaled_gap},
                          {"ks_distance", l.ks_distance ? nlohmann::json(*l.ks_distance) : nlohmann::json()},
                          {"wielandt_satisfied", l.wielandt_satisfied},
                          {"unscaled_form_satisfied", l.unscaled_satisfied},
                          {"wielandt_checked", l.wielandt_checked},
                          {"proviso_failures", l.proviso_failures}});
    }
    const auto& c = r.config;
    return {{"q", c.q},
            {"alpha", c.alpha},
            {"ratio", c.ratio},
            {"spike", c.top_spike()},
            {"law", std::string(to_string(c.law))},
            {"nsim", c.nsim},
            {"B", c.B},
            {"seed", c.seed},
            {"gap_decreasing", r.gap_decreasing()},
            {"levels", levels}};
}

void emit(const nlohmann::json& j, const std::string& out) {
    if (out.empty())
        std::cout << j.dump(2) << '\n';
    else
        write_json(j, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bootstrap of sample-covariance eigenvalues in high dimension"};
    app.set_version_flag("--version", artifact_version());
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a Monte-Carlo experiment");
    std::string run_config, run_out, preset_name = "desk";
    unsigned workers = 1;
    run->add_option("--config", run_config, "JSON config; keys override the preset")->check(CLI::ExistingFile);
    run->add_option("--out", run_out, "Output directory")->required();
    run->add_option("--workers", workers, "Worker threads (0 = hardware concurrency)")->capture_default_str();
    run->add_option("--preset", preset_name, "Base preset")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();

    // summarize
    auto* summ = app.add_subcommand("summarize", "Rebuild summary tables from a run directory");
    std::string summ_in, summ_out;
    summ->add_option("--in", summ_in, "Run directory or rows.csv")->required()->check(CLI::ExistingPath);
    summ->add_option("--out", summ_out, "Output directory")->required();

    // density
    auto* dens = app.add_subcommand("density", "Kernel density curves of kept bootstrap distributions");
    std::string dens_in, dens_out, dens_grid;
    dens->add_option("--in", dens_in, "Run directory or distributions.csv")->required()->check(CLI::ExistingPath);
    dens->add_option("--out", dens_out, "Output CSV")->required();
    dens->add_option("--grid", dens_grid, "N or LO:HI:N (default 512 points, automatic range)");

    // check-concentration
    auto* conc = app.add_subcommand("check-concentration", "Empirical concentration of the bootstrapped Stieltjes transform");
    Index conc_n = 300, conc_p = 300;
    double z_re = 1.0, z_im = 1.0;
    int conc_B = 500;
    std::uint64_t conc_seed = 1;
    std::string conc_law = "gaussian", conc_out;
    conc->add_option("--n", conc_n)->capture_default_str();
    conc->add_option("--p", conc_p)->capture_default_str();
    conc->add_option("--z-re", z_re)->capture_default_str();
    conc->add_option("--z-im", z_im)->capture_default_str();
    conc->add_option("--B", conc_B)->capture_default_str();
    conc->add_option("--seed", conc_seed)->capture_default_str();
    conc->add_option("--law", conc_law)->capture_default_str();
    conc->add_option("--out", conc_out, "Write the JSON report here instead of stdout");

    // check-spiked
    auto* spk = app.add_subcommand("check-spiked", "Spiked-model approximation and bootstrap consistency diagnostics");
    SpikedCheckConfig scfg;
    std::string spk_law = "gaussian", spk_out;
    double spike = 0.0;
    spk->add_option("--alpha", scfg.alpha)->capture_default_str();
    spk->add_option("--q", scfg.q)->capture_default_str();
    spk->add_option("--n-grid", scfg.n_grid)->delimiter(',')->capture_default_str();
    spk->add_option("--ratio", scfg.ratio)->capture_default_str();
    spk->add_option("--spike", spike, "Top population eigenvalue (default 1 + 50 sqrt(ratio))");
    spk->add_option("--nsim", scfg.nsim)->capture_default_str();
    spk->add_option("--B", scfg.B)->capture_default_str();
    spk->add_option("--seed", scfg.seed)->capture_default_str();
    spk->add_option("--workers", scfg.workers)->capture_default_str();
    spk->add_option("--law", spk_law)->capture_default_str();
    spk->add_option("--out", spk_out, "Write the JSON report here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = ExperimentConfig::preset(*parse_preset(preset_name));
            if (!run_config.empty()) cfg = read_config(run_config, cfg);
            cfg.validate();
            const auto rows = run_experiment(cfg, workers);
            const auto table = write_run_outputs(cfg, rows, run_out);
            std::cout << "wrote " << run_out << " (" << table.rows.size() << " cells, " << table.flagged.size()
                      << " flagged)\n";
            return table.flagged.empty() ? 0 : 3;
        }
        if (*summ) {
            fs::path in = summ_in;
            fs::path rows_csv = fs::is_directory(in) ? in / "rows.csv" : in;
            const fs::path cfg_path = rows_csv.parent_path() / "config.json";
            const auto cfg = fs::exists(cfg_path) ? read_config(cfg_path) : ExperimentConfig{};
            const auto table = summarize(read_rows(rows_csv));
            emit_summary_csv(table, fs::path(summ_out) / "summary.csv");
            emit_summary_json(cfg, table, fs::path(summ_out) / "summary.json");
            std::cout << "wrote " << summ_out << " (" << table.rows.size() << " cells, " << table.flagged.size()
                      << " flagged)\n";
            return 0;
        }
        if (*dens) {
            fs::path in = dens_in;
            if (fs::is_directory(in)) in /= "distributions.csv";
            const auto rows = emit_density_data(read_distributions(in), parse_grid(dens_grid));
            emit_density_csv(rows, dens_out);
            return 0;
        }
        if (*conc) {
            const CovarianceModel model{conc_p, 1.0, 1.0, Basis::Identity};
            const RngStream rng = RngStream(conc_seed).child(StreamTag::Concentration);
            const auto X = generate_dataset(model, EllipticalLaw{parse_law(conc_law)}, conc_n, rng.child(0));
            emit(to_json(concentration_check(X, {z_re, z_im}, conc_B, rng.child(StreamTag::Bootstrap))), conc_out);
            return 0;
        }
        if (*spk) {
            scfg.law = parse_law(spk_law);
            if (spike > 0.0) scfg.spike = spike;
            emit(to_json(spiked_consistency_check(scfg)), spk_out);
            return 0;
        }
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
