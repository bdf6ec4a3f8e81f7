#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "hdboot/harness/output.hpp"

namespace fs = std::filesystem;
using namespace hdboot;
using namespace hdboot::harness;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path work_dir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "hdboot_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Result cli(const std::string& args) {
    const auto out = work_dir() / "stdout.txt";
    const auto err = work_dir() / "stderr.txt";
    const std::string cmd = std::string("\"") + HDBOOT_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const std::string& name, const std::string& body) {
    const auto p = work_dir() / name;
    std::ofstream(p) << body;
    return p;
}

const char* kSmall = R"({"n": 40, "ratios": [0.25], "spike_multipliers": [0, 3], "nsim": 3, "B": 9,
  "statistics": ["top_eigenvalue", "gap"], "keep_distributions": 2, "truth_nsim": 2})";

}  // namespace

TEST_CASE("version and usage") {
    const auto v = cli("--version");
    CHECK(v.code == 0);
    CHECK(v.out.starts_with("hdboot "));
    CHECK(cli("").code != 0);
    CHECK(cli("frobnicate").code != 0);
    CHECK(cli("run").code != 0);
}

TEST_CASE("run, summarize and density") {
    const auto cfg = write_config("small.json", kSmall);
    const auto out1 = work_dir() / "run1";
    const auto out2 = work_dir() / "run2";
    auto r = cli("run --config " + cfg.string() + " --out " + out1.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("4 cells, 0 flagged") != std::string::npos);
    r = cli("run --config " + cfg.string() + " --out " + out2.string() + " --workers 3");
    REQUIRE(r.code == 0);
    for (const char* f : {"config.json", "rows.csv", "truth.csv", "distributions.csv", "summary.csv", "summary.json"}) {
        INFO(f);
        CHECK(slurp(out1 / f) == slurp(out2 / f));
    }
    const auto ecfg = read_config(out1 / "config.json");
    CHECK(ecfg.n == 40);
    CHECK(ecfg.B == 9);
    CHECK(ecfg.nsim == 3);
    // Keys not in the file come from the preset.
    CHECK(ecfg.master_seed == ExperimentConfig{}.master_seed);
    CHECK(read_json(out1 / "summary.json").at("cells").size() == 4);

    SECTION("summarize rebuilds identical tables") {
        const auto s = work_dir() / "summ";
        REQUIRE(cli("summarize --in " + out1.string() + " --out " + s.string()).code == 0);
        CHECK(slurp(s / "summary.csv") == slurp(out1 / "summary.csv"));
        CHECK(slurp(s / "summary.json") == slurp(out1 / "summary.json"));
        const auto s2 = work_dir() / "summ2";
        REQUIRE(cli("summarize --in " + (out1 / "rows.csv").string() + " --out " + s2.string()).code == 0);
        CHECK(slurp(s2 / "summary.csv") == slurp(out1 / "summary.csv"));
    }
    SECTION("density") {
        const auto d = work_dir() / "density.csv";
        REQUIRE(cli("density --in " + out1.string() + " --out " + d.string() + " --grid -3:3:101").code == 0);
        std::stringstream ss(slurp(d));
        std::string line;
        std::getline(ss, line);
        CHECK(line == "dist_id,x,density,kind");
        int rows = 0;
        while (std::getline(ss, line)) ++rows;
        // Two kept distributions for each of four cells.
        CHECK(rows == 8 * 101);
        CHECK(cli("density --in " + out1.string() + " --out " + d.string() + " --grid 3:1").code == 2);
    }
    SECTION("full-scale preset with overrides") {
        const auto c2 = write_config("tiny.json", R"({"n": 30, "ratios": [0.2], "spike_multipliers": [1], "nsim": 2, "B": 3})");
        const auto o = work_dir() / "run_paper";
        REQUIRE(cli("run --preset paper --config " + c2.string() + " --out " + o.string()).code == 0);
        CHECK(read_config(o / "config.json").n == 30);
    }
}

TEST_CASE("input errors") {
    const auto bad = write_config("bad.json", R"({"n": 40, "unknown_key": 1})");
    auto r = cli("run --config " + bad.string() + " --out " + (work_dir() / "bad").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown_key") != std::string::npos);
    const auto broken = write_config("broken.json", "{ not json");
    CHECK(cli("run --config " + broken.string() + " --out " + (work_dir() / "bad").string()).code == 2);
    CHECK(cli("run --config /nonexistent.json --out x").code != 0);
    CHECK(cli("check-concentration --n 20 --p 10 --z-im 0").code == 2);
    CHECK(cli("check-spiked --q 5").code == 2);
    CHECK(cli("check-concentration --law cauchy").code == 2);
}

TEST_CASE("flagged cells give exit code 3") {
    const auto cfg = write_config("fail.json", R"({"n": 3, "ratios": [1.0], "spike_multipliers": [0], "nsim": 3,
      "B": 60, "statistics": ["top_eigenvalue", "gap_ratio"]})");
    const auto o = work_dir() / "fail";
    const auto r = cli("run --config " + cfg.string() + " --out " + o.string());
    CHECK(r.code == 3);
    CHECK(slurp(o / "failures.csv").find("gap_ratio") != std::string::npos);
    CHECK(read_json(o / "summary.json").at("flagged_cells").size() == 1);
}

TEST_CASE("diagnostics subcommands") {
    auto r = cli("check-concentration --n 40 --p 30 --B 20 --seed 3");
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("n") == 40);
    CHECK(j.at("p") == 30);
    CHECK(j.at("B") == 20);
    CHECK(j.at("violated") == false);
    CHECK(j.at("max_deviation").get<double>() > 0.0);
    CHECK(cli("check-concentration --n 40 --p 30 --B 20 --seed 3").out == r.out);

    const auto out = work_dir() / "spiked.json";
    r = cli("check-spiked --n-grid 100,200 --nsim 10 --B 9 --out " + out.string());
    REQUIRE(r.code == 0);
    j = read_json(out);
    REQUIRE(j.at("levels").size() == 2);
    CHECK(j.at("levels")[0].at("n") == 100);
    CHECK(j.at("levels")[1].at("p") == 20);
    CHECK(j.at("levels")[0].at("wielandt_satisfied") == 1.0);
    CHECK(j.at("q") == 1);
    CHECK(j.at("alpha") == 1.0);
}
