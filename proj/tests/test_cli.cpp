#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgf/cli.hpp"

using namespace sgf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

fs::path repo_config(const std::string& name) {
    for (fs::path base : {fs::path("."), fs::path(".."), fs::path("../..")}) {
        fs::path p = base / "configs" / name;
        if (fs::exists(p)) return p;
    }
    return fs::path("configs") / name;
}

}  // namespace

TEST_CASE("kernel subcommand reproduces the exact flat value") {
    RunConfig cfg = load_config(repo_config("flat1d.json").string());
    cfg.out_dir = (fs::temp_directory_path() / "sgf_cli_kernel").string();
    REQUIRE(cli::run_subcommand("kernel", cfg) == 0);

    std::string csv = slurp(fs::path(cfg.out_dir) / "kernel.csv");
    CHECK(csv.find("# config_hash=") == 0);
    // first data row is the probe (0,0): u_bvp close to 0.551329
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // hash comment
    std::getline(is, line);  // header
    std::getline(is, line);
    std::vector<double> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
    REQUIRE(cells.size() == 7);
    CHECK(cells[3] == doctest::Approx(0.551329).epsilon(1e-6));   // u_bvp
    CHECK(cells[4] == doctest::Approx(0.551329).epsilon(1e-6));   // u_series
}

TEST_CASE("mc requires a seed") {
    RunConfig cfg = load_config(repo_config("flat1d.json").string());
    cfg.seed.reset();
    cfg.out_dir = (fs::temp_directory_path() / "sgf_cli_seedless").string();
    CHECK(cli::run_subcommand("mc", cfg) == 2);
}

TEST_CASE("identical config and seed give byte-identical outputs") {
    RunConfig cfg = load_config(repo_config("flat1d.json").string(),
                                {"oracle.n_paths=20000", "output.samples=true"});
    cfg.threads = 2;
    cfg.out_dir = (fs::temp_directory_path() / "sgf_cli_det_a").string();
    REQUIRE(cli::run_subcommand("mc", cfg) == 0);
    std::string mc_a = slurp(fs::path(cfg.out_dir) / "mc.json");
    std::string bin_a = slurp(fs::path(cfg.out_dir) / "samples.bin");

    RunConfig cfg2 = load_config(repo_config("flat1d.json").string(),
                                 {"oracle.n_paths=20000", "output.samples=true"});
    cfg2.threads = 1;  // worker count must not matter
    cfg2.out_dir = (fs::temp_directory_path() / "sgf_cli_det_b").string();
    REQUIRE(cli::run_subcommand("mc", cfg2) == 0);
    CHECK(mc_a == slurp(fs::path(cfg2.out_dir) / "mc.json"));
    CHECK(bin_a == slurp(fs::path(cfg2.out_dir) / "samples.bin"));

    // and the kernel CSV is reproducible as well
    RunConfig k1 = load_config(repo_config("flat1d.json").string());
    k1.out_dir = (fs::temp_directory_path() / "sgf_cli_det_k1").string();
    RunConfig k2 = load_config(repo_config("flat1d.json").string());
    k2.out_dir = (fs::temp_directory_path() / "sgf_cli_det_k2").string();
    REQUIRE(cli::run_subcommand("kernel", k1) == 0);
    REQUIRE(cli::run_subcommand("kernel", k2) == 0);
    CHECK(slurp(fs::path(k1.out_dir) / "kernel.csv") ==
          slurp(fs::path(k2.out_dir) / "kernel.csv"));
}

TEST_CASE("config validation and overrides") {
    CHECK_THROWS_AS(load_config("definitely_missing.json"), ConfigError);
    RunConfig cfg = load_config(repo_config("flat1d.json").string(), {"scenario.t=0.25"});
    CHECK(cfg.t == 0.25);
    CHECK(cfg.config_hash != load_config(repo_config("flat1d.json").string()).config_hash);

    Json bad = Json::parse(R"({"metric": {"dim": 1, "kind": "flat"},
                               "scenario": {"t": -1}})");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("expand subcommand writes the coefficient report") {
    RunConfig cfg = load_config(repo_config("kappa2d.json").string());
    cfg.out_dir = (fs::temp_directory_path() / "sgf_cli_expand").string();
    REQUIRE(cli::run_subcommand("expand", cfg) == 0);
    Json out = Json::parse(slurp(fs::path(cfg.out_dir) / "expand.json"));
    CHECK(out.at("alpha").get<std::string>() == "4");
    CHECK(out.at("sigma").contains("1"));
    CHECK(out.at("fixture_diff").contains("sigma1_matches_reference"));
}

TEST_CASE("full argv entry point") {
    fs::path out = fs::temp_directory_path() / "sgf_cli_argv";
    std::string cfgp = repo_config("flat1d.json").string();
    std::vector<std::string> args{"sgf",  "--config", cfgp, "--out", out.string(),
                                  "flow"};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    CHECK(cli::run(int(argv.size()), argv.data()) == 0);
    CHECK(fs::exists(out / "flow.csv"));
    CHECK(fs::exists(out / "manifest_flow.json"));
}

TEST_CASE("compare assert mode flags an engineered mismatch") {
    // a grossly oversmoothed KDE cannot match the kernel at the peak
    RunConfig cfg = load_config(
        repo_config("flat1d.json").string(),
        {"oracle.n_paths=20000", "oracle.bandwidth_scale=25.0", "compare.assert=true"});
    cfg.out_dir = (fs::temp_directory_path() / "sgf_cli_cmp_bad").string();
    CHECK(cli::run_subcommand("compare", cfg) == 4);

    RunConfig ok = load_config(repo_config("flat1d.json").string(),
                               {"oracle.n_paths=400000", "compare.assert=true"});
    ok.threads = 2;
    ok.out_dir = (fs::temp_directory_path() / "sgf_cli_cmp_ok").string();
    CHECK(cli::run_subcommand("compare", ok) == 0);
}
