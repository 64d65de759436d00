#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ppbai/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

std::filesystem::path default_out_dir() {
    if (const char* env = std::getenv("PPBAI_OUT_DIR"); env && *env) return env;
    return "ppbai-out";
}

void print_bounds_table(const ppbai::SuiteReport& report) {
    fmt::print("{:>6} {:>6} {:>5} {:>5} {:>7} {:>7} {:>7} {:>7} {:>8} {:>12} {:>12}\n", "gap", "delta", "c_F", "c_Y",
               "sigma_F", "sigma_R", "kappa_F", "kappa_R", "pi*", "lower", "upper");
    for (const auto& r : report.rows) {
        const auto& p = report.parameterizations.at(r.param_index);
        fmt::print("{:>6} {:>6} {:>5} {:>5} {:>7} {:>7} {:>7} {:>7} {:>8.4f} {:>12.4g} {:>12.4g}\n", p.at("gap"),
                   p.at("delta"), p.at("cost_proxy"), p.at("cost_audit"), p.at("sigma_f"), p.at("sigma_r"),
                   p.at("kappa_f"), p.at("kappa_r"), *r.extras[0], *r.extras[1], *r.extras[2]);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prediction-powered best-arm identification simulator"};
    app.require_subcommand(0, 1);

    std::string suite;
    std::optional<std::string> config_path;
    std::vector<std::string> overrides;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t workers = 1;
    bool check = false;
    bool timing = false;

    app.add_option("suite", suite, "Suite to run")
        ->required()
        ->check(CLI::IsMember(ppbai::suite_names()));
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--set", overrides, "Override key=value (or sweep.key=v1,v2); repeatable");
    app.add_option("--trials", trials, "Trials per parameterization");
    app.add_option("--out", out_dir, "Output directory (default $PPBAI_OUT_DIR or ./ppbai-out)");
    app.add_option("--workers", workers, "Parallel workers")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Seed base; trial i uses base + i");
    app.add_flag("--check", check, "Exit 3 if an acceptance threshold fails");
    app.add_flag("--timing", timing, "Add a runtime_ms column (breaks byte-identical reruns)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (trials) overrides.push_back(fmt::format("trials={}", *trials));
    if (seed) overrides.push_back(fmt::format("seed={}", *seed));

    ppbai::ExperimentSuite experiment;
    try {
        std::optional<std::filesystem::path> path;
        if (config_path) path = *config_path;
        experiment = ppbai::load_config(suite, path, overrides);
    } catch (const ppbai::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    experiment.workers = workers;
    experiment.timing = timing;

    ppbai::SuiteReport report;
    try {
        report = ppbai::run_suite(experiment);
    } catch (const ppbai::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    const std::filesystem::path dir = out_dir ? std::filesystem::path(*out_dir) : default_out_dir();
    try {
        ppbai::write_report(report, dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (report.suite == "bounds") print_bounds_table(report);
    fmt::print("{}: {} rows, config {:016x}, seed base {} -> {}\n", report.suite, report.rows.size(),
               report.config_hash, report.seed_base, dir.string());
    bool all_passed = true;
    for (const auto& c : report.checks) {
        fmt::print("  [{}] {}: {}\n", c.passed ? "pass" : "FAIL", c.name, c.detail);
        all_passed = all_passed && c.passed;
    }
    return check && !all_passed ? kExitCheck : 0;
}
