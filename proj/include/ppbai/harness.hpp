#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ppbai/bai.hpp"
#include "ppbai/environment.hpp"

namespace ppbai {

// Bad config file, bad override or a violated constraint. line is 0 when not file-related.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::size_t line = 0);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

const std::vector<std::string>& suite_names();

// Flat key -> value maps plus per-key sweep lists. Every key has a default.
struct ExperimentSuite {
    std::string name;
    std::map<std::string, std::string> values;
    std::map<std::string, std::vector<std::string>> sweep;
    std::size_t workers = 1;
    bool timing = false;

    std::size_t trials() const;
    std::uint64_t seed_base() const;

    // Cartesian product of the sweep in key order, each merged over values.
    std::vector<std::map<std::string, std::string>> parameterizations() const;
    // Canonical text of all resolved keys and sweeps.
    std::string canonical() const;
    std::uint64_t config_hash() const;
};

// Known keys and their defaults, before suite defaults are applied.
const std::map<std::string, std::string>& default_values();

// Layers: global defaults, suite defaults, the file's top section, the file's [suite] section,
// then the overrides (each "key=value" or "sweep.key=v1,v2"). A plain key drops any sweep on it
// set by an earlier layer. Every parameterization is resolved and validated.
ExperimentSuite load_config(std::string_view suite, const std::optional<std::filesystem::path>& path,
                            const std::vector<std::string>& overrides);
// Same, with the file contents given directly.
ExperimentSuite load_config_text(std::string_view suite, std::string_view text,
                                 const std::vector<std::string>& overrides);

// Typed view of one parameterization.
struct Settings {
    RunConfig run;
    std::string env_name;
    std::optional<double> gap;
    double naive_pi_min = 0.1;
    std::uint64_t naive_pulls_per_arm = 100000;
    double sigma_f = 0.15;
    double sigma_r = 0.3;
    double kappa_f = 1.0;
    double kappa_r = 1.0;
};
Settings resolve_settings(const std::map<std::string, std::string>& values);
EnvironmentSpec build_environment(const Settings& s);

struct TrialRecord {
    std::size_t param_index = 0;
    std::uint64_t trial_id = 0;
    std::optional<std::size_t> selected_arm;
    std::optional<bool> correct;
    std::optional<bool> certified;
    std::optional<std::uint64_t> stop_round;
    std::optional<std::uint64_t> pulls;
    std::optional<double> total_cost;
    std::optional<double> audit_rate;
    std::optional<bool> coverage_violation;
    std::vector<std::optional<double>> extras;  // named by SuiteReport::extra_columns
    double runtime_ms = 0.0;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SuiteReport {
    std::string suite;
    std::uint64_t config_hash = 0;
    std::uint64_t seed_base = 0;
    bool timing = false;
    std::vector<std::string> sweep_keys;
    std::vector<std::map<std::string, std::string>> parameterizations;
    std::vector<std::string> extra_columns;
    std::vector<TrialRecord> rows;  // sorted by (param_index, trial_id)
    nlohmann::ordered_json summary;
    std::vector<CheckResult> checks;
};

// Runs one trial of one parameterization. Deterministic in (settings, trial seed).
TrialRecord run_trial(std::string_view suite, const Settings& settings, std::uint64_t trial_id,
                      std::uint64_t seed_base);
std::vector<std::string> extra_columns(std::string_view suite);

SuiteReport run_suite(const ExperimentSuite& suite);

// Aggregates and checks from rows alone; run_suite calls these.
nlohmann::ordered_json summarize(const SuiteReport& report);
std::vector<CheckResult> check_thresholds(const SuiteReport& report);

std::string csv_escape(std::string_view field);
std::string format_number(double x);
std::string to_csv(const SuiteReport& report);

// Writes <dir>/<suite>.csv and <dir>/<suite>.summary.json. Throws on zero rows or an unwritable
// directory, before creating any file.
void write_report(const SuiteReport& report, const std::filesystem::path& dir);

std::uint64_t fnv1a64(std::string_view text);

// Grid value of (sigma_f^2/kappa_f + sigma_r^2/(kappa_r pi)) (c_F + c_Y pi).
double audit_objective(double pi, double sigma_f, double sigma_r, double kappa_f, double kappa_r,
                       double cost_proxy, double cost_audit);

}  // namespace ppbai
