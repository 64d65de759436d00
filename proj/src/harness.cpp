#include "ppbai/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "ppbai/bounds.hpp"
#include "ppbai/estimation.hpp"

namespace ppbai {

ConfigError::ConfigError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? fmt::format("line {}: {}", line, what) : what), line_(line) {}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    double x = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, x);
    if (ec != std::errc() || ptr != end || !std::isfinite(x)) return std::nullopt;
    return x;
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
    std::uint64_t x = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, x);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return x;
}

enum class KeyType { number, optional_number, integer, env, auditor, strategy, budget, delay };

const std::map<std::string, KeyType>& key_types() {
    static const std::map<std::string, KeyType> types = {
        {"auditor", KeyType::auditor},
        {"budget", KeyType::budget},
        {"cost_audit", KeyType::number},
        {"cost_proxy", KeyType::number},
        {"d_max", KeyType::integer},
        {"delay", KeyType::delay},
        {"delta", KeyType::number},
        {"env", KeyType::env},
        {"gap", KeyType::optional_number},
        {"geom_p", KeyType::number},
        {"kappa_f", KeyType::number},
        {"kappa_r", KeyType::number},
        {"late_window", KeyType::number},
        {"naive_pi_min", KeyType::number},
        {"naive_pulls_per_arm", KeyType::integer},
        {"pareto_alpha", KeyType::number},
        {"pareto_cap", KeyType::integer},
        {"pareto_xm", KeyType::number},
        {"pi_min", KeyType::number},
        {"seed", KeyType::integer},
        {"sigma_f", KeyType::number},
        {"sigma_r", KeyType::number},
        {"strategy", KeyType::strategy},
        {"t_max", KeyType::integer},
        {"target_rate", KeyType::number},
        {"trials", KeyType::integer},
    };
    return types;
}

void check_value(const std::string& key, const std::string& value, std::size_t line) {
    const auto it = key_types().find(key);
    if (it == key_types().end()) throw ConfigError(fmt::format("unknown key '{}'", key), line);
    const auto bad = [&](std::string_view expected) {
        return ConfigError(fmt::format("key '{}': expected {}, got '{}'", key, expected, value), line);
    };
    try {
        switch (it->second) {
            case KeyType::number:
                if (!parse_double(value)) throw bad("a number");
                break;
            case KeyType::optional_number:
                if (!value.empty() && value != "none" && !parse_double(value)) throw bad("a number or none");
                break;
            case KeyType::integer:
                if (!parse_uint(value)) throw bad("a nonnegative integer");
                break;
            case KeyType::env: {
                const auto& names = preset_names();
                if (std::find(names.begin(), names.end(), value) == names.end()) throw bad("an environment preset");
                break;
            }
            case KeyType::auditor:
                parse_audit_variant(value);
                break;
            case KeyType::strategy:
                parse_strategy(value);
                break;
            case KeyType::budget:
                if (value != "appendix" && value != "main-text") throw bad("appendix or main-text");
                break;
            case KeyType::delay:
                if (value != "none" && value != "bounded" && value != "geometric" && value != "pareto") {
                    throw bad("none, bounded, geometric or pareto");
                }
                break;
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("key '{}': {}", key, e.what()), line);
    }
}

struct SuiteDefaults {
    std::map<std::string, std::string> values;
    std::map<std::string, std::vector<std::string>> sweep;
};

const std::map<std::string, SuiteDefaults>& suite_defaults() {
    static const std::map<std::string, SuiteDefaults> d = {
        {"coverage", {{{"trials", "1000"}, {"env", "bernoulli-half"}}, {{"delta", {"0.05", "0.2"}}}}},
        {"bai", {{{"trials", "30"}}, {}}},
        {"allocators", {{{"trials", "20"}, {"gap", "0.1"}}, {{"auditor", {"uniform", "neyman", "oracle"}}}}},
        {"segments", {{{"trials", "30"}, {"env", "segmented2"}, {"t_max", "5000"}, {"late_window", "0.9"}}, {{"auditor", {"oracle", "neyman"}}}}},
        {"delays",
         {{{"trials", "20"}, {"env", "large-gap2"}, {"delta", "0.1"}, {"pi_min", "0.3"}, {"target_rate", "0.3"}},
          {{"delay", {"none", "bounded", "geometric", "pareto"}}}}},
        {"failure_modes", {{{"trials", "100"}}, {{"env", {"proxy-failure-a", "proxy-failure-b", "naive-bias"}}}}},
        {"bounds", {{{"trials", "1"}}, {{"gap", {"0.1", "0.2", "0.3"}}, {"sigma_r", {"0", "0.1", "0.3"}}}}},
    };
    return d;
}

void apply_entry(ExperimentSuite& suite, const std::string& raw_key, const std::string& value, std::size_t line) {
    constexpr std::string_view prefix = "sweep.";
    if (raw_key.rfind(prefix, 0) == 0) {
        const std::string key = raw_key.substr(prefix.size());
        auto list = split_list(value);
        for (const auto& v : list) check_value(key, v, line);
        if (key == "trials" || key == "seed") throw ConfigError(fmt::format("key '{}' cannot be swept", key), line);
        suite.sweep[key] = std::move(list);
        return;
    }
    check_value(raw_key, value, line);
    suite.values[raw_key] = value;
    suite.sweep.erase(raw_key);
}

std::pair<std::string, std::string> split_assignment(std::string_view text, std::size_t line) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("expected key = value, got '{}'", trim(text)), line);
    auto key = trim(text.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key", line);
    return {key, trim(text.substr(eq + 1))};
}

void validate_suite(const ExperimentSuite& suite) {
    if (suite.trials() == 0) throw ConfigError("trials must be at least 1");
    for (const auto& p : suite.parameterizations()) {
        const Settings s = resolve_settings(p);
        try {
            if (suite.name == "bounds") {
                GaussianInstance inst{s.gap.value_or(0.1), s.run.delta, s.run.cost_proxy, s.run.cost_audit,
                                      s.sigma_f, s.sigma_r, s.kappa_f, s.kappa_r};
                inst.validate();
                if (!(inst.sigma_f > 0.0)) throw std::invalid_argument("sigma_f must be positive");
                s.run.validate(2);
                continue;
            }
            const EnvironmentSpec env = build_environment(s);
            s.run.validate(env.arm_count);
            if (suite.name == "failure_modes" && env.kind == EnvKind::naive_bias_pair && s.naive_pulls_per_arm == 0) {
                throw std::invalid_argument("naive_pulls_per_arm must be positive");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
}

// Common per-trial fields from a run.
void fill_common(TrialRecord& rec, const RunResult& r) {
    rec.selected_arm = r.selected_arm;
    rec.correct = r.correct;
    rec.certified = r.certified;
    rec.stop_round = r.stop_round;
    rec.pulls = r.pulls;
    rec.total_cost = r.total_cost;
    rec.audit_rate = r.audit_rate;
}

TrialRecord coverage_trial(const Settings& s, std::uint64_t seed) {
    const EnvironmentSpec env = build_environment(s);
    const RunConfig& cfg = s.run;
    AuditPolicyKind kind = cfg.auditor;
    kind.pi_min = cfg.pi_min;
    Auditor auditor(kind, 1, env.segment_count(), cfg.cost_proxy, cfg.cost_audit);
    const BoundaryParams params = BoundaryParams::make(cfg.delta, 1, cfg.pi_min, cfg.budget);
    ArmAccumulator acc(cfg.pi_min);
    RandomStream inst_rng = RandomStream::derive(seed, 1, 0);
    RandomStream coin_rng = RandomStream::derive(seed, 2, 0);
    RandomStream delay_rng = RandomStream::derive(seed, 3, 0);
    PendingAuditQueue queue;
    const double truth = env.theta.at(0);

    std::optional<std::uint64_t> first_violation;
    std::uint64_t audits = 0;
    IntervalView view{0.0, 1.0};
    ConfidenceInterval ci;
    for (std::uint64_t t = 1; t <= cfg.t_max; ++t) {
        for (const auto& e : queue.pop_due(t)) {
            acc.record_audit_return(e.propensity, e.residual);
            auditor.observe_return(0, e.segment, e.proxy, e.residual);
        }
        const Observation obs = sample_instance(env, 0, inst_rng);
        acc.record_pull(obs.proxy);
        DecisionContext ctx{0, obs.segment_index, obs.proxy, view, view, std::nullopt};
        if (auditor.needs_true_g()) ctx.true_g = obs.true_g;
        const double p = auditor.probability(ctx);
        if (coin_rng.bernoulli(p)) {
            acc.record_audit_request(p);
            ++audits;
            PendingAudit e;
            e.request_round = t;
            e.return_round = t + 1 + static_cast<std::uint64_t>(sample_delay(cfg.delay, delay_rng));
            e.propensity = p;
            e.residual = obs.latent_outcome - obs.proxy;
            e.segment = obs.segment_index;
            e.proxy = obs.proxy;
            queue.push(e);
        }
        ci = interval(acc, params);
        view = {ci.lower, ci.upper};
        if (!first_violation && (truth < ci.lower || truth > ci.upper)) first_violation = t;
    }

    TrialRecord rec;
    rec.pulls = cfg.t_max;
    rec.total_cost = cfg.cost_proxy * static_cast<double>(cfg.t_max) + cfg.cost_audit * static_cast<double>(audits);
    rec.audit_rate = static_cast<double>(audits) / static_cast<double>(cfg.t_max);
    rec.coverage_violation = first_violation.has_value();
    rec.extras = {first_violation ? std::optional<double>(static_cast<double>(*first_violation)) : std::nullopt,
                  ci.upper - ci.lower};
    return rec;
}

TrialRecord bai_trial(const Settings& s, std::uint64_t seed) {
    RunConfig cfg = s.run;
    cfg.seed = seed;
    TrialRecord rec;
    fill_common(rec, run(cfg, build_environment(s)));
    return rec;
}

std::optional<double> segment_mean(const RunResult& r, std::size_t seg) {
    if (seg >= r.late_propensity_count.size() || r.late_propensity_count[seg] == 0) return std::nullopt;
    return r.late_propensity_sum[seg] / static_cast<double>(r.late_propensity_count[seg]);
}

TrialRecord segments_trial(const Settings& s, std::uint64_t seed) {
    RunConfig cfg = s.run;
    cfg.seed = seed;
    const EnvironmentSpec env = build_environment(s);
    if (env.segment_count() < 2) throw ConfigError("segments suite needs an environment with two segments");
    const RunResult r = run(cfg, env);
    TrialRecord rec;
    fill_common(rec, r);
    const auto hi = segment_mean(r, 0);
    const auto lo = segment_mean(r, 1);
    std::optional<double> ratio;
    if (hi && lo && *lo > 0.0) ratio = *hi / *lo;
    rec.extras = {hi, lo, ratio};
    return rec;
}

TrialRecord delays_trial(const Settings& s, std::uint64_t seed) {
    RunConfig cfg = s.run;
    cfg.seed = seed;
    const EnvironmentSpec env = build_environment(s);
    const RunResult delayed = run(cfg, env);
    RunConfig base = cfg;
    base.delay = DelayModel::none();
    const RunResult undelayed = run(base, env);
    TrialRecord rec;
    fill_common(rec, delayed);
    std::optional<double> overhead;
    if (delayed.certified && undelayed.certified) {
        overhead = static_cast<double>(delayed.stop_round) - static_cast<double>(undelayed.stop_round);
    }
    rec.extras = {static_cast<double>(undelayed.stop_round), overhead, static_cast<double>(delayed.pending)};
    return rec;
}

TrialRecord failure_trial(const Settings& s, std::uint64_t seed) {
    RunConfig cfg = s.run;
    cfg.seed = seed;
    const EnvironmentSpec env = build_environment(s);
    std::optional<double> limit0, limit1;
    if (env.kind == EnvKind::naive_bias_pair) {
        cfg.strategy = Strategy::naive_selective;
        cfg.t_max = s.naive_pulls_per_arm * env.arm_count;
        limit0 = naive_limit(1, env.naive_pi_min);
        limit1 = naive_limit(2, env.naive_pi_min);
    } else {
        cfg.strategy = Strategy::proxy_only;
    }
    const RunResult r = run(cfg, env);
    TrialRecord rec;
    fill_common(rec, r);
    rec.extras = {r.estimates.at(0), r.estimates.at(1), limit0, limit1};
    return rec;
}

TrialRecord bounds_trial(const Settings& s) {
    const GaussianInstance inst{s.gap.value_or(0.1), s.run.delta, s.run.cost_proxy, s.run.cost_audit,
                                s.sigma_f,           s.sigma_r,   s.kappa_f,         s.kappa_r};
    const double pi_star = optimal_audit_rate(inst, 0.0);
    const double lower = gaussian_lower_bound(inst);
    const double gap = inst.gap;
    const double upper = upper_bound_cost(std::span<const double>(&gap, 1), inst.delta, 2, s.run.pi_min,
                                          inst.cost_proxy, inst.cost_audit, s.run.auditor.target_rate);
    double best_pi = 1e-4;
    double best_f = audit_objective(best_pi, inst.sigma_f, inst.sigma_r, inst.kappa_f, inst.kappa_r,
                                    inst.cost_proxy, inst.cost_audit);
    for (int i = 2; i <= 10000; ++i) {
        const double pi = i * 1e-4;
        const double f = audit_objective(pi, inst.sigma_f, inst.sigma_r, inst.kappa_f, inst.kappa_r,
                                         inst.cost_proxy, inst.cost_audit);
        if (f < best_f) {
            best_f = f;
            best_pi = pi;
        }
    }
    const double grid_lower = 2.0 * std::log(1.0 / inst.delta) / (gap * gap) * best_f;
    TrialRecord rec;
    rec.extras = {pi_star, lower, upper, best_pi, grid_lower};
    return rec;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::ordered_json stats_json(const std::vector<double>& v) {
    nlohmann::ordered_json j;
    j["count"] = v.size();
    j["mean"] = mean_of(v);
    j["sd"] = sd_of(v);
    j["median"] = median_of(v);
    if (!v.empty()) {
        j["min"] = *std::min_element(v.begin(), v.end());
        j["max"] = *std::max_element(v.begin(), v.end());
    }
    return j;
}

template <class T, class F>
std::vector<double> collect(const std::vector<const TrialRecord*>& rows, F get) {
    std::vector<double> out;
    for (const auto* r : rows) {
        const std::optional<T> v = get(*r);
        if (v) out.push_back(static_cast<double>(*v));
    }
    return out;
}

std::vector<std::vector<const TrialRecord*>> group_rows(const SuiteReport& report) {
    std::vector<std::vector<const TrialRecord*>> groups(report.parameterizations.size());
    for (const auto& r : report.rows) groups.at(r.param_index).push_back(&r);
    return groups;
}

std::vector<std::size_t> params_with(const SuiteReport& report, const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < report.parameterizations.size(); ++i) {
        const auto it = report.parameterizations[i].find(key);
        if (it != report.parameterizations[i].end() && it->second == value) out.push_back(i);
    }
    return out;
}

const nlohmann::ordered_json& param_summary(const SuiteReport& report, std::size_t index) {
    return report.summary.at("parameterizations").at(index).at("metrics");
}

std::string fmt_num(double x) { return fmt::format("{:.4g}", x); }

}  // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = {"coverage", "bai",           "allocators", "segments",
                                                   "delays",   "failure_modes", "bounds"};
    return names;
}

const std::map<std::string, std::string>& default_values() {
    static const std::map<std::string, std::string> d = {
        {"auditor", "uniform"},
        {"budget", "appendix"},
        {"cost_audit", "20"},
        {"cost_proxy", "1"},
        {"d_max", "10"},
        {"delay", "none"},
        {"delta", "0.05"},
        {"env", "standard4"},
        {"gap", "none"},
        {"geom_p", "0.3"},
        {"kappa_f", "1"},
        {"kappa_r", "1"},
        {"late_window", "0.5"},
        {"naive_pi_min", "0.1"},
        {"naive_pulls_per_arm", "100000"},
        {"pareto_alpha", "2.5"},
        {"pareto_cap", "50"},
        {"pareto_xm", "1"},
        {"pi_min", "0.05"},
        {"seed", "42"},
        {"sigma_f", "0.15"},
        {"sigma_r", "0.3"},
        {"strategy", "pp_lucb"},
        {"t_max", "20000"},
        {"target_rate", "0.1"},
        {"trials", "30"},
    };
    return d;
}

std::size_t ExperimentSuite::trials() const { return static_cast<std::size_t>(*parse_uint(values.at("trials"))); }

std::uint64_t ExperimentSuite::seed_base() const { return *parse_uint(values.at("seed")); }

std::vector<std::map<std::string, std::string>> ExperimentSuite::parameterizations() const {
    std::vector<std::map<std::string, std::string>> out{values};
    for (const auto& [key, list] : sweep) {
        std::vector<std::map<std::string, std::string>> next;
        for (const auto& partial : out) {
            for (const auto& v : list) {
                auto p = partial;
                p[key] = v;
                next.push_back(std::move(p));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::string ExperimentSuite::canonical() const {
    std::string text = "suite=" + name + "\n";
    for (const auto& [k, v] : values) text += k + "=" + v + "\n";
    for (const auto& [k, list] : sweep) {
        text += "sweep." + k + "=";
        for (std::size_t i = 0; i < list.size(); ++i) text += (i ? "," : "") + list[i];
        text += "\n";
    }
    return text;
}

std::uint64_t ExperimentSuite::config_hash() const { return fnv1a64(canonical()); }

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ExperimentSuite load_config_text(std::string_view suite_name, std::string_view text,
                                 const std::vector<std::string>& overrides) {
    const auto defaults = suite_defaults().find(std::string(suite_name));
    if (defaults == suite_defaults().end()) throw ConfigError(fmt::format("unknown suite '{}'", suite_name));

    ExperimentSuite suite;
    suite.name = std::string(suite_name);
    suite.values = default_values();
    for (const auto& [k, v] : defaults->second.values) suite.values[k] = v;
    suite.sweep = defaults->second.sweep;

    // Top section first, then this suite's section, each in file order.
    std::vector<std::tuple<std::string, std::string, std::size_t>> top, own;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find_first_of("#;");
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(fmt::format("malformed section header '{}'", line), line_no);
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            const auto& names = suite_names();
            if (std::find(names.begin(), names.end(), section) == names.end()) {
                throw ConfigError(fmt::format("unknown section '{}'", section), line_no);
            }
            continue;
        }
        auto [key, value] = split_assignment(line, line_no);
        const std::string bare = key.rfind("sweep.", 0) == 0 ? key.substr(6) : key;
        if (!key_types().count(bare)) throw ConfigError(fmt::format("unknown key '{}'", key), line_no);
        if (section.empty()) {
            top.emplace_back(key, value, line_no);
        } else if (section == suite.name) {
            own.emplace_back(key, value, line_no);
        } else {
            // Other suites' sections are still type-checked.
            ExperimentSuite scratch = suite;
            apply_entry(scratch, key, value, line_no);
        }
    }
    for (const auto& [k, v, l] : top) apply_entry(suite, k, v, l);
    for (const auto& [k, v, l] : own) apply_entry(suite, k, v, l);
    for (const auto& o : overrides) {
        auto [key, value] = split_assignment(o, 0);
        apply_entry(suite, key, value, 0);
    }
    validate_suite(suite);
    return suite;
}

ExperimentSuite load_config(std::string_view suite, const std::optional<std::filesystem::path>& path,
                            const std::vector<std::string>& overrides) {
    std::string text;
    if (path) {
        std::ifstream f(*path, std::ios::binary);
        if (!f) throw ConfigError(fmt::format("cannot read config file '{}'", path->string()));
        std::ostringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    return load_config_text(suite, text, overrides);
}

Settings resolve_settings(const std::map<std::string, std::string>& v) {
    const auto num = [&](const char* k) { return *parse_double(v.at(k)); };
    const auto uint = [&](const char* k) { return *parse_uint(v.at(k)); };
    Settings s;
    RunConfig& c = s.run;
    c.delta = num("delta");
    c.t_max = uint("t_max");
    c.cost_proxy = num("cost_proxy");
    c.cost_audit = num("cost_audit");
    c.pi_min = num("pi_min");
    c.auditor = {parse_audit_variant(v.at("auditor")), num("target_rate"), c.pi_min};
    c.strategy = parse_strategy(v.at("strategy"));
    c.seed = uint("seed");
    c.late_window = num("late_window");
    c.budget = v.at("budget") == "main-text" ? BudgetSplit::main_text : BudgetSplit::appendix;
    const std::string& delay = v.at("delay");
    if (delay == "bounded") {
        c.delay = DelayModel::bounded_uniform(static_cast<std::int64_t>(uint("d_max")));
    } else if (delay == "geometric") {
        c.delay = DelayModel::geometric(num("geom_p"));
    } else if (delay == "pareto") {
        c.delay = DelayModel::truncated_pareto(num("pareto_alpha"), num("pareto_xm"),
                                               static_cast<std::int64_t>(uint("pareto_cap")));
    }
    s.env_name = v.at("env");
    const std::string& gap = v.at("gap");
    if (!gap.empty() && gap != "none") s.gap = *parse_double(gap);
    s.naive_pi_min = num("naive_pi_min");
    s.naive_pulls_per_arm = uint("naive_pulls_per_arm");
    s.sigma_f = num("sigma_f");
    s.sigma_r = num("sigma_r");
    s.kappa_f = num("kappa_f");
    s.kappa_r = num("kappa_r");
    return s;
}

EnvironmentSpec build_environment(const Settings& s) {
    if (!s.gap) return make_preset(s.env_name, s.naive_pi_min);
    const double gap = *s.gap;
    if (!(gap > 0.0)) throw ConfigError("gap must be positive");
    if (s.env_name != "standard4" && s.env_name != "segmented2") {
        throw ConfigError("gap applies only to the standard4 and segmented2 environments");
    }
    std::vector<double> theta;
    for (int k = 0; k < 4; ++k) theta.push_back(0.7 - k * gap);
    if (theta.back() <= 0.0) throw ConfigError("gap too large: arm means must stay positive");
    const EnvironmentSpec preset = make_preset(s.env_name);
    if (s.env_name == "standard4") return make_standard_env(theta, preset.bias, preset.proxy_noise_sd);
    return make_segmented_env(theta, preset.segments, preset.bias);
}

std::vector<std::string> extra_columns(std::string_view suite) {
    if (suite == "coverage") return {"first_violation", "final_width"};
    if (suite == "segments") return {"pi_high", "pi_low", "pi_ratio"};
    if (suite == "delays") return {"stop_round_no_delay", "overhead", "pending_at_stop"};
    if (suite == "failure_modes") return {"estimate_0", "estimate_1", "limit_0", "limit_1"};
    if (suite == "bounds") return {"pi_star", "lower_bound", "upper_bound", "grid_pi", "grid_lower_bound"};
    return {};
}

TrialRecord run_trial(std::string_view suite, const Settings& settings, std::uint64_t trial_id,
                      std::uint64_t seed_base) {
    const std::uint64_t seed = seed_base + trial_id;
    TrialRecord rec;
    if (suite == "coverage") {
        rec = coverage_trial(settings, seed);
    } else if (suite == "bai" || suite == "allocators") {
        rec = bai_trial(settings, seed);
    } else if (suite == "segments") {
        rec = segments_trial(settings, seed);
    } else if (suite == "delays") {
        rec = delays_trial(settings, seed);
    } else if (suite == "failure_modes") {
        rec = failure_trial(settings, seed);
    } else if (suite == "bounds") {
        rec = bounds_trial(settings);
    } else {
        throw ConfigError(fmt::format("unknown suite '{}'", suite));
    }
    rec.trial_id = trial_id;
    return rec;
}

SuiteReport run_suite(const ExperimentSuite& suite) {
    SuiteReport report;
    report.suite = suite.name;
    report.config_hash = suite.config_hash();
    report.seed_base = suite.seed_base();
    report.timing = suite.timing;
    for (const auto& [k, list] : suite.sweep) report.sweep_keys.push_back(k);
    report.parameterizations = suite.parameterizations();
    report.extra_columns = extra_columns(suite.name);

    std::vector<Settings> settings;
    for (const auto& p : report.parameterizations) settings.push_back(resolve_settings(p));
    const std::size_t trials = suite.trials();
    const std::size_t total = settings.size() * trials;
    report.rows.resize(total);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        while (true) {
            const std::size_t task = next.fetch_add(1);
            if (task >= total) return;
            const std::size_t param = task / trials;
            const std::uint64_t trial = task % trials;
            try {
                const auto start = std::chrono::steady_clock::now();
                TrialRecord rec = run_trial(suite.name, settings[param], trial, suite.seed_base());
                rec.runtime_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
                rec.param_index = param;
                report.rows[task] = std::move(rec);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(total);
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(suite.workers, total));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::sort(report.rows.begin(), report.rows.end(), [](const TrialRecord& a, const TrialRecord& b) {
        return std::tie(a.param_index, a.trial_id) < std::tie(b.param_index, b.trial_id);
    });
    report.summary = summarize(report);
    report.checks = check_thresholds(report);
    return report;
}

nlohmann::ordered_json summarize(const SuiteReport& report) {
    nlohmann::ordered_json j;
    j["suite"] = report.suite;
    j["config_hash"] = fmt::format("{:016x}", report.config_hash);
    j["seed_base"] = report.seed_base;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    if (!report.parameterizations.empty()) {
        for (const auto& [k, v] : report.parameterizations.front()) {
            if (std::find(report.sweep_keys.begin(), report.sweep_keys.end(), k) == report.sweep_keys.end()) config[k] = v;
        }
    }
    j["config"] = config;
    j["parameterizations"] = nlohmann::ordered_json::array();
    const auto groups = group_rows(report);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& rows = groups[i];
        nlohmann::ordered_json entry;
        nlohmann::ordered_json params = nlohmann::ordered_json::object();
        for (const auto& k : report.sweep_keys) params[k] = report.parameterizations[i].at(k);
        entry["params"] = params;
        entry["trials"] = rows.size();
        nlohmann::ordered_json m;

        const auto rate = [&](std::optional<bool> TrialRecord::*field) {
            const auto v = collect<bool>(rows, [&](const TrialRecord& r) { return r.*field; });
            return mean_of(v);
        };
        const auto has = [&](auto field) {
            return std::any_of(rows.begin(), rows.end(), [&](const TrialRecord* r) { return (r->*field).has_value(); });
        };
        if (has(&TrialRecord::correct)) {
            m["correct_rate"] = rate(&TrialRecord::correct);
            m["certified_rate"] = rate(&TrialRecord::certified);
            const auto misid = collect<bool>(rows, [](const TrialRecord& r) -> std::optional<bool> {
                return r.certified.value_or(false) && !r.correct.value_or(false);
            });
            m["certified_misidentification_rate"] = mean_of(misid);
            m["misidentification_rate"] = 1.0 - rate(&TrialRecord::correct);
        }
        if (has(&TrialRecord::coverage_violation)) {
            m["coverage"] = 1.0 - rate(&TrialRecord::coverage_violation);
        }
        if (has(&TrialRecord::stop_round)) {
            m["stop_round"] = stats_json(collect<std::uint64_t>(rows, [](const TrialRecord& r) { return r.stop_round; }));
        }
        if (has(&TrialRecord::pulls)) {
            m["pulls"] = stats_json(collect<std::uint64_t>(rows, [](const TrialRecord& r) { return r.pulls; }));
        }
        if (has(&TrialRecord::total_cost)) {
            m["total_cost"] = stats_json(collect<double>(rows, [](const TrialRecord& r) { return r.total_cost; }));
        }
        if (has(&TrialRecord::audit_rate)) {
            m["audit_rate"] = stats_json(collect<double>(rows, [](const TrialRecord& r) { return r.audit_rate; }));
        }
        for (std::size_t c = 0; c < report.extra_columns.size(); ++c) {
            m[report.extra_columns[c]] = stats_json(collect<double>(rows, [c](const TrialRecord& r) {
                return c < r.extras.size() ? r.extras[c] : std::nullopt;
            }));
        }
        if (report.suite == "segments") {
            const double hi = m["pi_high"]["mean"].get<double>();
            const double lo = m["pi_low"]["mean"].get<double>();
            m["ratio_of_means"] = lo > 0.0 ? hi / lo : 0.0;
        }
        entry["metrics"] = m;
        j["parameterizations"].push_back(entry);
    }
    return j;
}

std::vector<CheckResult> check_thresholds(const SuiteReport& report) {
    std::vector<CheckResult> out;
    const auto add = [&](std::string name, bool ok, std::string detail) {
        out.push_back({std::move(name), ok, std::move(detail)});
    };
    const auto& params = report.parameterizations;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& m = param_summary(report, i);
        const double delta = *parse_double(params[i].at("delta"));
        if (report.suite == "coverage") {
            const double cov = m.at("coverage").get<double>();
            add(fmt::format("coverage[delta={}]", params[i].at("delta")), cov >= 1.0 - delta,
                fmt::format("coverage {} >= {}", fmt_num(cov), fmt_num(1.0 - delta)));
        } else if (report.suite == "bai") {
            const double misid = m.at("certified_misidentification_rate").get<double>();
            const double stopped = m.at("certified_rate").get<double>();
            add(fmt::format("delta_correct[{}]", i), misid <= delta,
                fmt::format("misidentification {} <= {}", fmt_num(misid), fmt_num(delta)));
            add(fmt::format("stops_before_budget[{}]", i), stopped >= 0.95,
                fmt::format("stopped fraction {} >= 0.95", fmt_num(stopped)));
        } else if (report.suite == "segments") {
            const std::string& a = params[i].at("auditor");
            const double ratio = m.at("ratio_of_means").get<double>();
            if (a == "oracle") {
                add("oracle_ratio", ratio >= 1.9 && ratio <= 2.6, fmt::format("ratio {} in [1.9, 2.6]", fmt_num(ratio)));
            } else if (a == "neyman") {
                add("neyman_ratio", ratio >= 1.5 && ratio <= 2.8, fmt::format("ratio {} in [1.5, 2.8]", fmt_num(ratio)));
            }
        } else if (report.suite == "delays") {
            const std::string& d = params[i].at("delay");
            const double correct = m.at("correct_rate").get<double>();
            add(fmt::format("all_correct[{}]", d), correct == 1.0, fmt::format("correct rate {}", fmt_num(correct)));
            const auto& oh = m.at("overhead");
            const std::size_t n = oh.at("count").get<std::size_t>();
            const double median = oh.at("median").get<double>();
            add(fmt::format("median_overhead[{}]", d), n > 0 && median <= 3.0,
                fmt::format("median {} over {} paired trials <= 3", fmt_num(median), n));
            if (d == "bounded") {
                const double dmax = *parse_double(params[i].at("d_max"));
                const double mx = n ? oh.at("max").get<double>() : 0.0;
                add("bounded_pathwise_overhead", n > 0 && mx <= dmax,
                    fmt::format("max {} <= d_max {}", fmt_num(mx), fmt_num(dmax)));
            }
        } else if (report.suite == "failure_modes") {
            const std::string& env = params[i].at("env");
            if (env == "naive-bias") {
                const double e0 = m.at("estimate_0").at("mean").get<double>();
                const double e1 = m.at("estimate_1").at("mean").get<double>();
                const double l0 = m.at("limit_0").at("mean").get<double>();
                const double l1 = m.at("limit_1").at("mean").get<double>();
                add("naive_arm1_limit", std::abs(e0 - l0) <= 0.01, fmt::format("{} vs {}", fmt_num(e0), fmt_num(l0)));
                add("naive_arm2_limit", std::abs(e1 - l1) <= 0.01, fmt::format("{} vs {}", fmt_num(e1), fmt_num(l1)));
                const double wrong = m.at("misidentification_rate").get<double>();
                add("naive_wrong_argmax", wrong >= 0.99, fmt::format("wrong argmax rate {} >= 0.99", fmt_num(wrong)));
            }
        } else if (report.suite == "bounds") {
            const auto& r = report.rows.at(i * (report.rows.size() / params.size()));
            const double pi_star = *r.extras[0];
            const double grid_pi = *r.extras[3];
            const double lower = *r.extras[1];
            const double grid_lower = *r.extras[4];
            const double clipped = std::clamp(pi_star, 1e-4, 1.0);
            bool ok = std::abs(grid_pi - clipped) <= 1e-4 + 1e-12;
            if (pi_star >= 1e-4 && pi_star < 1.0) ok = ok && std::abs(grid_lower - lower) <= 1e-6 * lower;
            add(fmt::format("grid_agreement[{}]", i), ok,
                fmt::format("pi* {} grid {}; lower {} grid {}", fmt_num(pi_star), fmt_num(grid_pi), fmt_num(lower),
                            fmt_num(grid_lower)));
        }
    }
    if (report.suite == "allocators") {
        const auto mean_cost = [&](const std::string& a, double* acc) -> std::optional<double> {
            const auto idx = params_with(report, "auditor", a);
            if (idx.empty()) return std::nullopt;
            double cost = 0.0, correct = 0.0;
            for (auto i : idx) {
                cost += param_summary(report, i).at("total_cost").at("mean").get<double>();
                correct += param_summary(report, i).at("correct_rate").get<double>();
            }
            if (acc) *acc = correct / static_cast<double>(idx.size());
            return cost / static_cast<double>(idx.size());
        };
        double acc_u = 0.0, acc_n = 0.0;
        const auto u = mean_cost("uniform", &acc_u);
        const auto n = mean_cost("neyman", &acc_n);
        const auto o = mean_cost("oracle", nullptr);
        if (u && n) {
            add("neyman_cost_ratio", *n <= 0.7 * *u, fmt::format("neyman/uniform = {} <= 0.7", fmt_num(*n / *u)));
            add("neyman_accuracy", std::abs(acc_n - acc_u) <= 0.05,
                fmt::format("accuracy neyman {} uniform {}", fmt_num(acc_n), fmt_num(acc_u)));
        }
        if (o && n) add("oracle_le_neyman", *o <= *n, fmt::format("oracle {} <= neyman {}", fmt_num(*o), fmt_num(*n)));
    }
    if (report.suite == "failure_modes") {
        double worst = -1.0;
        for (const auto& env : {"proxy-failure-a", "proxy-failure-b"}) {
            for (auto i : params_with(report, "env", env)) {
                worst = std::max(worst, param_summary(report, i).at("misidentification_rate").get<double>());
            }
        }
        if (worst >= 0.0) {
            add("proxy_only_worst_case", worst >= 0.45, fmt::format("worst-instance misidentification {} >= 0.45", fmt_num(worst)));
        }
    }
    return out;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_number(double x) { return fmt::format("{}", x); }

std::string to_csv(const SuiteReport& report) {
    std::vector<std::string> header = {"suite", "param_index"};
    for (const auto& k : report.sweep_keys) header.push_back(k);
    for (const char* c : {"trial_id", "selected_arm", "correct", "certified", "stop_round", "pulls", "total_cost",
                          "audit_rate", "coverage_violation"}) {
        header.emplace_back(c);
    }
    for (const auto& c : report.extra_columns) header.push_back(c);
    if (report.timing) header.emplace_back("runtime_ms");

    std::string out;
    const auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_escape(cells[i]);
        }
        out += '\n';
    };
    emit(header);
    const auto opt_bool = [](std::optional<bool> b) { return b ? std::string(*b ? "1" : "0") : std::string(); };
    const auto opt_uint = [](auto v) { return v ? std::to_string(*v) : std::string(); };
    const auto opt_num = [](std::optional<double> v) { return v ? format_number(*v) : std::string(); };
    for (const auto& r : report.rows) {
        std::vector<std::string> cells = {report.suite, std::to_string(r.param_index)};
        for (const auto& k : report.sweep_keys) cells.push_back(report.parameterizations.at(r.param_index).at(k));
        cells.push_back(std::to_string(r.trial_id));
        cells.push_back(opt_uint(r.selected_arm));
        cells.push_back(opt_bool(r.correct));
        cells.push_back(opt_bool(r.certified));
        cells.push_back(opt_uint(r.stop_round));
        cells.push_back(opt_uint(r.pulls));
        cells.push_back(opt_num(r.total_cost));
        cells.push_back(opt_num(r.audit_rate));
        cells.push_back(opt_bool(r.coverage_violation));
        for (std::size_t c = 0; c < report.extra_columns.size(); ++c) {
            cells.push_back(c < r.extras.size() ? opt_num(r.extras[c]) : std::string());
        }
        if (report.timing) cells.push_back(format_number(r.runtime_ms));
        emit(cells);
    }
    return out;
}

void write_report(const SuiteReport& report, const std::filesystem::path& dir) {
    if (report.rows.empty()) throw std::invalid_argument("refusing to write a report with no rows");
    const std::string csv = to_csv(report);
    nlohmann::ordered_json summary = report.summary;
    nlohmann::ordered_json checks = nlohmann::ordered_json::array();
    for (const auto& c : report.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    summary["checks"] = checks;
    const std::string json = summary.dump(2) + "\n";

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
    const auto write = [](const std::filesystem::path& p, const std::string& body) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
        f << body;
        if (!f) throw std::runtime_error(fmt::format("failed writing '{}'", p.string()));
    };
    write(dir / (report.suite + ".csv"), csv);
    write(dir / (report.suite + ".summary.json"), json);
}

double audit_objective(double pi, double sigma_f, double sigma_r, double kappa_f, double kappa_r,
                       double cost_proxy, double cost_audit) {
    return (sigma_f * sigma_f / kappa_f + sigma_r * sigma_r / (kappa_r * pi)) * (cost_proxy + cost_audit * pi);
}

}  // namespace ppbai
