#include "ppbai/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ppbai/normal.hpp"

namespace ppbai {
namespace {

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

void check_theta(const std::vector<double>& theta) {
    if (theta.size() < 2) throw std::invalid_argument("environment needs at least 2 arms");
    for (double t : theta) {
        if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("theta entries must lie in [0,1]");
    }
}

// Density (continuous part) or point mass of F = clip(y + b + eps, 0, 1) at f.
double proxy_likelihood(double f, double y, double bias, double sd) {
    if (sd <= 0.0) return f == clip01(y + bias) ? 1.0 : 0.0;
    if (f <= 0.0) return normal_cdf((0.0 - y - bias) / sd);
    if (f >= 1.0) return 1.0 - normal_cdf((1.0 - y - bias) / sd);
    return normal_pdf((f - y - bias) / sd) / sd;
}

// E[(Y - F)^2 | F = f] for the standard Bernoulli-outcome environment.
double standard_g(double theta, double f, double bias, double sd) {
    const double l1 = theta * proxy_likelihood(f, 1.0, bias, sd);
    const double l0 = (1.0 - theta) * proxy_likelihood(f, 0.0, bias, sd);
    const double total = l1 + l0;
    const double q = total > 0.0 ? l1 / total : theta;
    return q * (1.0 - f) * (1.0 - f) + (1.0 - q) * f * f;
}

std::size_t draw_segment(const EnvironmentSpec& env, RandomStream& rng) {
    if (env.segments.size() <= 1) return 0;
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t s = 0; s + 1 < env.segments.size(); ++s) {
        acc += env.segments[s].mass;
        if (u < acc) return s;
    }
    return env.segments.size() - 1;
}

// P(Y = 1 | F = f) that makes E[(Y - f)^2] = g for Y in {0,1}.
double outcome_rate_for(double f, double g) {
    const double denom = 1.0 - 2.0 * f;
    if (std::abs(denom) < 1e-12) throw std::invalid_argument("segment proxy level 0.5 cannot carry a residual moment");
    return (g - f * f) / denom;
}

}  // namespace

std::string_view to_string(EnvKind kind) {
    switch (kind) {
        case EnvKind::standard: return "standard";
        case EnvKind::segmented: return "segmented";
        case EnvKind::proxy_failure_A: return "proxy_failure_A";
        case EnvKind::proxy_failure_B: return "proxy_failure_B";
        case EnvKind::naive_bias_pair: return "naive_bias_pair";
    }
    return "unknown";
}

std::string_view to_string(DelayKind kind) {
    switch (kind) {
        case DelayKind::none: return "none";
        case DelayKind::bounded_uniform: return "bounded";
        case DelayKind::geometric: return "geometric";
        case DelayKind::truncated_pareto: return "pareto";
    }
    return "unknown";
}

std::size_t EnvironmentSpec::best_arm() const {
    return static_cast<std::size_t>(std::max_element(theta.begin(), theta.end()) - theta.begin());
}

void DelayModel::validate() const {
    switch (kind) {
        case DelayKind::none: return;
        case DelayKind::bounded_uniform:
            if (d_max < 0) throw std::invalid_argument("bounded delay needs d_max >= 0");
            return;
        case DelayKind::geometric:
            if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("geometric delay needs p in (0,1]");
            return;
        case DelayKind::truncated_pareto:
            if (!(alpha > 1.0)) throw std::invalid_argument("pareto delay needs alpha > 1");
            if (!(x_m > 0.0)) throw std::invalid_argument("pareto delay needs x_m > 0");
            if (d_max < 0) throw std::invalid_argument("pareto delay needs d_max >= 0");
            return;
    }
}

EnvironmentSpec make_standard_env(std::vector<double> theta, double bias, double noise_sd) {
    check_theta(theta);
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be nonnegative");
    EnvironmentSpec env;
    env.arm_count = theta.size();
    env.theta = std::move(theta);
    env.bias = bias;
    env.proxy_noise_sd = noise_sd;
    env.segments = {SegmentSpec{1.0, 0.0, "all"}};
    env.kind = EnvKind::standard;
    return env;
}

EnvironmentSpec make_segmented_env(std::vector<double> theta, std::vector<SegmentSpec> segments, double bias) {
    check_theta(theta);
    if (segments.empty()) throw std::invalid_argument("segmented environment needs at least one segment");
    double mass = 0.0;
    for (const auto& s : segments) {
        if (!(s.mass > 0.0 && s.mass <= 1.0)) throw std::invalid_argument("segment mass must lie in (0,1]");
        if (!(s.residual_variance >= 0.0)) throw std::invalid_argument("segment residual variance must be >= 0");
        mass += s.mass;
    }
    if (std::abs(mass - 1.0) > 1e-12) throw std::invalid_argument("segment masses must sum to 1");

    EnvironmentSpec env;
    env.arm_count = theta.size();
    env.bias = bias;
    env.kind = EnvKind::segmented;
    env.segments = std::move(segments);

    const double f0 = clip01(0.0 + bias);
    const double f1 = clip01(1.0 + bias);
    if (f0 == f1) throw std::invalid_argument("bias collapses both judge verdicts onto one proxy value");
    for (const auto& s : env.segments) {
        JudgeSegment j{f0, f1, outcome_rate_for(f0, s.residual_variance), outcome_rate_for(f1, s.residual_variance)};
        const double eps = 1e-12;
        if (j.q0 < -eps || j.q0 > 1 + eps || j.q1 < -eps || j.q1 > 1 + eps || !(j.q1 > j.q0)) {
            throw std::invalid_argument("segment '" + s.label + "': residual variance " +
                                        std::to_string(s.residual_variance) + " is not reachable with bias " +
                                        std::to_string(bias));
        }
        j.q0 = clip01(j.q0);
        j.q1 = clip01(j.q1);
        env.judge.push_back(j);
    }

    env.theta.assign(env.arm_count, 0.0);
    env.positive_rate.assign(env.arm_count, std::vector<double>(env.segments.size(), 0.0));
    for (std::size_t k = 0; k < env.arm_count; ++k) {
        for (std::size_t s = 0; s < env.segments.size(); ++s) {
            const auto& j = env.judge[s];
            const double p = std::clamp((theta[k] - j.q0) / (j.q1 - j.q0), 0.0, 1.0);
            env.positive_rate[k][s] = p;
            env.theta[k] += env.segments[s].mass * (p * j.q1 + (1.0 - p) * j.q0);
        }
    }
    return env;
}

std::pair<EnvironmentSpec, EnvironmentSpec> make_proxy_failure_pair() {
    EnvironmentSpec a;
    a.arm_count = 2;
    a.theta = {0.6, 0.4};
    a.segments = {SegmentSpec{1.0, 0.0, "all"}};
    a.kind = EnvKind::proxy_failure_A;
    EnvironmentSpec b = a;
    b.theta = {0.4, 0.6};
    b.kind = EnvKind::proxy_failure_B;
    return {a, b};
}

EnvironmentSpec make_naive_bias_env(double pi_min) {
    if (!(pi_min > 0.0 && pi_min < 0.5)) throw std::invalid_argument("naive-bias env needs pi_min in (0, 0.5)");
    EnvironmentSpec env;
    env.arm_count = 2;
    env.theta = {0.5, 0.625};
    env.segments = {SegmentSpec{1.0, 0.0, "all"}};
    env.kind = EnvKind::naive_bias_pair;
    env.naive_pi_min = pi_min;
    return env;
}

double naive_limit(int arm, double pi_min) {
    if (!(pi_min > 0.0 && pi_min <= 1.0)) throw std::invalid_argument("pi_min must lie in (0,1]");
    if (arm == 1) return (0.75 + 0.25 * pi_min) / (1.0 + pi_min);
    if (arm == 2) return (0.25 + pi_min) / (1.0 + pi_min);
    throw std::invalid_argument("naive_limit arm must be 1 or 2");
}

Observation sample_instance(const EnvironmentSpec& env, std::size_t arm, RandomStream& rng) {
    if (arm >= env.arm_count) throw std::out_of_range("arm index out of range");
    Observation obs;
    switch (env.kind) {
        case EnvKind::standard: {
            const double y = rng.bernoulli(env.theta[arm]) ? 1.0 : 0.0;
            const double f = clip01(y + env.bias + rng.normal(0.0, env.proxy_noise_sd));
            obs.proxy = f;
            obs.latent_outcome = y;
            obs.true_g = standard_g(env.theta[arm], f, env.bias, env.proxy_noise_sd);
            break;
        }
        case EnvKind::segmented: {
            const std::size_t s = draw_segment(env, rng);
            const auto& j = env.judge[s];
            const bool positive = rng.bernoulli(env.positive_rate[arm][s]);
            obs.segment_index = s;
            obs.proxy = positive ? j.f1 : j.f0;
            obs.latent_outcome = rng.bernoulli(positive ? j.q1 : j.q0) ? 1.0 : 0.0;
            obs.true_g = env.segments[s].residual_variance;
            break;
        }
        case EnvKind::proxy_failure_A:
        case EnvKind::proxy_failure_B: {
            // The "good" arm maps F=0 -> 0.2, F=1 -> 1.0; the other maps F=0 -> 0.0, F=1 -> 0.8.
            const bool good = (env.kind == EnvKind::proxy_failure_A) == (arm == 0);
            const bool high = rng.bernoulli(0.5);
            obs.proxy = high ? 1.0 : 0.0;
            obs.latent_outcome = good ? (high ? 1.0 : 0.2) : (high ? 0.8 : 0.0);
            obs.true_g = (obs.latent_outcome - obs.proxy) * (obs.latent_outcome - obs.proxy);
            break;
        }
        case EnvKind::naive_bias_pair: {
            const double f = rng.uniform();
            obs.proxy = f;
            obs.latent_outcome = arm == 0 ? f : (f <= 0.5 ? 1.0 : 1.0 - f);
            obs.true_g = (obs.latent_outcome - f) * (obs.latent_outcome - f);
            break;
        }
    }
    return obs;
}

std::int64_t sample_delay(const DelayModel& model, RandomStream& rng) {
    switch (model.kind) {
        case DelayKind::none: return 0;
        case DelayKind::bounded_uniform: return rng.uniform_int(0, model.d_max);
        case DelayKind::geometric: return model.p >= 1.0 ? 0 : rng.geometric(model.p);
        case DelayKind::truncated_pareto: {
            const double u = 1.0 - rng.uniform();  // (0, 1]
            const double x = model.x_m * std::pow(u, -1.0 / model.alpha);
            const double capped = std::min(std::round(x), static_cast<double>(model.d_max));
            return static_cast<std::int64_t>(capped);
        }
    }
    return 0;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"standard4",  "segmented2",     "proxy-failure-a", "proxy-failure-b",
                                                "naive-bias", "bernoulli-half", "large-gap2"};
    return names;
}

EnvironmentSpec make_preset(std::string_view name, double naive_pi_min) {
    if (name == "standard4") return make_standard_env({0.7, 0.6, 0.5, 0.4}, 0.1, 0.15);
    if (name == "segmented2") {
        return make_segmented_env({0.7, 0.6, 0.5, 0.4}, {{0.5, 0.25, "high"}, {0.5, 0.05, "low"}}, 0.1);
    }
    if (name == "proxy-failure-a") return make_proxy_failure_pair().first;
    if (name == "proxy-failure-b") return make_proxy_failure_pair().second;
    if (name == "naive-bias") return make_naive_bias_env(naive_pi_min);
    if (name == "bernoulli-half") return make_standard_env({0.5, 0.5}, 0.0, 0.0);
    if (name == "large-gap2") return make_standard_env({1.0, 0.07}, 0.1, 0.15);
    throw std::invalid_argument("unknown environment preset '" + std::string(name) + "'");
}

}  // namespace ppbai
