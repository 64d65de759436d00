#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ppbai/random.hpp"

namespace ppbai {

enum class EnvKind { standard, segmented, proxy_failure_A, proxy_failure_B, naive_bias_pair };

std::string_view to_string(EnvKind kind);

struct SegmentSpec {
    double mass = 1.0;
    double residual_variance = 0.0;  // conditional second moment of Y - F inside the segment
    std::string label;
};

/// One draw of an evaluation instance for a given arm.
///
/// `true_g` is the generator's conditional second moment E[(Y-F)^2 | arm, segment, F]. Only the
/// oracle audit policy and tests may look at it; the run loop hands other policies a narrowed view.
struct Observation {
    std::size_t segment_index = 0;
    double proxy = 0.0;
    double latent_outcome = 0.0;
    double true_g = 0.0;
};

// Per-segment binary-judge parameters of a segmented environment: the proxy takes value f0
// (negative verdict) or f1 (positive verdict) and Y | F=f ~ Bernoulli(q(f)).
struct JudgeSegment {
    double f0 = 0.0, f1 = 1.0;
    double q0 = 0.0, q1 = 1.0;
};

struct EnvironmentSpec {
    std::size_t arm_count = 0;
    std::vector<double> theta;  // verified means; realized means for segmented envs
    double bias = 0.0;
    double proxy_noise_sd = 0.0;
    std::vector<SegmentSpec> segments;
    EnvKind kind = EnvKind::standard;

    // naive_bias_pair: positivity floor of the threshold audit rule pi(f) = 1{f > 0.5} or pi_min.
    double naive_pi_min = 0.0;

    // segmented: judge parameters per segment, P(positive verdict) per arm x segment.
    std::vector<JudgeSegment> judge;
    std::vector<std::vector<double>> positive_rate;

    std::size_t segment_count() const { return segments.empty() ? 1 : segments.size(); }
    /// Index of the arm with the largest verified mean (lowest index on ties).
    std::size_t best_arm() const;
};

enum class DelayKind { none, bounded_uniform, geometric, truncated_pareto };

std::string_view to_string(DelayKind kind);

struct DelayModel {
    DelayKind kind = DelayKind::none;
    std::int64_t d_max = 0;
    double p = 1.0;
    double alpha = 2.0;
    double x_m = 1.0;

    static DelayModel none() { return {}; }
    static DelayModel bounded_uniform(std::int64_t d_max) { return {DelayKind::bounded_uniform, d_max, 1.0, 2.0, 1.0}; }
    static DelayModel geometric(double p) { return {DelayKind::geometric, 0, p, 2.0, 1.0}; }
    static DelayModel truncated_pareto(double alpha, double x_m, std::int64_t d_max) {
        return {DelayKind::truncated_pareto, d_max, 1.0, alpha, x_m};
    }

    // Throws std::invalid_argument when the kind-specific parameters are out of range.
    void validate() const;
};

// Y ~ Bernoulli(theta_k), F = clip(Y + bias + eps, 0, 1), eps ~ N(0, noise_sd^2).
EnvironmentSpec make_standard_env(std::vector<double> theta, double bias, double noise_sd);

EnvironmentSpec make_segmented_env(std::vector<double> theta, std::vector<SegmentSpec> segments, double bias);

// The two K=2 instances with identical proxy marginals and swapped best arms.
std::pair<EnvironmentSpec, EnvironmentSpec> make_proxy_failure_pair();

// F ~ U[0,1]; Y(arm 0) = F, Y(arm 1) = 1 if F <= 0.5 else 1 - F. Requires pi_min in (0, 0.5).
EnvironmentSpec make_naive_bias_env(double pi_min);

// Limit of the unweighted audited mean under the threshold audit rule. arm is 1 or 2.
double naive_limit(int arm, double pi_min);

Observation sample_instance(const EnvironmentSpec& env, std::size_t arm, RandomStream& rng);

std::int64_t sample_delay(const DelayModel& model, RandomStream& rng);

// Named presets: standard4, segmented2, proxy-failure-a, proxy-failure-b, naive-bias,
// bernoulli-half, large-gap2.
EnvironmentSpec make_preset(std::string_view name, double naive_pi_min = 0.1);
const std::vector<std::string>& preset_names();

}  // namespace ppbai
