#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ppbai {

enum class AuditVariant {
    uniform,
    price_of_precision,
    uncertainty_weighted,
    neyman,
    oracle,
    fixed_threshold,
    never,
    always,
};

std::string_view to_string(AuditVariant v);
// Accepts the config spellings uniform|pop|uncertainty|neyman|oracle|threshold|never|always.
AuditVariant parse_audit_variant(std::string_view name);

struct AuditPolicyKind {
    AuditVariant variant = AuditVariant::uniform;
    double target_rate = 0.1;  // rho
    double pi_min = 0.05;

    void validate() const;
};

/// Binned online estimate of the residual second moment g(x, f) for one arm.
///
/// Bins are segment x proxy decile. Each bin starts from `prior_weight` pseudo-returns at
/// `prior_second_moment`, so the estimate is positive before any audit has come back.
class ResidualScaleModel {
public:
    static constexpr std::size_t kDeciles = 10;

    explicit ResidualScaleModel(std::size_t segments = 1, double prior_second_moment = 0.25,
                                double prior_weight = 10.0);

    static std::size_t decile(double proxy);
    std::size_t bin(std::size_t segment, double proxy) const;
    std::size_t bin_count() const { return counts_.size(); }

    void update(std::size_t segment, double proxy, double residual);

    double g_hat_bin(std::size_t bin) const;
    double g_hat(std::size_t segment, double proxy) const { return g_hat_bin(bin(segment, proxy)); }
    double s_hat(std::size_t segment, double proxy) const;
    std::size_t count(std::size_t bin) const { return counts_.at(bin); }

private:
    std::size_t segments_;
    double prior_;
    double prior_weight_;
    std::vector<std::size_t> counts_;
    std::vector<double> sum_sq_;
};

struct ScoredContext {
    double weight = 1.0;
    double score = 0.0;  // unnormalized audit score, e.g. s_hat
};

struct LambdaFit {
    double lambda = 1.0;
    double mean_probability = 0.0;  // weighted mean of clip(lambda * score, pi_min, 1)
    bool clamped = false;           // target not reachable; lambda pinned at a search bound
};

// Bisection in log(lambda) over [1e-6, 1e6] so the weighted mean of clip(lambda*score, pi_min, 1)
// hits target_rate. An empty context set returns lambda = 1.
LambdaFit calibrate_lambda(std::span<const ScoredContext> contexts, double target_rate, double pi_min);

class BudgetCalibrator {
public:
    void record(double probability) {
        cumulative_prob_sum_ += probability;
        ++eligible_pulls_;
    }
    double cumulative_prob_sum() const { return cumulative_prob_sum_; }
    std::size_t eligible_pulls() const { return eligible_pulls_; }
    double mean_probability() const {
        return eligible_pulls_ ? cumulative_prob_sum_ / static_cast<double>(eligible_pulls_) : 0.0;
    }
    double lambda() const { return lambda_; }
    void set_lambda(double lambda) { lambda_ = lambda; }

private:
    double cumulative_prob_sum_ = 0.0;
    std::size_t eligible_pulls_ = 0;
    double lambda_ = 1.0;
};

// sqrt(g_high / g_low)
double neyman_target_ratio(double g_high, double g_low);

struct IntervalView {
    double lower = 0.0;
    double upper = 0.0;
};

// What a policy may see when deciding on an audit. true_g is filled only for the oracle.
struct DecisionContext {
    std::size_t arm = 0;
    std::size_t segment_index = 0;
    double proxy = 0.0;
    IntervalView leader;
    IntervalView challenger;
    std::optional<double> true_g;
};

/// Stateful audit-probability engine for one run.
class Auditor {
public:
    static constexpr std::size_t kRecalibrateEvery = 50;
    static constexpr std::size_t kOracleLevels = 1000;

    Auditor(AuditPolicyKind kind, std::size_t arms, std::size_t segments, double cost_proxy = 1.0,
            double cost_audit = 20.0);

    // Probability for the current pull, in [pi_min, 1] (0 for `never`). Records the context for
    // budget calibration.
    double probability(const DecisionContext& ctx);

    // A returned audit: (segment, proxy) of the original pull and the residual Y - F.
    void observe_return(std::size_t arm, std::size_t segment, double proxy, double residual);

    const AuditPolicyKind& kind() const { return kind_; }
    bool needs_true_g() const { return kind_.variant == AuditVariant::oracle; }
    bool proxy_only() const { return kind_.variant == AuditVariant::never; }
    const ResidualScaleModel& scale(std::size_t arm) const { return scale_.at(arm); }
    const BudgetCalibrator& calibrator() const { return calib_; }
    double lambda() const { return calib_.lambda(); }
    // Current unnormalized score for a context (neyman, oracle, price_of_precision).
    double score(const DecisionContext& ctx) const;

private:
    struct Welford {
        std::size_t n = 0;
        double mean = 0.0, m2 = 0.0;
        void add(double x) {
            ++n;
            const double d = x - mean;
            mean += d / static_cast<double>(n);
            m2 += d * (x - mean);
        }
    };

    void note_context(const DecisionContext& ctx);
    void recalibrate();
    double pop_score(std::size_t arm) const;

    AuditPolicyKind kind_;
    double cost_ratio_sqrt_;
    std::vector<ResidualScaleModel> scale_;
    BudgetCalibrator calib_;
    std::vector<std::vector<double>> bin_weight_;  // neyman: arm x bin
    std::vector<double> arm_weight_;               // price_of_precision: arm
    std::vector<double> level_weight_;             // oracle: quantized sqrt(g)
    std::vector<Welford> proxy_stats_;
    std::vector<Welford> residual_stats_;
};

}  // namespace ppbai
