#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace ppbai {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }
    bool operator==(const CompensatedSum&) const = default;

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Per-arm sufficient statistics for the prediction-powered estimate.
///
/// Proxy scores enter on every pull; IPW residuals (A/pi)(Y-F) enter only when an audit returns,
/// using the propensity logged at request time. Pending audits are counted so the delayed width
/// can charge for them.
class ArmAccumulator {
public:
    explicit ArmAccumulator(double pi_min = 1.0);

    void record_pull(double proxy);
    // Throws std::invalid_argument("positivity violated") when propensity < pi_min.
    void record_audit_request(double propensity);
    void record_audit_return(double propensity, double residual);

    std::uint64_t pulls() const { return pulls_; }
    double proxy_sum() const { return proxy_sum_.value(); }
    double residual_ipw_sum() const { return residual_sum_.value(); }
    std::uint64_t pending_count() const { return pending_; }
    std::uint64_t audit_requests() const { return requests_; }
    double pi_min() const { return pi_min_; }

    bool operator==(const ArmAccumulator&) const = default;

private:
    double pi_min_;
    std::uint64_t pulls_ = 0;
    std::uint64_t requests_ = 0;
    std::uint64_t pending_ = 0;
    CompensatedSum proxy_sum_;
    CompensatedSum residual_sum_;
};

enum class BudgetSplit {
    appendix,   // 2K streams, each two-sided delta/(2K): psi gets alpha = delta/(4K)
    main_text,  // delta_k = delta/K split over two streams: alpha = delta/(2K)
};

struct BoundaryParams {
    double alpha = 0.0;  // tail level handed to psi
    double pi_min = 1.0;
    std::size_t k_arms = 1;
    double delta = 0.05;

    static BoundaryParams make(double delta, std::size_t k_arms, double pi_min,
                               BudgetSplit split = BudgetSplit::appendix);
};

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double proxy_width = 0.0;
    double residual_width = 0.0;
    double point = 0.0;
};

// Stitched time-uniform boundary 1.7 sqrt(v (lnln(max(2v, e)) + 0.72 ln(5.2/alpha))).
double psi(double v, double alpha);

double theta_hat(const ArmAccumulator& acc);
double proxy_width(const ArmAccumulator& acc, const BoundaryParams& params);
double residual_width(const ArmAccumulator& acc, const BoundaryParams& params);
// residual_width + pending/(pi_min * pulls)
double delayed_residual_width(const ArmAccumulator& acc, const BoundaryParams& params);
ConfidenceInterval interval(const ArmAccumulator& acc, const BoundaryParams& params);

}  // namespace ppbai
