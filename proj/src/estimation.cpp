#include "ppbai/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ppbai {

ArmAccumulator::ArmAccumulator(double pi_min) : pi_min_(pi_min) {
    if (!(pi_min > 0.0 && pi_min <= 1.0)) throw std::invalid_argument("pi_min must lie in (0,1]");
}

void ArmAccumulator::record_pull(double proxy) {
    if (!(proxy >= 0.0 && proxy <= 1.0)) throw std::invalid_argument("proxy score must lie in [0,1]");
    ++pulls_;
    proxy_sum_.add(proxy);
}

void ArmAccumulator::record_audit_request(double propensity) {
    if (!(propensity >= pi_min_)) throw std::invalid_argument("positivity violated");
    if (propensity > 1.0) throw std::invalid_argument("propensity above 1");
    if (requests_ >= pulls_) throw std::logic_error("audit request without a matching pull");
    ++requests_;
    ++pending_;
}

void ArmAccumulator::record_audit_return(double propensity, double residual) {
    if (pending_ == 0) throw std::logic_error("audit return without a pending request");
    if (!(residual >= -1.0 && residual <= 1.0)) throw std::invalid_argument("residual must lie in [-1,1]");
    if (!(propensity >= pi_min_ && propensity <= 1.0)) throw std::invalid_argument("positivity violated");
    const double increment = residual / propensity;
    // |increment| <= 1/pi_min follows from the two guards above.
    residual_sum_.add(increment);
    --pending_;
}

BoundaryParams BoundaryParams::make(double delta, std::size_t k_arms, double pi_min, BudgetSplit split) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (k_arms == 0) throw std::invalid_argument("k_arms must be positive");
    if (!(pi_min > 0.0 && pi_min <= 1.0)) throw std::invalid_argument("pi_min must lie in (0,1]");
    const double k = static_cast<double>(k_arms);
    const double alpha = split == BudgetSplit::appendix ? delta / (4.0 * k) : delta / (2.0 * k);
    return {alpha, pi_min, k_arms, delta};
}

double psi(double v, double alpha) {
    if (!(v > 0.0)) throw std::invalid_argument("psi needs v > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("psi needs alpha in (0,1)");
    const double loglog = std::log(std::log(std::max(2.0 * v, std::numbers::e)));
    return 1.7 * std::sqrt(v * (std::max(loglog, 0.0) + 0.72 * std::log(5.2 / alpha)));
}

namespace {
void require_pulls(const ArmAccumulator& acc) {
    if (acc.pulls() == 0) throw std::invalid_argument("arm has zero pulls");
}
}  // namespace

double theta_hat(const ArmAccumulator& acc) {
    require_pulls(acc);
    const double n = static_cast<double>(acc.pulls());
    return acc.proxy_sum() / n + acc.residual_ipw_sum() / n;
}

double proxy_width(const ArmAccumulator& acc, const BoundaryParams& params) {
    require_pulls(acc);
    const double n = static_cast<double>(acc.pulls());
    return psi(n / 4.0, params.alpha) / n;
}

double residual_width(const ArmAccumulator& acc, const BoundaryParams& params) {
    require_pulls(acc);
    const double n = static_cast<double>(acc.pulls());
    const double m = 2.0 / params.pi_min;
    return psi(n * m * m / 4.0, params.alpha) / n;
}

double delayed_residual_width(const ArmAccumulator& acc, const BoundaryParams& params) {
    const double base = residual_width(acc, params);
    if (acc.pending_count() == 0) return base;
    const double n = static_cast<double>(acc.pulls());
    return base + static_cast<double>(acc.pending_count()) / (params.pi_min * n);
}

ConfidenceInterval interval(const ArmAccumulator& acc, const BoundaryParams& params) {
    ConfidenceInterval ci;
    ci.point = theta_hat(acc);
    ci.proxy_width = proxy_width(acc, params);
    ci.residual_width = delayed_residual_width(acc, params);
    ci.lower = ci.point - ci.proxy_width - ci.residual_width;
    ci.upper = ci.point + ci.proxy_width + ci.residual_width;
    return ci;
}

}  // namespace ppbai
