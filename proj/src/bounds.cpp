#include "ppbai/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ppbai/normal.hpp"

namespace ppbai {

void GaussianInstance::validate() const {
    if (!(gap > 0.0)) throw std::invalid_argument("gap must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (!(cost_proxy > 0.0) || !(cost_audit > 0.0)) throw std::invalid_argument("costs must be positive");
    if (sigma_f < 0.0 || sigma_r < 0.0) throw std::invalid_argument("sigmas must be nonnegative");
    if (!(kappa_f > 0.0) || !(kappa_r > 0.0)) throw std::invalid_argument("kappas must be positive");
}

double upper_bound_cost(std::span<const double> gaps, double delta, std::size_t k_arms, double pi_min,
                        double cost_proxy, double cost_audit, double audit_fraction) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
    if (k_arms < 2) throw std::invalid_argument("need at least 2 arms");
    if (!(pi_min > 0.0 && pi_min <= 1.0)) throw std::invalid_argument("pi_min must lie in (0,1]");
    if (audit_fraction < 0.0 || audit_fraction > 1.0) throw std::invalid_argument("audit_fraction must lie in [0,1]");
    const double envelope = 0.25 + 1.0 / (pi_min * pi_min);
    const double per_pull = cost_proxy + cost_audit * audit_fraction;
    const double log_term = std::log(static_cast<double>(k_arms) / delta);
    double total = 0.0;
    for (double gap : gaps) {
        if (!(gap > 0.0)) throw std::invalid_argument("zero gap");
        total += log_term / (gap * gap) * envelope * per_pull;
    }
    return total;
}

KappaResult truncation_kappa(double mu, double sigma, double a, double b) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!(a < b)) throw std::invalid_argument("truncation window needs a < b");
    const double alpha = (a - mu) / sigma;
    const double beta = (b - mu) / sigma;
    const double z = normal_cdf(beta) - normal_cdf(alpha);
    if (z < 1e-12) throw std::domain_error("truncation window is numerically empty");
    const double pa = normal_pdf(alpha);
    const double pb = normal_pdf(beta);
    const double shift = (pa - pb) / z;
    KappaResult r;
    r.value = 1.0 + (alpha * pa - beta * pb) / z - shift * shift;
    r.below_one = r.value < 1.0 - 1e-12;
    return r;
}

double optimal_audit_rate(const GaussianInstance& inst, double floor) {
    inst.validate();
    if (!(inst.sigma_f > 0.0)) throw std::invalid_argument("sigma_f must be positive");
    const double raw = std::sqrt(inst.cost_proxy / inst.cost_audit) * (inst.sigma_r / std::sqrt(inst.kappa_r)) /
                       (inst.sigma_f / std::sqrt(inst.kappa_f));
    return std::clamp(raw, floor, 1.0);
}

double gaussian_lower_bound(const GaussianInstance& inst) {
    if (!(inst.gap > 0.0)) throw std::invalid_argument("zero gap");
    inst.validate();
    const double s = std::sqrt(inst.cost_proxy) * inst.sigma_f / std::sqrt(inst.kappa_f) +
                     std::sqrt(inst.cost_audit) * inst.sigma_r / std::sqrt(inst.kappa_r);
    return 2.0 * std::log(1.0 / inst.delta) / (inst.gap * inst.gap) * s * s;
}

}  // namespace ppbai
