#pragma once

#include <cstddef>
#include <span>

namespace ppbai {

struct GaussianInstance {
    double gap = 0.1;
    double delta = 0.05;
    double cost_proxy = 1.0;
    double cost_audit = 20.0;
    double sigma_f = 0.15;
    double sigma_r = 0.3;
    double kappa_f = 1.0;
    double kappa_r = 1.0;

    void validate() const;
};

// Order-of-magnitude overlay: universal constant 1, loglog factors dropped.
double upper_bound_cost(std::span<const double> gaps, double delta, std::size_t k_arms, double pi_min,
                        double cost_proxy, double cost_audit, double audit_fraction);

struct KappaResult {
    double value = 1.0;
    bool below_one = false;  // flagged, not corrected
};

// Variance ratio of N(mu, sigma^2) truncated to [a, b].
KappaResult truncation_kappa(double mu, double sigma, double a, double b);

double optimal_audit_rate(const GaussianInstance& inst, double floor = 0.0);

// Per-arm term; callers sum over suboptimal arms.
double gaussian_lower_bound(const GaussianInstance& inst);

}  // namespace ppbai
