#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ppbai/bounds.hpp"

using namespace ppbai;

TEST_SUITE("bounds") {

TEST_CASE("upper bound overlay") {
    const std::vector<double> gaps = {0.1, 0.2, 0.3};
    const double ub = upper_bound_cost(gaps, 0.05, 4, 0.05, 1, 20, 0.1);
    CHECK(std::abs(ub - oracle::kUpperBoundExample) < 1e3);
    const double one = upper_bound_cost(gaps, 0.05, 4, 1.0, 1, 20, 0.1);
    CHECK(one / ub == doctest::Approx(1.25 / 400.25));
    const std::vector<double> doubled = {0.2, 0.4, 0.6};
    CHECK(upper_bound_cost(doubled, 0.05, 4, 0.05, 1, 20, 0.1) == doctest::Approx(ub / 4));
    const std::vector<double> zero = {0.1, 0.0};
    CHECK_THROWS(upper_bound_cost(zero, 0.05, 3, 0.05, 1, 20, 0.1));
    CHECK_THROWS(upper_bound_cost(gaps, 0.05, 4, 0.05, 1, 20, 1.5));
}

TEST_CASE("truncation kappa") {
    const auto wide = truncation_kappa(0.3, 0.2, 0.3 - 38 * 0.2, 0.3 + 38 * 0.2);
    CHECK(std::abs(wide.value - 1.0) < 1e-9);
    const auto sym = truncation_kappa(0.5, 0.15, 0.0, 1.0);
    CHECK(sym.value == doctest::Approx(oracle::kKappaSymmetric).epsilon(1e-9));
    CHECK(sym.below_one);
    // Symmetric windows have a vanishing squared term, so kappa = 1 - 2 c phi(c) / Z.
    for (double c : {0.5, 1.0, 2.0, 3.0}) {
        const double z = std::erf(c / std::sqrt(2.0));
        const double phi = std::exp(-0.5 * c * c) / std::sqrt(2 * M_PI);
        CHECK(truncation_kappa(1.0, 2.0, 1.0 - 2 * c, 1.0 + 2 * c).value == doctest::Approx(1 - 2 * c * phi / z));
    }
    CHECK_THROWS(truncation_kappa(0.0, 1.0, 1.0, 0.5));
    CHECK_THROWS(truncation_kappa(0.0, 1.0, 40.0, 41.0));
    CHECK_THROWS(truncation_kappa(0.0, 0.0, -1.0, 1.0));
}

TEST_CASE("optimal audit rate") {
    GaussianInstance inst;
    CHECK(optimal_audit_rate(inst) == doctest::Approx(oracle::kOptimalRateExample).epsilon(1e-10));
    inst.sigma_r = 0.0;
    CHECK(optimal_audit_rate(inst) == 0.0);
    CHECK(optimal_audit_rate(inst, 0.05) == 0.05);
    GaussianInstance sym{0.1, 0.05, 3.0, 3.0, 0.2, 0.2, 1.5, 1.5};
    CHECK(optimal_audit_rate(sym) == doctest::Approx(1.0));
    inst.sigma_f = 0.0;
    CHECK_THROWS(optimal_audit_rate(inst));
}

TEST_CASE("gaussian lower bound") {
    GaussianInstance inst;
    CHECK(gaussian_lower_bound(inst) == doctest::Approx(oracle::kLowerBoundExample).epsilon(1e-10));
    inst.sigma_r = 0.0;
    CHECK(gaussian_lower_bound(inst) == doctest::Approx(2 * std::log(20.0) * 0.15 * 0.15 / 0.01));
    inst.gap = 0.0;
    CHECK_THROWS(gaussian_lower_bound(inst));
}

TEST_CASE("grid oracle agreement on random parameterizations") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int tested = 0;
    while (tested < 50) {
        GaussianInstance inst;
        inst.gap = 0.05 + 0.3 * u(rng);
        inst.delta = 0.01 + 0.2 * u(rng);
        inst.cost_proxy = 0.5 + 2 * u(rng);
        inst.cost_audit = 2 + 50 * u(rng);
        inst.sigma_f = 0.05 + 0.3 * u(rng);
        inst.sigma_r = 0.02 + 0.4 * u(rng);
        inst.kappa_f = 0.8 + 0.6 * u(rng);
        inst.kappa_r = 0.8 + 0.6 * u(rng);
        const double pi = optimal_audit_rate(inst);
        if (pi < 1e-3 || pi >= 1.0) continue;  // interior optimum only
        ++tested;
        const auto g = oracle::grid_min(inst.sigma_f, inst.sigma_r, inst.kappa_f, inst.kappa_r, inst.cost_proxy,
                                        inst.cost_audit);
        CHECK(std::abs(g.pi - pi) <= 1e-4);
        const double scaled = 2 * std::log(1 / inst.delta) / (inst.gap * inst.gap) * g.value;
        CHECK(std::abs(scaled - gaussian_lower_bound(inst)) <= 1e-6 * gaussian_lower_bound(inst));
    }
}

TEST_CASE("envelope consistency is reported, not asserted") {
    GaussianInstance inst;
    const double gap = inst.gap;
    const double ub = upper_bound_cost(std::span<const double>(&gap, 1), inst.delta, 2, 0.05, 1, 20, 0.1);
    MESSAGE("upper " << ub << " vs lower " << gaussian_lower_bound(inst));
    CHECK(ub > 0);
}

}  // TEST_SUITE
