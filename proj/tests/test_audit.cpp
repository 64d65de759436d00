#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "ppbai/audit.hpp"
#include "ppbai/random.hpp"

using namespace ppbai;

namespace {

DecisionContext ctx(std::size_t arm, std::size_t seg, double proxy, std::optional<double> g = std::nullopt) {
    return {arm, seg, proxy, {0.4, 0.6}, {0.3, 0.5}, g};
}

// Mean of g/pi over a 50/50 two-segment context stream.
double realized_variance_factor(AuditVariant v, double g_hi, double g_lo, int pulls = 4000) {
    Auditor a({v, 0.1, 0.01}, 1, 2);
    double acc = 0.0;
    for (int i = 0; i < pulls; ++i) {
        const std::size_t seg = i % 2;
        const double g = seg == 0 ? g_hi : g_lo;
        const double p = a.probability(ctx(0, seg, 0.5, g));
        acc += g / p;
    }
    return acc / pulls;
}

}  // namespace

TEST_SUITE("audit") {

TEST_CASE("variant parsing") {
    CHECK(parse_audit_variant("uniform") == AuditVariant::uniform);
    CHECK(parse_audit_variant("pop") == AuditVariant::price_of_precision);
    CHECK(parse_audit_variant("uncertainty") == AuditVariant::uncertainty_weighted);
    CHECK(parse_audit_variant("neyman") == AuditVariant::neyman);
    CHECK(parse_audit_variant("oracle") == AuditVariant::oracle);
    CHECK(parse_audit_variant("never") == AuditVariant::never);
    CHECK(parse_audit_variant("always") == AuditVariant::always);
    CHECK_THROWS(parse_audit_variant("sometimes"));
    CHECK_THROWS(AuditPolicyKind{AuditVariant::uniform, 0.1, 0.2}.validate());
}

TEST_CASE("degenerate and fixed policies") {
    Auditor uniform({AuditVariant::uniform, 0.1, 0.05}, 2, 1);
    Auditor always({AuditVariant::always, 0.1, 0.05}, 2, 1);
    Auditor never({AuditVariant::never, 0.1, 0.05}, 2, 1);
    for (int i = 0; i < 100; ++i) {
        CHECK(uniform.probability(ctx(i % 2, 0, 0.3)) == 0.1);
        CHECK(always.probability(ctx(0, 0, 0.3)) == 1.0);
        CHECK(never.probability(ctx(0, 0, 0.3)) == 0.0);
    }
    CHECK(never.proxy_only());
    Auditor threshold({AuditVariant::fixed_threshold, 0.1, 0.1}, 2, 1);
    CHECK(threshold.probability(ctx(0, 0, 0.7)) == 1.0);
    CHECK(threshold.probability(ctx(0, 0, 0.3)) == 0.1);
}

TEST_CASE("uncertainty weighting") {
    Auditor a({AuditVariant::uncertainty_weighted, 0.1, 0.05}, 2, 1);
    // Leader [0.4, 0.6], challenger [0.3, 0.5]: overlap 0.1 over width 0.2.
    CHECK(a.probability(ctx(0, 0, 0.5)) == doctest::Approx(0.15));
    DecisionContext separated{0, 0, 0.5, {0.6, 0.8}, {0.2, 0.5}, std::nullopt};
    CHECK(a.probability(separated) == doctest::Approx(0.1));
}

TEST_CASE("oracle requires true_g") {
    Auditor a({AuditVariant::oracle, 0.1, 0.05}, 1, 1);
    CHECK_THROWS(a.probability(ctx(0, 0, 0.5)));
    CHECK(a.needs_true_g());
}

TEST_CASE("residual scale model") {
    ResidualScaleModel m(2);
    CHECK(m.bin_count() == 20);
    CHECK(ResidualScaleModel::decile(0.0) == 0);
    CHECK(ResidualScaleModel::decile(0.95) == 9);
    CHECK(ResidualScaleModel::decile(1.0) == 9);
    const std::size_t b = m.bin(1, 0.55);
    CHECK(m.g_hat_bin(b) == doctest::Approx(0.25));
    m.update(1, 0.55, 0.5);
    CHECK(m.g_hat_bin(b) == doctest::Approx((10 * 0.25 + 0.25) / 11));
    m.update(1, 0.55, 0.9);
    CHECK(m.g_hat_bin(b) > 0.25);
    // Other bins keep the prior.
    CHECK(m.g_hat(0, 0.55) == doctest::Approx(0.25));
    CHECK_THROWS(m.update(0, 1.5, 0.1));

    // Bounded residuals with second moment 0.25.
    ResidualScaleModel big(1);
    RandomStream rng(3);
    const double half = std::sqrt(0.75);
    for (int i = 0; i < 10000; ++i) big.update(0, 0.35, (2 * rng.uniform() - 1) * half);
    CHECK(std::abs(big.g_hat(0, 0.35) - 0.25) < 0.01);
}

TEST_CASE("lambda calibration") {
    std::vector<ScoredContext> one = {{1.0, 0.5}};
    CHECK(calibrate_lambda(one, 0.1, 0.05).lambda == doctest::Approx(0.2).epsilon(1e-6));

    std::vector<ScoredContext> two = {{1.0, 0.5}, {1.0, std::sqrt(0.05)}};
    const auto fit = calibrate_lambda(two, 0.1, 0.05);
    CHECK(std::abs(fit.lambda - oracle::kTwoBinLambda) < 1e-4);
    CHECK(fit.lambda * 0.5 == doctest::Approx(0.1382).epsilon(1e-3));
    CHECK(fit.lambda * std::sqrt(0.05) == doctest::Approx(0.0618).epsilon(1e-3));
    CHECK(std::abs(fit.mean_probability - 0.1) < 0.005);

    const auto sat = calibrate_lambda(two, 1.0, 0.05);
    CHECK(sat.lambda * std::sqrt(0.05) >= 1.0);

    // Floor above the target: clamped.
    const auto unreachable = calibrate_lambda(one, 0.01, 0.05);
    CHECK(unreachable.clamped);
    CHECK(calibrate_lambda({}, 0.1, 0.05).lambda == 1.0);
}

TEST_CASE("neyman target ratio and the grid oracle") {
    CHECK(neyman_target_ratio(0.25, 0.05) == doctest::Approx(2.2360679775).epsilon(1e-10));
    CHECK(neyman_target_ratio(0.3, 0.3) == 1.0);
    CHECK_THROWS(neyman_target_ratio(0.0, 0.1));

    // min 0.5 g_h/p_h + 0.5 g_l/p_l subject to 0.5 (p_h + p_l) = rho.
    const double gh = 0.25, gl = 0.05, rho = 0.1;
    double best = 1e18, best_ratio = 0;
    for (int i = 1; i < 200; ++i) {
        const double ph = i * 1e-3, pl = 2 * rho - ph;
        if (pl <= 0) continue;
        const double v = 0.5 * gh / ph + 0.5 * gl / pl;
        if (v < best) {
            best = v;
            best_ratio = ph / pl;
        }
    }
    CHECK(std::abs(best_ratio - neyman_target_ratio(gh, gl)) < 1e-2 * neyman_target_ratio(gh, gl) + 0.02);
}

TEST_CASE("oracle emitted ratio on two segments") {
    Auditor a({AuditVariant::oracle, 0.1, 0.05}, 1, 2);
    double hi = 0, lo = 0;
    int nh = 0, nl = 0;
    for (int i = 0; i < 2000; ++i) {
        const std::size_t seg = i % 2;
        const double p = a.probability(ctx(0, seg, 0.5, seg == 0 ? 0.25 : 0.05));
        REQUIRE(p >= 0.05);
        REQUIRE(p <= 1.0);
        if (i >= 1000) (seg == 0 ? hi : lo) += p, ++(seg == 0 ? nh : nl);
    }
    CHECK((hi / nh) / (lo / nl) == doctest::Approx(2.236).epsilon(0.01));
    CHECK(a.calibrator().mean_probability() == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("neyman dominance grows with heterogeneity") {
    const double u5 = realized_variance_factor(AuditVariant::uniform, 0.25, 0.05);
    const double o5 = realized_variance_factor(AuditVariant::oracle, 0.25, 0.05);
    const double u50 = realized_variance_factor(AuditVariant::uniform, 0.25, 0.005);
    const double o50 = realized_variance_factor(AuditVariant::oracle, 0.25, 0.005);
    CHECK(o5 <= u5);
    CHECK(o50 <= u50);
    CHECK(u50 / o50 > u5 / o5);
}

TEST_CASE("learned neyman matches oracle with many returns per bin") {
    Auditor ney({AuditVariant::neyman, 0.1, 0.01}, 1, 2);
    Auditor ora({AuditVariant::oracle, 0.1, 0.01}, 1, 2);
    RandomStream rng(5);
    const double g[2] = {0.25, 0.05};
    for (std::size_t seg : {0u, 1u}) {
        const double half = std::sqrt(3 * g[seg]);
        for (int i = 0; i < 10000; ++i) ney.observe_return(0, seg, 0.5, (2 * rng.uniform() - 1) * half);
    }
    double pn[2] = {0, 0}, po[2] = {0, 0};
    for (int i = 0; i < 1000; ++i) {
        const std::size_t seg = i % 2;
        const double a = ney.probability(ctx(0, seg, 0.5));
        const double b = ora.probability(ctx(0, seg, 0.5, g[seg]));
        if (i >= 500) pn[seg] += a, po[seg] += b;
    }
    for (int s = 0; s < 2; ++s) CHECK(pn[s] == doctest::Approx(po[s]).epsilon(0.1));
}

TEST_CASE("price of precision stays in range and tracks the budget") {
    Auditor a({AuditVariant::price_of_precision, 0.1, 0.05}, 2, 1);
    RandomStream rng(8);
    for (int i = 0; i < 3000; ++i) {
        const std::size_t arm = i % 2;
        const double f = arm == 0 ? rng.uniform() : 0.5 + 0.1 * rng.uniform();
        const double p = a.probability(ctx(arm, 0, f));
        REQUIRE(p >= 0.05);
        REQUIRE(p <= 1.0);
        if (rng.bernoulli(p)) a.observe_return(arm, 0, f, 0.3 * (rng.uniform() - 0.5));
    }
    CHECK(std::abs(a.calibrator().mean_probability() - 0.1) < 0.02);
}

}  // TEST_SUITE
