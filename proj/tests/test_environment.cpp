#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "ppbai/environment.hpp"

using namespace ppbai;

TEST_SUITE("environment") {

TEST_CASE("standard env construction and validation") {
    const auto env = make_standard_env({0.7, 0.6, 0.5, 0.4}, 0.1, 0.15);
    CHECK(env.arm_count == 4);
    CHECK(env.best_arm() == 0);
    CHECK(env.theta[0] - env.theta[1] == doctest::Approx(0.1));
    CHECK_THROWS(make_standard_env({0.7, 1.2}, 0.1, 0.15));
    CHECK_THROWS(make_standard_env({0.7, 0.6}, 0.1, -0.1));
    CHECK_THROWS(make_standard_env({0.7}, 0.1, 0.1));
}

TEST_CASE("identity proxy when bias and noise vanish") {
    const auto env = make_standard_env({0.3, 0.8}, 0.0, 0.0);
    RandomStream rng(42);
    double fs = 0.0, ys = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const auto o = sample_instance(env, i % 2, rng);
        REQUIRE(o.proxy == o.latent_outcome);
        fs += o.proxy;
        ys += o.latent_outcome;
    }
    CHECK(fs == ys);
}

TEST_CASE("clipped proxy bias matches the quadrature oracle") {
    const auto env = make_standard_env({0.7, 0.6}, 0.1, 0.15);
    RandomStream rng(7);
    const int n = 1000000;
    for (std::size_t arm : {0u, 1u}) {
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto o = sample_instance(env, arm, rng);
            const double d = o.proxy - o.latent_outcome;
            sum += d;
            sum_sq += d * d;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum_sq / n - mean * mean) / n);
        const double expected = arm == 0 ? oracle::kClippedBias07 : oracle::kClippedBias06;
        CHECK(std::abs(mean - expected) < 4 * se);
    }
}

TEST_CASE("range contract across all presets") {
    for (const auto& name : preset_names()) {
        const auto env = make_preset(name);
        RandomStream rng(1);
        for (int i = 0; i < 200000; ++i) {
            const auto o = sample_instance(env, i % env.arm_count, rng);
            REQUIRE(o.proxy >= 0.0);
            REQUIRE(o.proxy <= 1.0);
            REQUIRE(o.latent_outcome >= 0.0);
            REQUIRE(o.latent_outcome <= 1.0);
            REQUIRE(o.true_g >= 0.0);
        }
    }
    const auto env = make_preset("standard4");
    RandomStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double y = sample_instance(env, 0, rng).latent_outcome;
        REQUIRE((y == 0.0 || y == 1.0));
    }
    CHECK_THROWS_AS(sample_instance(env, 4, rng), std::out_of_range);
    CHECK_THROWS(make_preset("no-such-env"));
}

TEST_CASE("determinism under identical seeds") {
    const auto env = make_preset("segmented2");
    RandomStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const auto x = sample_instance(env, i % 4, a);
        const auto y = sample_instance(env, i % 4, b);
        REQUIRE(x.proxy == y.proxy);
        REQUIRE(x.latent_outcome == y.latent_outcome);
        REQUIRE(x.segment_index == y.segment_index);
    }
}

TEST_CASE("segmented env: masses, residual second moments and true_g") {
    CHECK_THROWS(make_segmented_env({0.7, 0.6}, {{0.5, 0.25, "a"}, {0.4, 0.05, "b"}}, 0.1));
    const auto env = make_preset("segmented2");
    REQUIRE(env.segment_count() == 2);
    RandomStream rng(11);
    double sq[2] = {0, 0}, g[2] = {0, 0};
    int n[2] = {0, 0};
    for (int i = 0; i < 400000; ++i) {
        const auto o = sample_instance(env, i % 4, rng);
        const double r = o.latent_outcome - o.proxy;
        sq[o.segment_index] += r * r;
        g[o.segment_index] += o.true_g;
        ++n[o.segment_index];
    }
    CHECK(n[0] / 400000.0 == doctest::Approx(0.5).epsilon(0.02));
    CHECK(sq[0] / n[0] == doctest::Approx(0.25).epsilon(0.1));
    CHECK(sq[1] / n[1] == doctest::Approx(0.05).epsilon(0.1));
    CHECK(g[0] / n[0] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(g[1] / n[1] == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(std::sqrt(0.25 / 0.05) == doctest::Approx(2.2360679775).epsilon(1e-10));
    // Realized means stay near the targets.
    const double targets[4] = {0.7, 0.6, 0.5, 0.4};
    for (int k = 0; k < 4; ++k) CHECK(env.theta[k] == doctest::Approx(targets[k]).epsilon(0.02));
}

TEST_CASE("segmented env with one segment keeps the arm means") {
    const auto env = make_segmented_env({0.7, 0.6}, {{1.0, 0.1, "all"}}, 0.1);
    CHECK(env.segment_count() == 1);
    RandomStream rng(5);
    double y = 0.0;
    for (int i = 0; i < 200000; ++i) y += sample_instance(env, 0, rng).latent_outcome;
    CHECK(y / 200000 == doctest::Approx(env.theta[0]).epsilon(0.01));
    CHECK(env.theta[0] == doctest::Approx(0.7).epsilon(0.02));
}

TEST_CASE("proxy-failure pair") {
    const auto [a, b] = make_proxy_failure_pair();
    CHECK(a.theta[0] == doctest::Approx(0.6));
    CHECK(a.theta[1] == doctest::Approx(0.4));
    CHECK(b.theta[0] == doctest::Approx(0.4));
    CHECK(b.theta[1] == doctest::Approx(0.6));
    CHECK(a.best_arm() == 0);
    CHECK(b.best_arm() == 1);

    RandomStream rng(9);
    for (int i = 0; i < 1000; ++i) {
        const auto o = sample_instance(a, 0, rng);
        if (o.proxy == 0.0) REQUIRE(o.latent_outcome == doctest::Approx(0.2));
        if (o.proxy == 1.0) REQUIRE(o.latent_outcome == doctest::Approx(1.0));
    }

    // Same proxy marginal per arm across instances: two-sample proportion test at level 1e-3.
    const int n = 100000;
    for (std::size_t arm : {0u, 1u}) {
        RandomStream ra(100 + arm), rb(200 + arm);
        double ca = 0, cb = 0, ya = 0, yb = 0;
        for (int i = 0; i < n; ++i) {
            const auto oa = sample_instance(a, arm, ra);
            const auto ob = sample_instance(b, arm, rb);
            ca += oa.proxy;
            cb += ob.proxy;
            ya += oa.latent_outcome;
            yb += ob.latent_outcome;
        }
        const double pa = ca / n, pb = cb / n, pool = (ca + cb) / (2.0 * n);
        const double z = (pa - pb) / std::sqrt(pool * (1 - pool) * 2.0 / n);
        CHECK(std::abs(z) < 3.29);
        // Audited means reveal the best arm.
        CHECK(ya / n == doctest::Approx(a.theta[arm]).epsilon(0.02));
        CHECK(yb / n == doctest::Approx(b.theta[arm]).epsilon(0.02));
    }
}

TEST_CASE("naive-bias env and closed-form limits") {
    const auto env = make_naive_bias_env(0.1);
    CHECK(env.theta[0] == doctest::Approx(0.5));
    CHECK(env.theta[1] == doctest::Approx(0.625));
    CHECK(env.best_arm() == 1);
    CHECK_THROWS(make_naive_bias_env(0.5));
    CHECK_THROWS(make_naive_bias_env(0.0));
    CHECK(naive_limit(1, 0.1) == doctest::Approx(oracle::kNaiveM1).epsilon(1e-12));
    CHECK(naive_limit(2, 0.1) == doctest::Approx(oracle::kNaiveM2).epsilon(1e-12));
    CHECK(naive_limit(1, 1.0 - 1e-15) == doctest::Approx(0.5));
    CHECK_THROWS(naive_limit(1, 1.5));
    CHECK_THROWS(naive_limit(3, 0.1));
}

TEST_CASE("delay sampling") {
    RandomStream rng(42);
    const auto none = DelayModel::none();
    for (int i = 0; i < 100; ++i) REQUIRE(sample_delay(none, rng) == 0);

    const auto geo = DelayModel::geometric(0.3);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += static_cast<double>(sample_delay(geo, rng));
    CHECK(sum / 100000 == doctest::Approx(7.0 / 3.0).epsilon(0.05 / 2.33));

    const auto bounded = DelayModel::bounded_uniform(10);
    std::int64_t lo = 100, hi = -1;
    for (int i = 0; i < 100000; ++i) {
        const auto d = sample_delay(bounded, rng);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    CHECK(lo == 0);
    CHECK(hi == 10);

    const auto pareto = DelayModel::truncated_pareto(2.5, 1.0, 50);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 100000; ++i) {
        const auto d = sample_delay(pareto, rng);
        REQUIRE(d >= 0);
        REQUIRE(d <= 50);
        seen.insert(d);
    }
    CHECK(seen.count(50) == 1);

    CHECK_THROWS(DelayModel::geometric(0.0).validate());
    CHECK_THROWS(DelayModel::truncated_pareto(0.5, 1.0, 10).validate());
}

}  // TEST_SUITE
