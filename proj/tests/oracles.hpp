#pragma once

// Independent reference computations used by the tests. Values marked frozen were computed
// offline at 30 significant digits (mpmath) and are pinned here.

#include <cmath>

namespace oracle {

// psi recomputed in long double, straight from the definition.
inline long double psi(long double v, long double alpha) {
    const long double e = std::exp(1.0L);
    long double ll = std::log(std::log(std::max(2.0L * v, e)));
    if (ll < 0.0L) ll = 0.0L;
    return 1.7L * std::sqrt(v * (ll + 0.72L * std::log(5.2L / alpha)));
}

// Frozen values.
constexpr double kPsi25_0025 = 19.3961768947453337563;
constexpr double kPsi100_005 = 38.0562789001002897280;
constexpr double kPsi25_0003125 = 22.0087307023925802166;
constexpr double kKappaSymmetric = 0.989709309370425256873;  // mu=0.5, sigma=0.15, [0,1]
constexpr double kLowerBoundExample = 1333.09620992847161423;
constexpr double kUpperBoundExample = 716178.348882356955419;
constexpr double kOptimalRateExample = 0.447213595499957939282;
constexpr double kNaiveM1 = 0.704545454545454545455;
constexpr double kNaiveM2 = 0.318181818181818181818;
constexpr double kTwoBinLambda = 0.276393202250021030359;
// E[F] - E[Y] for F = clip(Y + 0.1 + N(0, 0.15^2), 0, 1), Y ~ Bernoulli(theta), by quadrature.
constexpr double kClippedBias07 = 0.0209328211635012721672;
constexpr double kClippedBias06 = 0.0354664105758878037529;

// Brute-force minimizer of f(pi) = (sf^2/kf + sr^2/(kr pi)) (cF + cY pi) on
// {step, 2 step, ..., 1}.
struct GridMin {
    double pi;
    double value;
};
inline GridMin grid_min(double sf, double sr, double kf, double kr, double cf, double cy, double step = 1e-4) {
    GridMin best{0.0, INFINITY};
    const int n = static_cast<int>(std::lround(1.0 / step));
    for (int i = 1; i <= n; ++i) {
        const double p = i * step;
        const double f = (sf * sf / kf + sr * sr / (kr * p)) * (cf + cy * p);
        if (f < best.value) best = {p, f};
    }
    return best;
}

}  // namespace oracle
