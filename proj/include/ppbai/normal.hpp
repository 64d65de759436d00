#pragma once

#include <cmath>
#include <numbers>

namespace ppbai {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// erfc keeps full relative accuracy in the lower tail, which matters for |z| around 10.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace ppbai
