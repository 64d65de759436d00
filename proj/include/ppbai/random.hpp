#pragma once

#include <cstdint>
#include <random>

namespace ppbai {

// Seeded pseudo-random stream. Every trial owns its streams; nothing here is shared.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    // Independent sub-stream keyed by (seed, purpose, index).
    static RandomStream derive(std::uint64_t seed, std::uint32_t purpose, std::uint32_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          purpose, index};
        RandomStream s(0);
        s.engine_.seed(seq);
        return s;
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double normal(double mean, double sd) {
        if (sd <= 0.0) return mean;
        return std::normal_distribution<double>(mean, sd)(engine_);
    }

    // Always consumes one uniform so that streams stay aligned whatever p is.
    bool bernoulli(double p) { return uniform() < p; }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }

    // Failures before the first success.
    std::int64_t geometric(double p) { return std::geometric_distribution<std::int64_t>(p)(engine_); }

private:
    std::mt19937_64 engine_;
};

}  // namespace ppbai
