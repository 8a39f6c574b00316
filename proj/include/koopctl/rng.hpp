#pragma once

#include <cstdint>
#include <random>

namespace koopctl {

// Deterministic random source. Uniform and normal variates are generated by
// hand (53-bit mantissa draw, Marsaglia polar) on top of mt19937_64 so that
// streams do not depend on the standard library's distribution
// implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal.
    double normal();
    double normal(double mean, double stddev);

    // Deterministic sub-stream seed derivation (master seed + stream index).
    static std::uint64_t derive(std::uint64_t master, std::uint64_t stream);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace koopctl
