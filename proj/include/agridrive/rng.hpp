#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace agridrive {

// Deterministic random stream. std::mt19937_64 has a fixed, portable output
// sequence; the distribution mappings below are spelled out here instead of
// using <random> distributions, whose sequences are implementation-defined.
// Identical (seed, call sequence) therefore gives identical samples on every
// toolchain, which the replay and golden-file tests rely on.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; the second variate is discarded so the
    // stream advances by exactly two draws per call.
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 == 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Normal(mean, sd) rejected into [lo, hi].
    double truncated_gaussian(double mean, double sd, double lo, double hi) {
        for (;;) {
            const double x = mean + sd * gaussian();
            if (x >= lo && x <= hi) return x;
        }
    }

    // Exponential tail with the given scale, shifted to start at `lo` and
    // truncated at `hi` by inverse-CDF (no rejection).
    double truncated_exponential(double lo, double hi, double scale) {
        const double cap = 1.0 - std::exp(-(hi - lo) / scale);
        const double u = uniform01() * cap;
        return lo - scale * std::log(1.0 - u);
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace agridrive
