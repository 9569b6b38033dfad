#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace uot {

// Deterministic RNG with named substreams. All randomness in a run flows
// from one master seed; substreams keep consumers (data sampling, weight
// init, batch shuffling, z draws) independent of each other.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
        // splitmix64 over seed^tag
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() {
        // 53-bit mantissa in [0,1)
        return (engine_() >> 11) * 0x1.0p-53;
    }

    // Box-Muller; avoids std::normal_distribution so draws are identical
    // across standard library implementations.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    std::uint64_t next_u64() { return engine_(); }

    // index in [0, n)
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace uot
