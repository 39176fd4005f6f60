#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pcg {

// Seeded generator with hand-rolled distributions. std::mt19937_64 output is
// fixed by the standard, but the std distributions are not, so uniform draws
// are built directly from raw engine output to keep corpora reproducible
// everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform in [-1, 1].
    double symmetric() { return uniform(-1.0, 1.0); }

    // Marsaglia polar method; standard normal.
    double gaussian() {
        for (;;) {
            double u = symmetric();
            double v = symmetric();
            double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

private:
    std::mt19937_64 engine_;
};

// splitmix64 step; used to derive independent child seeds from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace pcg
