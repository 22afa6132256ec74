#pragma once

#include "sdslab/grid.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace sdslab {

// Deterministic random source. The engine is std::mt19937_64 (its output
// sequence is fixed by the standard); all distributions are implemented
// here rather than with <random> adaptors, whose outputs are
// implementation-defined, so that identical seeds give identical streams
// on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Uniform integer in [a, b], inclusive.
    int uniform_int(int a, int b) {
        const uint64_t span = static_cast<uint64_t>(b - a) + 1;
        return a + static_cast<int>(eng_() % span);
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Vec normal_vec(size_t n) {
        Vec out(n);
        for (double& e : out) e = normal();
        return out;
    }

    uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

uint64_t splitmix64(uint64_t x);

// One root seed per run, split into named substreams so that toggling one
// consumer (teacher init, pose sampling, t sampling, noise, ...) does not
// shift any other consumer's stream.
class RngPool {
public:
    explicit RngPool(uint64_t root) : root_(root) {}

    Rng stream(std::string_view name) const;
    uint64_t stream_seed(std::string_view name) const;
    uint64_t root() const { return root_; }

private:
    uint64_t root_;
};

} // namespace sdslab
