#pragma once

// Portable seeded randomness. std::mt19937_64 has a bit-exact output sequence
// mandated by the standard; the distributions below are written out by hand
// because the std:: ones are implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "tmadfrc/model.hpp"

namespace tmadfrc {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Sub-seed for a named stream: splitmix64(seed ^ fnv1a(tag)) mixed with index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : tag) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(seed ^ h) + index);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bit() { return (engine_() >> 63) != 0; }

    std::uint64_t next() { return engine_(); }

    /// Standard normal via Box-Muller; the second variate is cached.
    double gaussian()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * kPi * u2;
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    /// Circular complex Gaussian with E|z|^2 = variance.
    cplx complex_gaussian(double variance)
    {
        const double sd = std::sqrt(variance / 2.0);
        const double re = gaussian();
        const double im = gaussian();
        return {sd * re, sd * im};
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace tmadfrc
