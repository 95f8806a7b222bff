/**
 * @file   rng.hpp
 * @brief  Portable deterministic random numbers and per-purpose seed derivation.
 *
 * Distributions are implemented here rather than through <random> so that
 * generated datasets are bit-identical across standard library vendors.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace raylink {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// seed = hash(root, purpose, index...). FNV-1a over the purpose tag, mixed with splitmix64.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0,
                                 std::uint64_t sub = 0)
{
    std::uint64_t tag = 0xcbf29ce484222325ULL;
    for (char c : purpose) {
        tag ^= static_cast<unsigned char>(c);
        tag *= 0x100000001b3ULL;
    }
    std::uint64_t h = splitmix64(root ^ splitmix64(tag));
    h = splitmix64(h ^ index);
    return splitmix64(h ^ (sub * 0x9e3779b97f4a7c15ULL));
}

class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }
    bool bernoulli(double p) { return uniform() < p; }
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace raylink
