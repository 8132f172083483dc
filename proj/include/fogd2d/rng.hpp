#pragma once

#include <cstdint>
#include <random>

namespace fogd2d {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive combination of stream keys.
inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)); }
inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return mix_keys(mix_keys(a, b), c); }

/// Uniform in the open interval (0, 1) from 64 random bits.
inline double bits_to_unit(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

/// Sequential stream owned by one replication.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    double uniform() { return bits_to_unit(engine_()); }
    std::uint64_t bits() { return engine_(); }
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        std::poisson_distribution<std::uint64_t> d(mean);
        return d(engine_);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace fogd2d
