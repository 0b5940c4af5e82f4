#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace gcnn {

// Splitmix64-style mixer used to derive independent seed streams (per fold,
// per epoch, per layer) from one master seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seeded RNG wrapper. All randomness in the library flows through this type
// so that runs are reproducible bit-for-bit given the same seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    // Inclusive range.
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }
    bool bernoulli(double p) {
        return std::bernoulli_distribution(p)(engine_);
    }
    std::uint64_t next_u64() { return engine_(); }

    template <typename It>
    void shuffle(It first, It last) {
        std::shuffle(first, last, engine_);
    }

    Rng fork(std::uint64_t stream) { return Rng(mix_seed(engine_(), stream)); }

private:
    std::mt19937_64 engine_;
};

}  // namespace gcnn
