#pragma once

#include <cstdint>
#include <random>

namespace netsep {

// splitmix64; used to derive independent seeds from (seed, stream id) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// mt19937_64 with hand-rolled value mapping. std::uniform_*_distribution is
// implementation-defined, so byte-reproducible outputs require our own
// conversions on top of the (fully specified) engine stream.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return unit() < p; }

    // Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t index(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace netsep
