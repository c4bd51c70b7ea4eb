#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sdh::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based deterministic random stream (xoshiro256**).
///
/// All randomness in the project flows through Stream so that runs are
/// reproducible across platforms: doubles are built from the top 53 bits
/// of the generator output instead of std::uniform_real_distribution,
/// whose output is implementation-defined.
class Stream {
  public:
    Stream() : Stream(0) {}

    explicit Stream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    /// Derive an independent stream from (master, purpose, index).
    static Stream derive(std::uint64_t master, std::uint64_t purpose, std::uint64_t index = 0) {
        std::uint64_t sm = master;
        std::uint64_t a = splitmix64(sm);
        sm ^= 0x632be59bd9b4e019ULL * (purpose + 1);
        std::uint64_t b = splitmix64(sm);
        sm ^= 0x9e6c63d0876a9a47ULL * (index + 1);
        std::uint64_t c = splitmix64(sm);
        return Stream(a ^ (b * 0xff51afd7ed558ccdULL) ^ (c * 0xc4ceb9fe1a85ec53ULL));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        // rejection sampling to avoid modulo bias
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t v = next_u64();
            if (v >= threshold) return v % n;
        }
    }

    /// Sample an index from an (unnormalized is not allowed) probability vector.
    int categorical(const std::vector<double>& probs) {
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;  // guard against rounding
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4] = {};
};

/// Stream purposes, so seed derivations stay collision-free across the code base.
enum Purpose : std::uint64_t {
    kEnv = 1,
    kAgent = 2,
    kEval = 3,
    kReplay = 4,
    kOracle = 5,
    kVerify = 6,
};

}  // namespace sdh::rng
