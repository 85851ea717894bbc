#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace cdfi {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed of replicate i under a master seed; independent of how replicates are scheduled.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate) noexcept {
    std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL * (replicate + 1));
    splitmix64(s);
    return splitmix64(s);
}

// xoshiro256++ (Blackman & Vigna), usable as a UniformRandomBitGenerator.
class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed) noexcept {
        for (auto& w : s_) w = splitmix64(seed);
    }
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on (0, 1].
    double uniform_pos() noexcept { return double(((*this)() >> 11) + 1) * 0x1.0p-53; }
    // Uniform on [0, 1).
    double uniform() noexcept { return double((*this)() >> 11) * 0x1.0p-53; }
    double exponential(double rate) noexcept { return -std::log(uniform_pos()) / rate; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

// Poisson variate; inversion for small means, PTRS (Hormann 1993) otherwise.  Written out here
// rather than std::poisson_distribution so streams are identical across standard libraries.
std::int64_t poisson(Xoshiro256pp& rng, double mean);

} // namespace cdfi
