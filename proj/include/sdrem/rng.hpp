#pragma once

#include <cstdint>
#include <limits>

namespace sdrem {

/// splitmix64 finalizer; used for seeding and substream key mixing.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Independent seed derived from (seed, salt).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept
{
    std::uint64_t sm = seed ^ (salt * 0x9FB21C651E98DF25ULL);
    splitmix64(sm);
    return splitmix64(sm);
}

/// xoshiro256** engine. Satisfies UniformRandomBitGenerator so it can drive
/// the <random> distributions.
class Rng {
    __extension__ using uint128 = unsigned __int128;

public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept
    {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0, 1); never returns 0 so log(u) is finite.
    double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept
    {
        // Lemire's multiply-shift with rejection.
        uint128 m = static_cast<uint128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<uint128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    friend bool operator==(const Rng& a, const Rng& b) noexcept
    {
        for (int i = 0; i < 4; ++i)
            if (a.s_[i] != b.s_[i]) return false;
        return true;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
};

/// Phase tags for substream derivation. Values are part of the reproducibility
/// contract; do not renumber.
enum class Phase : std::uint64_t {
    init = 1,
    backward = 2,
    feature_hypers = 3,
    T = 4,
    alpha = 5,
    B_hypers = 6,
    B = 7,
    pi = 8,
    X = 9,
    Z = 10,
    Lambda = 11,
    M = 12,
    split = 13,
    synth = 14,
    geweke = 15,
};

/// A seed from which independent, reproducible substreams are derived by
/// (iteration, phase, index) keys. Identical keys always give identical draws,
/// so results do not depend on how work is scheduled across threads.
struct RngStream {
    std::uint64_t seed = 0;

    Rng substream(std::uint64_t iteration, Phase phase, std::uint64_t index = 0) const noexcept
    {
        std::uint64_t sm = seed;
        std::uint64_t key = splitmix64(sm);
        sm = key ^ (iteration * 0xD1B54A32D192ED03ULL);
        key = splitmix64(sm);
        sm = key ^ (static_cast<std::uint64_t>(phase) * 0xABC98388FB8FAC03ULL);
        key = splitmix64(sm);
        sm = key ^ (index * 0x8CB92BA72F3D8DD7ULL);
        return Rng(splitmix64(sm));
    }
};

} // namespace sdrem
