#pragma once

#include <cstdint>
#include <cmath>

namespace cci {

// splitmix64 finalizer (Steele, Lea & Flood 2014). Used both to expand seeds
// and as the counter-mode mixer that derives independent replicate streams.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream seed for replicate r: mix(master, r) in counter mode, so replicates
// are reproducible and independently seedable in any order.
inline uint64_t derive_stream(uint64_t master, uint64_t counter) {
    uint64_t s = master ^ (0xD1B54A32D192ED03ULL * (counter + 1));
    return splitmix64(s);
}

// xoshiro256++ (Blackman & Vigna 2019), seeded through splitmix64.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
        have_spare_ = false;
        spare_ = 0.0;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on (0,1): top 53 bits, offset so 0 is excluded.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the Marsaglia polar method (exact transform of
    // uniforms; no library distribution involved, so streams are stable
    // across standard libraries).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
    bool have_spare_;
    double spare_;
};

} // namespace cci
