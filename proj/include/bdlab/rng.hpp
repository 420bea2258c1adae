#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bdlab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from a master seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    return splitmix64(s);
}

// FNV-1a over a token-id sequence; the context-keyed data rules hash with this
// so that datasets are stable across platforms and standard-library versions.
inline std::uint64_t fnv1a64(const std::vector<int>& ids) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int id : ids) {
        auto u = static_cast<std::uint32_t>(id);
        for (int b = 0; b < 4; ++b) {
            h ^= (u >> (8 * b)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// Seeded generator with hand-rolled distributions. std:: distributions are
// implementation-defined, so everything downstream of a seed goes through
// this type to keep byte-level reproducibility under our control.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], inclusive, via rejection sampling.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    double next_normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1, u2;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return mean + stddev * radius * std::cos(angle);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(next_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace bdlab
