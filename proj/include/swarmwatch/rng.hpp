#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace swarmwatch {

/// xoshiro256** seeded via splitmix64. The generator and every derived
/// draw below are pinned here so simulation runs stay bit-reproducible
/// across standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    std::uint64_t next() {
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

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        std::uint64_t x = next();
        __uint128_t m = __uint128_t(x) * n;
        auto lo = std::uint64_t(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                x = next();
                m = __uint128_t(x) * n;
                lo = std::uint64_t(m);
            }
        }
        return std::uint64_t(m >> 64);
    }

    std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive bounds
        return lo + std::int64_t(below(std::uint64_t(hi - lo + 1)));
    }

    double unit() {  // [0, 1)
        return double(next() >> 11) * 0x1.0p-53;
    }

    double exponential(double mean) {
        double u;
        do { u = unit(); } while (u <= 0.0);
        return -mean * std::log(u);
    }

    double gaussian() {  // Box-Muller, one value per call
        double u;
        do { u = unit(); } while (u <= 0.0);
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * unit());
    }

    /// Knuth multiplication below the underflow range, normal approximation
    /// above it (exp(-mean) hits denormals long before the means we use).
    int poisson(double mean) {
        if (mean > 60.0) {
            const double v = mean + std::sqrt(mean) * gaussian();
            return v < 0.0 ? 0 : int(v + 0.5);
        }
        const double limit = std::exp(-mean);
        double p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= unit();
        } while (p > limit);
        return k - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    /// k distinct indices from [0, n), order unspecified but deterministic.
    std::vector<std::uint32_t> sample_indices(std::uint32_t n, std::uint32_t k);

    Rng fork() { return Rng(next()); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
};

inline std::vector<std::uint32_t> Rng::sample_indices(std::uint32_t n, std::uint32_t k) {
    if (k >= n) {
        std::vector<std::uint32_t> all(n);
        for (std::uint32_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    std::vector<std::uint32_t> out;
    out.reserve(k);
    if (std::uint64_t(k) * 3 >= n) {
        // Dense case: partial Fisher-Yates over an index table.
        std::vector<std::uint32_t> idx(n);
        for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
        for (std::uint32_t i = 0; i < k; ++i) {
            const auto j = i + std::uint32_t(below(n - i));
            std::swap(idx[i], idx[j]);
            out.push_back(idx[i]);
        }
        return out;
    }
    // Sparse case: Floyd's algorithm.
    std::vector<bool> taken(n, false);
    for (std::uint32_t i = n - k; i < n; ++i) {
        auto j = std::uint32_t(below(i + 1));
        if (taken[j]) j = i;
        taken[j] = true;
        out.push_back(j);
    }
    return out;
}

} // namespace swarmwatch
