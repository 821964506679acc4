#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "swarmwatch/rng.hpp"

using swarmwatch::Rng;

TEST_CASE("same seed, same stream; fork diverges") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());

    Rng c(42);
    auto fork = c.fork();
    CHECK(fork.next() != c.next());
}

TEST_CASE("below stays in range and is roughly uniform") {
    Rng rng(1);
    std::uint64_t counts[10] = {};
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) {
        const auto v = rng.below(10);
        REQUIRE(v < 10);
        ++counts[v];
    }
    for (const auto c : counts) {
        CHECK(c > kDraws / 10 * 0.9);
        CHECK(c < kDraws / 10 * 1.1);
    }
}

TEST_CASE("range is inclusive at both ends") {
    Rng rng(2);
    bool lo = false, hi = false;
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.range(-3, 3);
        REQUIRE(v >= -3);
        REQUIRE(v <= 3);
        lo |= v == -3;
        hi |= v == 3;
    }
    CHECK(lo);
    CHECK(hi);
}

TEST_CASE("unit stays in [0, 1)") {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const auto u = rng.unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("exponential mean") {
    Rng rng(4);
    double sum = 0;
    constexpr int kDraws = 200000;
    for (int i = 0; i < kDraws; ++i) sum += rng.exponential(600.0);
    CHECK(sum / kDraws == doctest::Approx(600.0).epsilon(0.02));
}

TEST_CASE("gaussian moments") {
    Rng rng(5);
    double sum = 0, sq = 0;
    constexpr int kDraws = 200000;
    for (int i = 0; i < kDraws; ++i) {
        const auto g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / kDraws;
    const double var = sq / kDraws - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("poisson matches its mean and variance on both sides of the cutover") {
    Rng rng(6);
    for (const double mean : {3.0, 45.0, 61.0, 2000.0}) {
        double sum = 0, sq = 0;
        constexpr int kDraws = 50000;
        for (int i = 0; i < kDraws; ++i) {
            const auto k = rng.poisson(mean);
            REQUIRE(k >= 0);
            sum += k;
            sq += double(k) * k;
        }
        const double m = sum / kDraws;
        const double var = sq / kDraws - m * m;
        CHECK(m == doctest::Approx(mean).epsilon(0.05));
        CHECK(var == doctest::Approx(mean).epsilon(0.10));
    }
}

TEST_CASE("shuffle permutes without loss") {
    Rng rng(7);
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i;
    auto shuffled = v;
    rng.shuffle(shuffled);
    CHECK(shuffled != v);  // astronomically unlikely to be identity
    std::sort(shuffled.begin(), shuffled.end());
    CHECK(shuffled == v);
}

TEST_CASE("sample_indices draws k distinct in-range values") {
    Rng rng(8);
    // Dense branch (k*3 >= n) and sparse branch.
    for (const auto& [n, k] : {std::pair<std::uint32_t, std::uint32_t>{100, 60},
                               {100000, 200},
                               {5, 5},
                               {5, 9}}) {
        const auto idx = rng.sample_indices(n, k);
        CHECK(idx.size() == std::min(n, k));
        std::set<std::uint32_t> uniq(idx.begin(), idx.end());
        CHECK(uniq.size() == idx.size());
        for (const auto i : idx) CHECK(i < n);
    }
}

TEST_CASE("sample_indices covers the space across draws") {
    Rng rng(9);
    std::set<std::uint32_t> seen;
    for (int r = 0; r < 200; ++r) {
        for (const auto i : rng.sample_indices(50, 10)) seen.insert(i);
    }
    CHECK(seen.size() == 50);
}
