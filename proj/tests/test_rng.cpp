#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "collapse/rng.hpp"

using namespace collapse;

namespace {

// independent ten-round Philox4x32 with the published multipliers and Weyl
// constants, counter packed (stream_lo, stream_hi, block_lo, block_hi)
void philox_ref(std::uint64_t seed, std::uint64_t stream, std::uint64_t block,
                std::uint64_t out[2]) {
    std::uint32_t ctr[4] = {
        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
        static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    std::uint32_t key[2] = {static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
    for (int r = 0; r < 10; ++r) {
        std::uint64_t p0 = 0xD2511F53ull * ctr[0];
        std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
        std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
        std::uint32_t n1 = static_cast<std::uint32_t>(p1);
        std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
        std::uint32_t n3 = static_cast<std::uint32_t>(p0);
        ctr[0] = n0;
        ctr[1] = n1;
        ctr[2] = n2;
        ctr[3] = n3;
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
    }
    out[0] = (static_cast<std::uint64_t>(ctr[0]) << 32) | ctr[1];
    out[1] = (static_cast<std::uint64_t>(ctr[2]) << 32) | ctr[3];
}

}  // namespace

TEST_CASE("counter-based generator matches an independent implementation") {
    const std::uint64_t seed = 0x0123456789abcdefULL;
    const std::uint64_t stream = 42;
    RngStream rng(seed, stream);
    for (std::uint64_t block = 0; block < 8; ++block) {
        std::uint64_t ref[2];
        philox_ref(seed, stream, block, ref);
        // the stream hands out each block's two words high-index first
        CHECK(rng.next_u64() == ref[1]);
        CHECK(rng.next_u64() == ref[0]);
    }
}

TEST_CASE("same seed and stream reproduce, different streams do not") {
    RngStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
    bool same = true, diff_stream = false, diff_seed = false;
    for (int i = 0; i < 256; ++i) {
        std::uint64_t va = a.next_u64();
        same = same && va == b.next_u64();
        diff_stream = diff_stream || va != c.next_u64();
        diff_seed = diff_seed || va != d.next_u64();
    }
    CHECK(same);
    CHECK(diff_stream);
    CHECK(diff_seed);
}

TEST_CASE("uniform ranges") {
    RngStream rng(1, 0);
    double lo = 1.0, hi = 0.0, lop = 2.0;
    for (int i = 0; i < 100000; ++i) {
        double u = rng.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double v = rng.uniform_pos();
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        lop = std::min(lop, v);
    }
    CHECK(hi > 0.9999);
    CHECK(lo < 1e-4);
    CHECK(lop < 1e-4);
}

TEST_CASE("uniform moments") {
    RngStream rng(2026, 1);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        s1 += u;
        s2 += u * u;
    }
    double mean = s1 / n;
    double var = s2 / n - mean * mean;
    // sd of the mean is 1/sqrt(12 n) ~ 6.5e-4
    CHECK(std::abs(mean - 0.5) < 5.0 * (1.0 / std::sqrt(12.0 * n)));
    CHECK(std::abs(var - 1.0 / 12.0) < 5e-3);
}

TEST_CASE("gaussian moments") {
    RngStream rng(5, 9);
    const int n = 200000;
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        double g = rng.gaussian();
        s1 += g;
        s2 += g * g;
        s3 += g * g * g;
        s4 += g * g * g * g;
    }
    double mean = s1 / n;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(s3 / n) < 5.0 * std::sqrt(15.0 / n));
    CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}

TEST_CASE("below(n) covers all residues without bias") {
    RngStream rng(3, 0);
    const std::uint64_t m = 7;
    std::vector<int> counts(m, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        std::uint64_t v = rng.below(m);
        REQUIRE(v < m);
        ++counts[v];
    }
    for (std::uint64_t k = 0; k < m; ++k) {
        double p = static_cast<double>(counts[k]) / n;
        CHECK(std::abs(p - 1.0 / m) < 5.0 * std::sqrt((1.0 / m) * (1 - 1.0 / m) / n));
    }
}

TEST_CASE("policy helper selects the same stream") {
    RngStreamPolicy pol{11, 22};
    RngStream a(pol);
    RngStream b(11, 22);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
}
