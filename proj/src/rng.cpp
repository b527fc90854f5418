#include "collapse/rng.hpp"

#include <cmath>

namespace collapse {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1

inline void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    std::uint32_t c1 = ctr[1], c3 = ctr[3];
    ctr[0] = hi1 ^ c1 ^ key[0];
    ctr[1] = lo1;
    ctr[2] = hi0 ^ c3 ^ key[1];
    ctr[3] = lo0;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id) {
    key_[0] = static_cast<std::uint32_t>(master_seed);
    key_[1] = static_cast<std::uint32_t>(master_seed >> 32);
    stream_[0] = static_cast<std::uint32_t>(stream_id);
    stream_[1] = static_cast<std::uint32_t>(stream_id >> 32);
}

void RngStream::refill() {
    std::uint32_t ctr[4] = {
        stream_[0], stream_[1],
        static_cast<std::uint32_t>(block_index_),
        static_cast<std::uint32_t>(block_index_ >> 32),
    };
    std::uint32_t key[2] = {key_[0], key_[1]};
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, key);
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    out_[0] = (static_cast<std::uint64_t>(ctr[0]) << 32) | ctr[1];
    out_[1] = (static_cast<std::uint64_t>(ctr[2]) << 32) | ctr[3];
    avail_ = 2;
    ++block_index_;
}

std::uint64_t RngStream::next_u64() {
    if (avail_ == 0) refill();
    return out_[--avail_];
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double phi = 2.0 * M_PI * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    // rejection keeps the distribution exact for any n
    std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

}  // namespace collapse
