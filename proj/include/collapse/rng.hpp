#pragma once
#include <cstdint>

namespace collapse {

struct RngStreamPolicy {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
};

// Philox4x32-10 counter-based generator. The map (master_seed, stream_id,
// block_index) -> 128-bit block is a pure function, so every stream is
// reproducible bit-for-bit regardless of scheduling or worker count.
// Gaussians use Box-Muller (no rejection), keeping draw counts deterministic.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id);
    explicit RngStream(RngStreamPolicy p) : RngStream(p.master_seed, p.stream_id) {}

    std::uint64_t next_u64();
    double uniform();              // [0, 1)
    double uniform_pos();          // (0, 1]
    double gaussian();             // N(0, 1)
    std::uint64_t below(std::uint64_t n);  // uniform integer in [0, n)

private:
    void refill();
    std::uint32_t key_[2];
    std::uint32_t stream_[2];
    std::uint64_t block_index_ = 0;
    std::uint64_t out_[2];
    int avail_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline RngStream make_stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    return RngStream(master_seed, stream_id);
}

}  // namespace collapse
