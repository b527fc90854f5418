#pragma once

#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "collapse/rng.hpp"

namespace collapse {

using rational = boost::multiprecision::cpp_rational;

enum class StakeRule { Constant, Shrinking };

// Fair-coin wealth exchange absorbing at 0 and 1. Wealth is held as integer
// quanta (total = quanta_per_stake / delta) so conservation and absorption
// are exact. The constant rule stakes quanta_per_stake quanta per toss; the
// shrinking rule needs quanta_per_stake >> 1, otherwise rounding to whole
// quanta collapses it back onto the constant rule.
struct GameConfig {
    std::vector<double> fractions;     // initial wealth fractions, sum 1
    double delta = 0.01;               // nominal stake as fraction of total wealth
    std::int64_t quanta_per_stake = 1; // wealth lattice resolution per stake
    StakeRule stake_rule = StakeRule::Constant;
    double shrink_power = 1.0;         // stake ∝ min(x, 1-x)^power, floor 1 quantum
    std::uint64_t max_tosses = 100000000ULL;
    bool record_trace = false;
    std::uint64_t trace_stride = 1;    // tosses between trace samples
};

struct GameResult {
    int winner = -1;                   // -1 when the toss cap was hit
    std::uint64_t n_tosses = 0;
    bool finished = false;
    std::vector<std::vector<double>> wealth_trace;  // fractions per sample
};

// Q(k of K quanta): chance of ending with everything, from the difference
// system Q_j = (Q_{j-1} + Q_{j+1})/2, Q_0 = 0, Q_K = 1, solved exactly.
rational win_probability_exact(std::int64_t k, std::int64_t total_quanta);
// Same, from fractions; x and 1/delta must be whole numbers of quanta.
rational win_probability_exact(double x, double delta);

// Expected toss count from k quanta under constant unit stakes, exact:
// D_j = 1 + (D_{j-1} + D_{j+1})/2, D_0 = D_K = 0.
rational expected_duration_exact(std::int64_t k, std::int64_t total_quanta);

// Stake fraction for the shrinking schedule, normalized to delta0 at x = 1/2.
double stake_schedule_shrinking(double x, double delta0, double power);

// Two-player game; fractions must have size 2.
GameResult play_game(const GameConfig& config, RngStreamPolicy policy);
// k >= 2 players; a uniformly random ordered pair of active players per toss.
GameResult play_multiplayer(const GameConfig& config, RngStreamPolicy policy);

}  // namespace collapse
