#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "collapse/ensemble.hpp"
#include "collapse/noise.hpp"
#include "collapse/rng.hpp"

namespace collapse {

// Amplitudes in polar form: c_n = r_n e^{i phi_n}, x_n = r_n^2.
struct AmplitudeState {
    std::vector<double> r;
    std::vector<double> phi;

    double x(std::size_t n) const { return r[n] * r[n]; }
    std::size_t size() const { return r.size(); }
};

struct CollapseConfig {
    std::vector<double> omega;   // energy diagonal omega_n
    std::vector<cplx> alpha;     // N x N Hermitian coupling, row-major
    double sigma = 1.0;
    unsigned r_exponent = 1;
    double dt = 1e-3;
    std::size_t n_steps = 0;

    std::size_t dim() const { return omega.size(); }
};

struct AmplitudeTrajectory {
    double dt = 0.0;
    std::size_t record_stride = 1;
    std::vector<double> times;
    std::vector<AmplitudeState> states;
    double norm_drift = 0.0;  // cumulative |sum x - 1| absorbed by renormalization
    bool aborted = false;
    std::size_t abort_step = 0;
    std::string abort_reason;
};

struct CollapseOutcome {
    int outcome_index = -1;      // -1 when no threshold crossing
    double collapse_time = -1.0; // first time max_n x_n >= 1 - epsilon
    std::vector<double> final_x;

    bool collapsed() const { return outcome_index >= 0; }
};

constexpr double kPhaseFreezeFloor = 1e-12;
constexpr double kCollapseEpsilon = 1e-3;

// Random-phase nonlinear equation: deterministic RK4 per draw of the initial
// phases (uniform on [0, 2pi) per state); randomness enters only there.
AmplitudeTrajectory evolve_random_phase(const CollapseConfig& config,
                                        const std::vector<double>& x0,
                                        RngStreamPolicy phase_policy,
                                        std::size_t record_stride = 1);

// Stochastic amplitude equation driven by a Hermitian white-noise matrix.
// One Euler-Maruyama step per noise increment, taken in polar amplitude
// coordinates: the population update dx_n = 2 r_n sum_m r_m Im(alpha_nm
// e^{i(phi_n - phi_m)} dB_nm) carries zero Ito drift and vanishes where any
// amplitude does, which is what keeps basis states absorbing; a Cartesian
// step plus renormalization would instead pick up a spurious inward drift
// from the |dc_n|^2 term. Phases evolve as dphi_n = -omega_n dt - sum_m
// (r_m/r_n) Re(...) and freeze below the r_n floor.
AmplitudeTrajectory evolve_sde_amplitudes(const CollapseConfig& config,
                                          const std::vector<double>& x0,
                                          const HermitianNoisePath& noise,
                                          std::size_t record_stride = 1);

// Same scheme, drawing noise on the fly from the stream (identical draw
// order to sample_hermitian_noise, so results match the materialized path).
AmplitudeTrajectory evolve_sde_amplitudes(const CollapseConfig& config,
                                          const std::vector<double>& x0,
                                          RngStreamPolicy noise_policy,
                                          std::size_t record_stride = 1);

CollapseOutcome detect_outcome(const AmplitudeTrajectory& traj,
                               double epsilon = kCollapseEpsilon);

struct CollapseConditionsReport {
    bool simplex_ok = false;
    double max_simplex_violation = 0.0;
    std::vector<double> martingale_drift;    // per state: max_t |E[x_n](t) - x_n(0)|
    std::vector<double> martingale_stderr;   // stderr at the maximizing time
    std::vector<double> cross_moment_final;  // per pair (lexicographic)
    std::vector<double> cross_moment_final_stderr;
};

CollapseConditionsReport check_collapse_conditions(const EnsembleStats& stats);

}  // namespace collapse
