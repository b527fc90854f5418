#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "collapse/fft.hpp"
#include "collapse/rng.hpp"

namespace collapse {

// Simulation units: lengths in units of the hit width a, times in 1/lambda.
// The physical suggestions (a ~ 1e-5 cm, lambda ~ 1e-16 / s) are carried as
// metadata for report conversion only; they never enter grid arithmetic.
struct SlConfig {
    double lambda_hit = 1.0;
    double width_a = 1.0;
    double length_unit_cm = 1e-5;
    double rate_unit_per_s = 1e-16;
};

// Uniform periodic 1D grid, sites x_i = i*h, i in [0, n).
struct Grid1D {
    std::size_t n_sites = 512;
    double extent = 64.0;
    double h() const { return extent / static_cast<double>(n_sites); }
    double site(std::size_t i) const { return static_cast<double>(i) * h(); }
    // displacement folded to the nearest periodic image
    double wrap(double dx) const {
        double L = extent;
        return dx - L * std::round(dx / L);
    }
};

struct LatticeWavefunction {
    int n_particles = 1;        // 1 or 2
    Grid1D grid;
    double mass = 1.0;          // per particle
    std::vector<cplx> values;   // size n (1p) or n*n row-major (2p)

    double norm2() const;       // sum |psi|^2 h^d
    void normalize();           // throws if norm is numerically degenerate
};

struct HitEvent {
    double time = 0.0;
    int particle_index = 0;
    double center = 0.0;        // grid-valued
};

struct HitDiagnostics {
    double raw_norm2 = 0.0;     // post-hit squared norm before renormalization
};

LatticeWavefunction make_gaussian_packet(const Grid1D& grid, double center,
                                         double width, double mass = 1.0);
// amp1*packet(c1) + amp2*packet(c2), normalized.
LatticeWavefunction make_two_packet_state(const Grid1D& grid, double amp1, double c1,
                                          double amp2, double c2, double width,
                                          double mass = 1.0);
// amp1*|L>|L'> + amp2*|R>|R'>: branch b puts particle 1 at centers1[b] and
// particle 2 at centers2[b].
LatticeWavefunction make_entangled_pair(const Grid1D& grid, double amp1, double amp2,
                                        const double centers1[2], const double centers2[2],
                                        double width, double mass = 1.0);

// Mass of |psi|^2 nearer (periodically) to c1 than to c2; for 2 particles the
// branch regions are quadrants around (c1,c1') vs (c2,c2').
double branch_weight(const LatticeWavefunction& psi, double c1, double c2);
double branch_weight_pair(const LatticeWavefunction& psi, const double centers1[2],
                          const double centers2[2], int branch);

// Independent Poisson stream per particle at rate lambda, merged, time-sorted.
std::vector<std::pair<double, int>> sample_hit_times(int n_particles, double lambda_hit,
                                                     double t_final, RngStreamPolicy policy);

// Hit-center mass per site: p(z_j) proportional to
// sum_x |psi(x)|^2 exp[-(x_nparticle - z_j)^2 / a^2], normalized to sum 1.
std::vector<double> hit_center_density(const LatticeWavefunction& psi, int particle,
                                       double width_a);
double sample_hit_center(const LatticeWavefunction& psi, int particle, double width_a,
                         RngStream& rng);

// Multiply by (pi a^2)^{-1/4} exp[-(x_n - z)^2/(2 a^2)] along the hit particle's
// axis, then renormalize. Throws when the post-hit norm collapses numerically.
HitDiagnostics apply_hit(LatticeWavefunction& psi, const HitEvent& event, double width_a);

// <p^2/2m> by spectral differentiation. Errors out when more than 1e-6 of the
// momentum weight sits in the top decade of the band (aliasing guard).
double kinetic_energy(const LatticeWavefunction& psi);
double energy_gain(const LatticeWavefunction& before, const LatticeWavefunction& after);

// Free evolution exp(-i p^2/(2m) t); spectral, exact for the kinetic Hamiltonian.
void evolve_free(LatticeWavefunction& psi, double t);

struct EntangledCollapseRun {
    double collapse_time = -1.0;  // first hit that drove a branch weight past 0.99
    int branch = -1;
    double selected_weight = 0.0; // branch weight right after that hit
    std::size_t n_hits = 0;
};

// |L>|L'> + |R>|R'> with weights (amp1^2, amp2^2); hits at rate lambda per
// particle until one branch weight passes 0.99 or t_final runs out.
EntangledCollapseRun run_entangled_collapse(const Grid1D& grid, double amp1, double amp2,
                                            const double centers1[2], const double centers2[2],
                                            double width, const SlConfig& config,
                                            double t_final, RngStreamPolicy policy);

}  // namespace collapse
