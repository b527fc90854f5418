#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "collapse/rng.hpp"
#include "collapse/sl_hits.hpp"

namespace collapse {

// Linear non-unitary evolution of amplitudes on the eigenbasis of a single
// operator A: each step multiplies c_n by exp[-(1/4λ) dt (w - 2λ a_n)^2].
// Weights are carried in log space; the normalized state never under/overflows.
struct CommutingCslModel {
    std::vector<double> eigenvalues;  // a_n
    double lambda = 1.0;
    double dt = 1e-3;
    std::size_t n_steps = 1000;
};

enum class CslScheme {
    Sequential,  // w_k = 2λ<A>_t + sqrt(λ/dt)·ξ (norm-weighted measure, O(dt) step bias)
    Mixture,     // pick n with prob |c_n(0)|², then w_k = 2λ a_n + sqrt(λ/dt)·ξ
};                // (exact finite-dt sampler of the same measure when H = 0)

struct CslNoiseRecord {
    double dt = 0.0;
    std::size_t n_modes = 1;          // one w per operator (or per site) per step
    std::vector<double> w;            // [step * n_modes + mode]
    std::vector<double> raw_log_weight;  // filled by evolve: log Gaussian factor per state
};

struct CslEvolveResult {
    std::vector<cplx> normalized;     // state at t, unit norm
    std::vector<double> log_weight;   // per-state exponent l_n; unnormalized c_n = c_n(0) e^{l_n}
    double log_norm2 = 0.0;           // log <psi,t|psi,t> of the unnormalized state
    std::vector<double> x;            // |normalized|^2
};

CslEvolveResult evolve_csl_commuting(const CommutingCslModel& model,
                                     const std::vector<cplx>& c0, CslNoiseRecord& noise);

// Noise under the norm-weighted (physical) measure.
CslNoiseRecord sample_physical_noise(const CommutingCslModel& model,
                                     const std::vector<cplx>& c0, RngStreamPolicy policy,
                                     CslScheme scheme = CslScheme::Sequential);
// Noise under the raw Gaussian measure (zero drift); the mean of the resulting
// norm² importance weights is 1, which is the normalization check.
CslNoiseRecord sample_raw_noise(const CommutingCslModel& model, RngStreamPolicy policy);
// Importance weight of a raw-sampled path: the evolved norm² times the
// density ratio between the flat path measure and the sampling Gaussian,
// which reduces to sum_n x_n(0) exp[ sum_k dt (2 a_n w_k - 2 λ a_n²) ].
double raw_importance_weight(const CommutingCslModel& model, const std::vector<cplx>& c0,
                             const CslNoiseRecord& noise);

struct AsymptoticReport {
    std::vector<double> outcome_frequency;  // argmax x_n per run
    std::vector<double> tail_weights;       // 1 - max x_n per run
    double median_tail = 0.0;
};
AsymptoticReport asymptotic_collapse_check(const std::vector<CslEvolveResult>& runs,
                                           std::size_t dim);

// rho_nm(t) = c_n c_m* exp[-(λ t / 2)(a_n - a_m)^2]
Eigen::MatrixXcd density_matrix_analytic(const CommutingCslModel& model,
                                         const std::vector<cplx>& c0, double t);

struct DensityMatrixStats {
    Eigen::MatrixXcd mean;       // average of normalized projectors
    Eigen::MatrixXd stderr_re;   // element-wise standard errors
    Eigen::MatrixXd stderr_im;
    std::size_t n_samples = 0;
};
DensityMatrixStats density_matrix_ensemble(const std::vector<CslEvolveResult>& runs,
                                           std::size_t dim);

// --- general commuting operators with a Hamiltonian (Strang splitting) ---

struct CslTrajectory {
    std::vector<double> times;
    std::vector<std::vector<cplx>> states;  // normalized
    std::vector<double> log_norm2;          // cumulative, of the unnormalized state
    std::vector<std::vector<double>> x;     // populations per recorded time
};

using HamiltonianFn = std::function<Eigen::MatrixXcd(double)>;

// Half-step unitary, full-step weight with all operators, half-step unitary.
// The operators are diagonals on the working basis (mutually commuting).
CslTrajectory evolve_csl_general(const std::vector<Eigen::VectorXd>& operators,
                                 const HamiltonianFn& hamiltonian,
                                 const std::vector<cplx>& c0, double lambda,
                                 const CslNoiseRecord& noise,
                                 std::size_t record_stride = 1);
// Same dynamics with physical-measure noise drawn on the fly
// (w_k = 2λ<A_k>_t + sqrt(λ/dt)·ξ, expectation in the current state).
CslTrajectory run_csl_general_physical(const std::vector<Eigen::VectorXd>& operators,
                                       const HamiltonianFn& hamiltonian,
                                       const std::vector<cplx>& c0, double lambda,
                                       double dt, std::size_t n_steps,
                                       RngStreamPolicy policy,
                                       std::size_t record_stride = 1);

// --- lattice mass-density variant (1D analogue, prefactor (pi a^2)^{-1/4}) ---

struct LatticeCslModel {
    Grid1D grid;
    double smear_width = 1.0;   // a; requires a >= 2h and extent >= 10a
    double mass_unit = 1.0;     // m0
    double mass = 1.0;          // particle mass
    double lambda = 1.0;
    double dt = 1e-2;
    std::size_t n_steps = 100;
    bool use_kinetic = false;   // H = p^2/2m when true, else H = 0
    double trunc_radius = 5.0;  // Gaussian support cut, units of a
};

// Column z holds the smeared profile A_x(z) = (m/m0)(pi a^2)^{-1/4}
// exp[-(x-z)^2/(2a^2)] truncated at trunc_radius·a (periodic min-image).
Eigen::MatrixXd smeared_mass_profile(const LatticeCslModel& model);

// Pairwise decay rates Gamma(z,z') = (λ/2) h Σ_x [A_x(z) - A_x(z')]^2.
Eigen::MatrixXd lattice_decay_rates(const LatticeCslModel& model);

struct LatticeCslTrajectory {
    std::vector<double> times;
    std::vector<std::vector<cplx>> states;  // normalized site amplitudes
    std::vector<double> log_norm2;
};

LatticeCslTrajectory evolve_csl_lattice(const LatticeCslModel& model,
                                        const std::vector<cplx>& psi0,
                                        RngStreamPolicy policy,
                                        CslScheme scheme = CslScheme::Mixture,
                                        std::size_t record_stride = 1);

// Deterministic propagation of rho under the same model (<= 256 sites):
// d rho / dt = -i[H, rho] - Gamma ∘ rho, with Gamma from lattice_decay_rates.
// H = 0 uses the exact element-wise decay; otherwise RK4 with n_sub substeps.
Eigen::MatrixXcd density_matrix_evolution_lattice(const LatticeCslModel& model,
                                                  const Eigen::MatrixXcd& rho0, double t,
                                                  std::size_t n_sub = 200);

// Single-step Gauss-Hermite reconstruction of the weight operator as a
// superposition of unitaries; returns max_n |direct - quadrature|.
double unitary_representation_check(const CommutingCslModel& model, double dt, double w,
                                    std::size_t quadrature_order);

// Gauss-Hermite nodes/weights for ∫ e^{-x^2} f(x) dx (Golub-Welsch).
void gauss_hermite(std::size_t order, std::vector<double>& nodes,
                   std::vector<double>& weights);

}  // namespace collapse
