#pragma once
#include <complex>
#include <cstddef>
#include <vector>

#include "collapse/rng.hpp"

namespace collapse {

using cplx = std::complex<double>;

// Real Wiener increments dB_m(t), m = 1..N: mean 0, variance sigma^2 dt,
// independent across steps and components.
struct NoisePath {
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::size_t dim = 0;
    double sigma = 0.0;
    std::vector<double> increments;  // [step * dim + m]

    double db(std::size_t step, std::size_t m) const { return increments[step * dim + m]; }
};

// Hermitian white-noise increments dB_nm with E[dB_mn conj(dB_rs)] = sigma^2 d_mr d_ns dt.
// Realization: diagonal real N(0, sigma^2 dt); off-diagonal complex with
// Re and Im each N(0, sigma^2 dt / 2); lower triangle is the conjugate.
struct HermitianNoisePath {
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::size_t dim = 0;
    double sigma = 0.0;
    std::vector<cplx> increments;  // [step * dim * dim + n * dim + m]

    cplx db(std::size_t step, std::size_t n, std::size_t m) const {
        return increments[(step * dim + n) * dim + m];
    }
};

NoisePath sample_noise_path(std::size_t N, double dt, std::size_t n_steps, double sigma,
                            RngStreamPolicy policy);

HermitianNoisePath sample_hermitian_noise(std::size_t N, double dt, std::size_t n_steps,
                                          double sigma, RngStreamPolicy policy);

// Single-step in-place draw used by the trajectory loops (same distribution
// as one HermitianNoisePath step, without materializing the whole path).
void draw_hermitian_step(RngStream& rng, std::size_t N, double dt, double sigma,
                         std::vector<cplx>& out);

}  // namespace collapse
