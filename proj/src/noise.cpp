#include "collapse/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace collapse {

NoisePath sample_noise_path(std::size_t N, double dt, std::size_t n_steps, double sigma,
                            RngStreamPolicy policy) {
    if (dt <= 0.0) throw std::invalid_argument("sample_noise_path: dt must be > 0");
    if (sigma < 0.0) throw std::invalid_argument("sample_noise_path: sigma must be >= 0");
    if (n_steps < 1) throw std::invalid_argument("sample_noise_path: n_steps must be >= 1");
    if (N < 1) throw std::invalid_argument("sample_noise_path: N must be >= 1");

    NoisePath path;
    path.dt = dt;
    path.n_steps = n_steps;
    path.dim = N;
    path.sigma = sigma;
    path.increments.resize(n_steps * N);

    RngStream rng(policy);
    double scale = sigma * std::sqrt(dt);
    for (auto& v : path.increments) v = scale * rng.gaussian();
    return path;
}

void draw_hermitian_step(RngStream& rng, std::size_t N, double dt, double sigma,
                         std::vector<cplx>& out) {
    out.resize(N * N);
    double diag_scale = sigma * std::sqrt(dt);
    double off_scale = sigma * std::sqrt(dt / 2.0);
    for (std::size_t n = 0; n < N; ++n) {
        out[n * N + n] = cplx(diag_scale * rng.gaussian(), 0.0);
        for (std::size_t m = n + 1; m < N; ++m) {
            cplx v(off_scale * rng.gaussian(), off_scale * rng.gaussian());
            out[n * N + m] = v;
            out[m * N + n] = std::conj(v);
        }
    }
}

HermitianNoisePath sample_hermitian_noise(std::size_t N, double dt, std::size_t n_steps,
                                          double sigma, RngStreamPolicy policy) {
    if (N < 2) throw std::invalid_argument("sample_hermitian_noise: N must be >= 2");
    if (dt <= 0.0) throw std::invalid_argument("sample_hermitian_noise: dt must be > 0");
    if (sigma < 0.0) throw std::invalid_argument("sample_hermitian_noise: sigma must be >= 0");
    if (n_steps < 1) throw std::invalid_argument("sample_hermitian_noise: n_steps must be >= 1");

    HermitianNoisePath path;
    path.dt = dt;
    path.n_steps = n_steps;
    path.dim = N;
    path.sigma = sigma;
    path.increments.resize(n_steps * N * N);

    RngStream rng(policy);
    std::vector<cplx> step;
    for (std::size_t k = 0; k < n_steps; ++k) {
        draw_hermitian_step(rng, N, dt, sigma, step);
        std::copy(step.begin(), step.end(), path.increments.begin() + k * N * N);
    }
    return path;
}

}  // namespace collapse
