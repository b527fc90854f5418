#pragma once
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "collapse/noise.hpp"

namespace collapse {

// dx_n = G_n(x, t) dt + sum_m F_nm(x, t) dB_m  (Ito)
struct SdeSystem {
    std::size_t dimension = 0;
    std::function<void(const std::vector<double>& x, double t, std::vector<double>& G)> drift;
    std::function<void(const std::vector<double>& x, double t, std::vector<double>& F)>
        diffusion;  // row-major N x N
};

struct Trajectory {
    double dt = 0.0;
    std::vector<std::vector<double>> states;  // states[k] = x(k * dt), k = 0..n_steps
    bool aborted = false;
    std::size_t abort_step = 0;
    std::string abort_reason;
};

// Euler-Maruyama with drift/diffusion evaluated at the step's start.
// Non-finite values abort the trajectory with a diagnostic instead of clamping.
Trajectory integrate_ito(const SdeSystem& system, const std::vector<double>& x0,
                         const NoisePath& noise);

}  // namespace collapse
