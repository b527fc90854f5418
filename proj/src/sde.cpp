#include "collapse/sde.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace collapse {

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

Trajectory integrate_ito(const SdeSystem& system, const std::vector<double>& x0,
                         const NoisePath& noise) {
    const std::size_t N = system.dimension;
    if (x0.size() != N)
        throw std::invalid_argument("integrate_ito: x0 dimension mismatch");
    if (noise.dim != N)
        throw std::invalid_argument("integrate_ito: noise dimension mismatch");

    Trajectory traj;
    traj.dt = noise.dt;
    traj.states.reserve(noise.n_steps + 1);
    traj.states.push_back(x0);

    std::vector<double> x = x0;
    std::vector<double> G(N), F(N * N), xn(N);
    for (std::size_t k = 0; k < noise.n_steps; ++k) {
        double t = static_cast<double>(k) * noise.dt;
        system.drift(x, t, G);
        system.diffusion(x, t, F);
        for (std::size_t n = 0; n < N; ++n) {
            double dx = G[n] * noise.dt;
            for (std::size_t m = 0; m < N; ++m) dx += F[n * N + m] * noise.db(k, m);
            xn[n] = x[n] + dx;
        }
        if (!all_finite(G) || !all_finite(F) || !all_finite(xn)) {
            traj.aborted = true;
            traj.abort_step = k;
            std::ostringstream os;
            os << "non-finite value at step " << k << ", state:";
            for (double v : x) os << ' ' << v;
            traj.abort_reason = os.str();
            return traj;
        }
        x = xn;
        traj.states.push_back(x);
    }
    return traj;
}

}  // namespace collapse
