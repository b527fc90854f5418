#include "collapse/discrete_collapse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace collapse {

namespace {

void validate_config(const CollapseConfig& cfg, const std::vector<double>& x0) {
    const std::size_t N = cfg.dim();
    if (N < 1) throw std::invalid_argument("collapse config: empty omega");
    if (cfg.alpha.size() != N * N)
        throw std::invalid_argument("collapse config: alpha must be N x N");
    if (cfg.r_exponent < 1)
        throw std::invalid_argument("collapse config: r_exponent must be >= 1");
    if (cfg.dt <= 0.0) throw std::invalid_argument("collapse config: dt must be > 0");
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < N; ++m) {
            cplx d = cfg.alpha[n * N + m] - std::conj(cfg.alpha[m * N + n]);
            if (std::abs(d) > 1e-12)
                throw std::invalid_argument("collapse config: alpha must be Hermitian");
        }
    if (x0.size() != N) throw std::invalid_argument("collapse: x0 dimension mismatch");
    double s = 0.0;
    for (double v : x0) {
        if (v < 0.0 || v > 1.0)
            throw std::invalid_argument("collapse: x0 components must be in [0,1]");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("collapse: x0 must lie on the simplex");
}

void record_state(AmplitudeTrajectory& traj, double t, const std::vector<double>& r,
                  const std::vector<double>& phi) {
    traj.times.push_back(t);
    traj.states.push_back({r, phi});
}

// (c_n*)^{-1}(c_n)^r = r_n^{r-1} e^{i(r+1) phi_n}; pure phase at r=1.
cplx polar_prefactor(double r, double phi, unsigned rexp) {
    double mag = 1.0;
    for (unsigned i = 1; i < rexp; ++i) mag *= r;
    double ang = (rexp + 1) * phi;
    return mag * cplx(std::cos(ang), std::sin(ang));
}

}  // namespace

AmplitudeTrajectory evolve_random_phase(const CollapseConfig& config,
                                        const std::vector<double>& x0,
                                        RngStreamPolicy phase_policy,
                                        std::size_t record_stride) {
    validate_config(config, x0);
    const std::size_t N = config.dim();
    const unsigned rexp = config.r_exponent;
    const double dt = config.dt;
    if (record_stride < 1) record_stride = 1;

    RngStream rng(phase_policy);
    std::vector<cplx> c(N);
    std::vector<double> frozen_phi(N);
    for (std::size_t n = 0; n < N; ++n) {
        double phi = 2.0 * M_PI * rng.uniform();
        frozen_phi[n] = phi;
        c[n] = std::sqrt(x0[n]) * cplx(std::cos(phi), std::sin(phi));
    }

    AmplitudeTrajectory traj;
    traj.dt = dt;
    traj.record_stride = record_stride;

    auto deriv = [&](const std::vector<cplx>& cc, std::vector<cplx>& dc) {
        for (std::size_t n = 0; n < N; ++n) {
            cplx coupling(0.0, 0.0);
            for (std::size_t m = 0; m < N; ++m) {
                cplx cm_bar_r(1.0, 0.0);
                cplx cmb = std::conj(cc[m]);
                for (unsigned i = 0; i < rexp; ++i) cm_bar_r *= cmb;
                coupling += config.alpha[n * N + m] * cm_bar_r;
            }
            double rn = std::abs(cc[n]);
            double phin = rn < kPhaseFreezeFloor ? frozen_phi[n] : std::arg(cc[n]);
            cplx pre = polar_prefactor(rn, phin, rexp);
            dc[n] = cplx(0.0, -1.0) * (config.omega[n] * cc[n] + pre * coupling);
        }
    };

    std::vector<double> r(N), phi(N);
    auto store_polar = [&]() {
        for (std::size_t n = 0; n < N; ++n) {
            r[n] = std::abs(c[n]);
            phi[n] = r[n] < kPhaseFreezeFloor ? frozen_phi[n] : std::arg(c[n]);
        }
    };
    store_polar();
    record_state(traj, 0.0, r, phi);

    std::vector<cplx> k1(N), k2(N), k3(N), k4(N), tmp(N);
    for (std::size_t step = 0; step < config.n_steps; ++step) {
        deriv(c, k1);
        for (std::size_t n = 0; n < N; ++n) tmp[n] = c[n] + 0.5 * dt * k1[n];
        deriv(tmp, k2);
        for (std::size_t n = 0; n < N; ++n) tmp[n] = c[n] + 0.5 * dt * k2[n];
        deriv(tmp, k3);
        for (std::size_t n = 0; n < N; ++n) tmp[n] = c[n] + dt * k3[n];
        deriv(tmp, k4);
        double s = 0.0;
        bool finite = true;
        for (std::size_t n = 0; n < N; ++n) {
            c[n] += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
            if (!std::isfinite(c[n].real()) || !std::isfinite(c[n].imag())) finite = false;
            s += std::norm(c[n]);
        }
        if (!finite || s <= 0.0) {
            traj.aborted = true;
            traj.abort_step = step;
            traj.abort_reason = "non-finite amplitude";
            return traj;
        }
        traj.norm_drift += std::abs(s - 1.0);
        double inv = 1.0 / std::sqrt(s);
        for (std::size_t n = 0; n < N; ++n) {
            c[n] *= inv;
            if (std::abs(c[n]) >= kPhaseFreezeFloor) frozen_phi[n] = std::arg(c[n]);
        }
        if ((step + 1) % record_stride == 0 || step + 1 == config.n_steps) {
            store_polar();
            record_state(traj, (step + 1) * dt, r, phi);
        }
    }
    return traj;
}

namespace {

AmplitudeTrajectory evolve_sde_impl(const CollapseConfig& config,
                                    const std::vector<double>& x0,
                                    const HermitianNoisePath* path, RngStream* rng,
                                    std::size_t record_stride) {
    validate_config(config, x0);
    if (config.r_exponent != 1)
        throw std::invalid_argument("evolve_sde_amplitudes: r_exponent must be 1");
    const std::size_t N = config.dim();
    const double dt = config.dt;
    if (record_stride < 1) record_stride = 1;

    std::vector<double> x = x0, r(N), phi(N, 0.0);
    for (std::size_t n = 0; n < N; ++n) r[n] = std::sqrt(x[n]);

    AmplitudeTrajectory traj;
    traj.dt = dt;
    traj.record_stride = record_stride;
    record_state(traj, 0.0, r, phi);

    std::vector<cplx> dB;
    std::vector<cplx> u(N);  // e^{i phi_n}
    std::vector<double> dx(N), dphi(N);
    for (std::size_t step = 0; step < config.n_steps; ++step) {
        if (path)
            dB.assign(path->increments.begin() + step * N * N,
                      path->increments.begin() + (step + 1) * N * N);
        else
            draw_hermitian_step(*rng, N, dt, config.sigma, dB);

        for (std::size_t n = 0; n < N; ++n)
            u[n] = cplx(std::cos(phi[n]), std::sin(phi[n]));

        for (std::size_t n = 0; n < N; ++n) {
            double dxn = 0.0, dpn = -config.omega[n] * dt;
            bool track_phase = r[n] >= kPhaseFreezeFloor;
            for (std::size_t m = 0; m < N; ++m) {
                if (m == n) {
                    // diagonal: alpha_nn dB_nn is real, moves only the phase
                    if (track_phase)
                        dpn -= std::real(config.alpha[n * N + n] * dB[n * N + n]);
                    continue;
                }
                cplx z = config.alpha[n * N + m] * u[n] * std::conj(u[m]) * dB[n * N + m];
                dxn += 2.0 * r[n] * r[m] * z.imag();
                if (track_phase) dpn -= (r[m] / r[n]) * z.real();
            }
            dx[n] = dxn;
            dphi[n] = track_phase ? dpn : 0.0;
        }

        double s = 0.0;
        bool finite = true;
        for (std::size_t n = 0; n < N; ++n) {
            x[n] += dx[n];
            if (x[n] < 0.0) x[n] = 0.0;
            if (!std::isfinite(x[n])) finite = false;
            s += x[n];
        }
        if (!finite || s <= 0.0) {
            traj.aborted = true;
            traj.abort_step = step;
            std::ostringstream os;
            os << "non-finite population at step " << step;
            traj.abort_reason = os.str();
            return traj;
        }
        traj.norm_drift += std::abs(s - 1.0);
        for (std::size_t n = 0; n < N; ++n) {
            x[n] /= s;
            r[n] = std::sqrt(x[n]);
            phi[n] += dphi[n];
            if (phi[n] > 2.0 * M_PI || phi[n] < -2.0 * M_PI)
                phi[n] = std::remainder(phi[n], 2.0 * M_PI);
        }
        if ((step + 1) % record_stride == 0 || step + 1 == config.n_steps)
            record_state(traj, (step + 1) * dt, r, phi);
    }
    return traj;
}

}  // namespace

AmplitudeTrajectory evolve_sde_amplitudes(const CollapseConfig& config,
                                          const std::vector<double>& x0,
                                          const HermitianNoisePath& noise,
                                          std::size_t record_stride) {
    if (noise.dim != config.dim())
        throw std::invalid_argument("evolve_sde_amplitudes: noise dimension mismatch");
    if (noise.n_steps < config.n_steps)
        throw std::invalid_argument("evolve_sde_amplitudes: noise path too short");
    if (std::abs(noise.dt - config.dt) > 1e-15)
        throw std::invalid_argument("evolve_sde_amplitudes: dt mismatch");
    return evolve_sde_impl(config, x0, &noise, nullptr, record_stride);
}

AmplitudeTrajectory evolve_sde_amplitudes(const CollapseConfig& config,
                                          const std::vector<double>& x0,
                                          RngStreamPolicy noise_policy,
                                          std::size_t record_stride) {
    RngStream rng(noise_policy);
    return evolve_sde_impl(config, x0, nullptr, &rng, record_stride);
}

CollapseOutcome detect_outcome(const AmplitudeTrajectory& traj, double epsilon) {
    CollapseOutcome out;
    if (traj.states.empty()) return out;
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const auto& st = traj.states[k];
        std::size_t best = 0;
        double bx = 0.0;
        for (std::size_t n = 0; n < st.size(); ++n)
            if (st.x(n) > bx) bx = st.x(n), best = n;
        if (bx >= 1.0 - epsilon) {
            out.outcome_index = static_cast<int>(best);
            out.collapse_time = traj.times[k];
            break;
        }
    }
    const auto& last = traj.states.back();
    out.final_x.resize(last.size());
    for (std::size_t n = 0; n < last.size(); ++n) out.final_x[n] = last.x(n);
    return out;
}

CollapseConditionsReport check_collapse_conditions(const EnsembleStats& stats) {
    CollapseConditionsReport rep;
    rep.max_simplex_violation = stats.max_abs_sum_minus_one;
    rep.simplex_ok = rep.max_simplex_violation < 1e-6;
    const std::size_t dim = stats.dim;
    const std::size_t T = stats.times.size();
    rep.martingale_drift.assign(dim, 0.0);
    rep.martingale_stderr.assign(dim, 0.0);
    for (std::size_t n = 0; n < dim; ++n) {
        double x0 = stats.component[n].mean.empty() ? 0.0 : stats.component[n].mean[0];
        for (std::size_t k = 0; k < T; ++k) {
            double d = std::abs(stats.component[n].mean[k] - x0);
            if (d >= rep.martingale_drift[n]) {
                rep.martingale_drift[n] = d;
                rep.martingale_stderr[n] = stats.component[n].stderr_[k];
            }
        }
    }
    for (const auto& pair : stats.cross) {
        rep.cross_moment_final.push_back(pair.mean.empty() ? 0.0 : pair.mean.back());
        rep.cross_moment_final_stderr.push_back(
            pair.stderr_.empty() ? 0.0 : pair.stderr_.back());
    }
    return rep;
}

}  // namespace collapse
