#include "collapse/csl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace collapse {

namespace {

void validate_model(const CommutingCslModel& model) {
    if (model.eigenvalues.empty())
        throw std::invalid_argument("csl: empty spectrum");
    for (double a : model.eigenvalues)
        if (!std::isfinite(a)) throw std::invalid_argument("csl: eigenvalues must be finite");
    if (model.lambda <= 0.0) throw std::invalid_argument("csl: lambda must be > 0");
    if (model.dt <= 0.0) throw std::invalid_argument("csl: dt must be > 0");
    if (model.n_steps < 1) throw std::invalid_argument("csl: n_steps must be >= 1");
}

void validate_state(const std::vector<cplx>& c0, std::size_t dim) {
    if (c0.size() != dim) throw std::invalid_argument("csl: state dimension mismatch");
    double s = 0.0;
    for (const auto& c : c0) s += std::norm(c);
    if (std::abs(s - 1.0) > 1e-9)
        throw std::invalid_argument("csl: initial state must be normalized");
}

}  // namespace

CslEvolveResult evolve_csl_commuting(const CommutingCslModel& model,
                                     const std::vector<cplx>& c0, CslNoiseRecord& noise) {
    validate_model(model);
    const std::size_t N = model.eigenvalues.size();
    validate_state(c0, N);
    if (noise.n_modes != 1)
        throw std::invalid_argument("csl: commuting evolution takes one noise mode");
    if (noise.w.size() < model.n_steps)
        throw std::invalid_argument("csl: noise record too short");
    if (std::abs(noise.dt - model.dt) > 1e-15)
        throw std::invalid_argument("csl: noise dt mismatch");

    const double lam = model.lambda, dt = model.dt;
    std::vector<double> ell(N, 0.0);
    for (std::size_t k = 0; k < model.n_steps; ++k) {
        double w = noise.w[k];
        for (std::size_t n = 0; n < N; ++n) {
            double d = w - 2.0 * lam * model.eigenvalues[n];
            ell[n] -= dt * d * d / (4.0 * lam);
        }
    }
    noise.raw_log_weight = ell;

    CslEvolveResult res;
    res.log_weight = ell;
    double lmax = *std::max_element(ell.begin(), ell.end());
    double z = 0.0;
    for (std::size_t n = 0; n < N; ++n) z += std::norm(c0[n]) * std::exp(2.0 * (ell[n] - lmax));
    res.log_norm2 = 2.0 * lmax + std::log(z);
    res.normalized.resize(N);
    res.x.resize(N);
    double inv = 1.0 / std::sqrt(z);
    for (std::size_t n = 0; n < N; ++n) {
        res.normalized[n] = c0[n] * std::exp(ell[n] - lmax) * inv;
        res.x[n] = std::norm(res.normalized[n]);
    }
    return res;
}

CslNoiseRecord sample_physical_noise(const CommutingCslModel& model,
                                     const std::vector<cplx>& c0, RngStreamPolicy policy,
                                     CslScheme scheme) {
    validate_model(model);
    const std::size_t N = model.eigenvalues.size();
    validate_state(c0, N);
    RngStream rng(policy);
    const double lam = model.lambda, dt = model.dt;
    const double noise_sd = std::sqrt(lam / dt);

    CslNoiseRecord rec;
    rec.dt = dt;
    rec.n_modes = 1;
    rec.w.resize(model.n_steps);

    if (scheme == CslScheme::Mixture) {
        // branch index from the initial weights, then white noise around 2λa_n
        double u = rng.uniform();
        std::size_t pick = N - 1;
        double acc = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            acc += std::norm(c0[n]);
            if (u < acc) {
                pick = n;
                break;
            }
        }
        double drift = 2.0 * lam * model.eigenvalues[pick];
        for (std::size_t k = 0; k < model.n_steps; ++k)
            rec.w[k] = drift + noise_sd * rng.gaussian();
        return rec;
    }

    std::vector<double> x(N);
    for (std::size_t n = 0; n < N; ++n) x[n] = std::norm(c0[n]);
    for (std::size_t k = 0; k < model.n_steps; ++k) {
        double mean_a = 0.0;
        for (std::size_t n = 0; n < N; ++n) mean_a += x[n] * model.eigenvalues[n];
        double w = 2.0 * lam * mean_a + noise_sd * rng.gaussian();
        rec.w[k] = w;
        double emax = -std::numeric_limits<double>::infinity();
        std::vector<double> e(N);
        for (std::size_t n = 0; n < N; ++n) {
            double d = w - 2.0 * lam * model.eigenvalues[n];
            e[n] = -dt * d * d / (2.0 * lam);  // squared-amplitude exponent
            emax = std::max(emax, e[n]);
        }
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            x[n] *= std::exp(e[n] - emax);
            s += x[n];
        }
        for (std::size_t n = 0; n < N; ++n) x[n] /= s;
    }
    return rec;
}

CslNoiseRecord sample_raw_noise(const CommutingCslModel& model, RngStreamPolicy policy) {
    validate_model(model);
    RngStream rng(policy);
    CslNoiseRecord rec;
    rec.dt = model.dt;
    rec.n_modes = 1;
    rec.w.resize(model.n_steps);
    double sd = std::sqrt(model.lambda / model.dt);
    for (auto& w : rec.w) w = sd * rng.gaussian();
    return rec;
}

double raw_importance_weight(const CommutingCslModel& model, const std::vector<cplx>& c0,
                             const CslNoiseRecord& noise) {
    validate_model(model);
    const std::size_t N = model.eigenvalues.size();
    validate_state(c0, N);
    // norm^2 of the evolved state times the raw-measure density ratio; per
    // state and step the factor is exp[2 a w dt - 2 λ a^2 dt], mean exactly 1
    // when w ~ N(0, λ/dt).
    double sum_w = 0.0;
    for (std::size_t k = 0; k < model.n_steps; ++k) sum_w += noise.w[k];
    const double t = model.dt * static_cast<double>(model.n_steps);
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        double a = model.eigenvalues[n];
        total += std::norm(c0[n]) *
                 std::exp(2.0 * a * model.dt * sum_w - 2.0 * model.lambda * a * a * t);
    }
    return total;
}

AsymptoticReport asymptotic_collapse_check(const std::vector<CslEvolveResult>& runs,
                                           std::size_t dim) {
    AsymptoticReport rep;
    rep.outcome_frequency.assign(dim, 0.0);
    for (const auto& run : runs) {
        if (run.x.size() != dim)
            throw std::invalid_argument("asymptotic check: dimension mismatch");
        std::size_t best = 0;
        for (std::size_t n = 1; n < dim; ++n)
            if (run.x[n] > run.x[best]) best = n;
        rep.outcome_frequency[best] += 1.0;
        rep.tail_weights.push_back(1.0 - run.x[best]);
    }
    if (!runs.empty()) {
        for (auto& f : rep.outcome_frequency) f /= static_cast<double>(runs.size());
        std::vector<double> tails = rep.tail_weights;
        auto mid = tails.begin() + static_cast<std::ptrdiff_t>(tails.size() / 2);
        std::nth_element(tails.begin(), mid, tails.end());
        rep.median_tail = *mid;
    }
    return rep;
}

Eigen::MatrixXcd density_matrix_analytic(const CommutingCslModel& model,
                                         const std::vector<cplx>& c0, double t) {
    validate_model(model);
    const std::size_t N = model.eigenvalues.size();
    validate_state(c0, N);
    Eigen::MatrixXcd rho(N, N);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < N; ++m) {
            double da = model.eigenvalues[n] - model.eigenvalues[m];
            rho(n, m) = c0[n] * std::conj(c0[m]) *
                        std::exp(-0.5 * model.lambda * t * da * da);
        }
    return rho;
}

DensityMatrixStats density_matrix_ensemble(const std::vector<CslEvolveResult>& runs,
                                           std::size_t dim) {
    if (runs.empty()) throw std::invalid_argument("density ensemble: no runs");
    const auto n = static_cast<double>(runs.size());
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXd sum_re2 = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd sum_im2 = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& run : runs) {
        if (run.normalized.size() != dim)
            throw std::invalid_argument("density ensemble: dimension mismatch");
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                cplx e = run.normalized[i] * std::conj(run.normalized[j]);
                sum(i, j) += e;
                sum_re2(i, j) += e.real() * e.real();
                sum_im2(i, j) += e.imag() * e.imag();
            }
    }
    DensityMatrixStats stats;
    stats.n_samples = runs.size();
    stats.mean = sum / n;
    stats.stderr_re.resize(dim, dim);
    stats.stderr_im.resize(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double mr = stats.mean(i, j).real(), mi = stats.mean(i, j).imag();
            double vr = std::max(sum_re2(i, j) / n - mr * mr, 0.0);
            double vi = std::max(sum_im2(i, j) / n - mi * mi, 0.0);
            stats.stderr_re(i, j) = std::sqrt(vr / n);
            stats.stderr_im(i, j) = std::sqrt(vi / n);
        }
    return stats;
}

namespace {

struct UnitaryCache {
    Eigen::MatrixXcd h;
    Eigen::MatrixXcd half_step;  // exp(-i h dt/2)
    bool valid = false;
};

void hermitian_guard(const Eigen::MatrixXcd& h) {
    double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument("csl: Hamiltonian must be Hermitian");
}

Eigen::MatrixXcd matrix_exp_unitary(const Eigen::MatrixXcd& h, double tau) {
    // exp(-i h tau) through the spectral decomposition
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    Eigen::VectorXcd phases(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        double w = es.eigenvalues()(i) * tau;
        phases(i) = cplx(std::cos(w), -std::sin(w));
    }
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

namespace {

CslTrajectory evolve_csl_general_impl(const std::vector<Eigen::VectorXd>& operators,
                                      const HamiltonianFn& hamiltonian,
                                      const std::vector<cplx>& c0, double lambda,
                                      double dt, std::size_t n_steps,
                                      const CslNoiseRecord* noise, RngStream* rng,
                                      std::size_t record_stride) {
    if (operators.empty()) throw std::invalid_argument("csl general: no operators");
    const auto N = static_cast<std::size_t>(operators.front().size());
    for (const auto& op : operators)
        if (static_cast<std::size_t>(op.size()) != N)
            throw std::invalid_argument("csl general: operator dimension mismatch");
    validate_state(c0, N);
    if (lambda <= 0.0) throw std::invalid_argument("csl general: lambda must be > 0");
    if (dt <= 0.0) throw std::invalid_argument("csl general: dt must be > 0");
    if (record_stride < 1) record_stride = 1;
    const std::size_t K = operators.size();
    if (noise && noise->n_modes != K)
        throw std::invalid_argument("csl general: noise mode count mismatch");
    if (noise && noise->w.size() < n_steps * K)
        throw std::invalid_argument("csl general: noise record too short");

    Eigen::VectorXcd c(N);
    for (std::size_t n = 0; n < N; ++n) c(n) = c0[n];

    CslTrajectory traj;
    auto record = [&](double t, double log_norm2) {
        traj.times.push_back(t);
        std::vector<cplx> state(N);
        std::vector<double> x(N);
        for (std::size_t n = 0; n < N; ++n) {
            state[n] = c(n);
            x[n] = std::norm(c(n));
        }
        traj.states.push_back(std::move(state));
        traj.x.push_back(std::move(x));
        traj.log_norm2.push_back(log_norm2);
    };

    double log_norm2 = 0.0;
    record(0.0, 0.0);
    UnitaryCache cache;
    std::vector<double> w(K), expo(N);
    const double noise_sd = std::sqrt(lambda / dt);

    for (std::size_t step = 0; step < n_steps; ++step) {
        double t_mid = (static_cast<double>(step) + 0.5) * dt;
        Eigen::MatrixXcd h = hamiltonian(t_mid);
        if (static_cast<std::size_t>(h.rows()) != N ||
            static_cast<std::size_t>(h.cols()) != N)
            throw std::invalid_argument("csl general: Hamiltonian dimension mismatch");
        if (!cache.valid || h != cache.h) {
            hermitian_guard(h);
            cache.h = h;
            cache.half_step = matrix_exp_unitary(h, 0.5 * dt);
            cache.valid = true;
        }
        c = cache.half_step * c;

        if (noise) {
            for (std::size_t k = 0; k < K; ++k) w[k] = noise->w[step * K + k];
        } else {
            for (std::size_t k = 0; k < K; ++k) {
                double mean_a = 0.0;
                for (std::size_t n = 0; n < N; ++n)
                    mean_a += std::norm(c(n)) * operators[k](static_cast<Eigen::Index>(n));
                w[k] = 2.0 * lambda * mean_a + noise_sd * rng->gaussian();
            }
        }
        double emax = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < N; ++n) {
            double e = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                double d = w[k] - 2.0 * lambda * operators[k](static_cast<Eigen::Index>(n));
                e -= dt * d * d / (4.0 * lambda);
            }
            expo[n] = e;
            emax = std::max(emax, e);
        }
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            c(n) *= std::exp(expo[n] - emax);
            s += std::norm(c(n));
        }
        if (s <= 0.0) throw std::runtime_error("csl general: state vanished");
        log_norm2 += 2.0 * emax + std::log(s);
        c /= std::sqrt(s);

        c = cache.half_step * c;
        if ((step + 1) % record_stride == 0 || step + 1 == n_steps)
            record((static_cast<double>(step) + 1.0) * dt, log_norm2);
    }
    return traj;
}

}  // namespace

CslTrajectory evolve_csl_general(const std::vector<Eigen::VectorXd>& operators,
                                 const HamiltonianFn& hamiltonian,
                                 const std::vector<cplx>& c0, double lambda,
                                 const CslNoiseRecord& noise, std::size_t record_stride) {
    std::size_t n_steps = noise.w.size() / std::max<std::size_t>(noise.n_modes, 1);
    return evolve_csl_general_impl(operators, hamiltonian, c0, lambda, noise.dt, n_steps,
                                   &noise, nullptr, record_stride);
}

CslTrajectory run_csl_general_physical(const std::vector<Eigen::VectorXd>& operators,
                                       const HamiltonianFn& hamiltonian,
                                       const std::vector<cplx>& c0, double lambda,
                                       double dt, std::size_t n_steps,
                                       RngStreamPolicy policy, std::size_t record_stride) {
    RngStream rng(policy);
    return evolve_csl_general_impl(operators, hamiltonian, c0, lambda, dt, n_steps,
                                   nullptr, &rng, record_stride);
}

namespace {

void validate_lattice_model(const LatticeCslModel& model) {
    const double h = model.grid.h();
    if (model.grid.n_sites < 8) throw std::invalid_argument("lattice csl: grid too small");
    if (model.smear_width < 2.0 * h)
        throw std::invalid_argument("lattice csl: smear width under-resolved (a < 2h)");
    if (model.grid.extent < 10.0 * model.smear_width)
        throw std::invalid_argument("lattice csl: extent must be >= 10a");
    if (model.lambda <= 0.0 || model.dt <= 0.0 || model.mass_unit <= 0.0)
        throw std::invalid_argument("lattice csl: lambda, dt, m0 must be > 0");
}

}  // namespace

Eigen::MatrixXd smeared_mass_profile(const LatticeCslModel& model) {
    validate_lattice_model(model);
    const std::size_t n = model.grid.n_sites;
    const double a = model.smear_width;
    const double pref = (model.mass / model.mass_unit) * std::pow(M_PI * a * a, -0.25);
    const double cut = model.trunc_radius * a;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t z = 0; z < n; ++z)
        for (std::size_t x = 0; x < n; ++x) {
            double d = model.grid.wrap(model.grid.site(x) - model.grid.site(z));
            if (std::abs(d) > cut) continue;
            g(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z)) =
                pref * std::exp(-d * d / (2.0 * a * a));
        }
    return g;
}

Eigen::MatrixXd lattice_decay_rates(const LatticeCslModel& model) {
    Eigen::MatrixXd g = smeared_mass_profile(model);
    const std::size_t n = model.grid.n_sites;
    const double h = model.grid.h();
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t z = 0; z < n; ++z)
        for (std::size_t zp = z + 1; zp < n; ++zp) {
            double s = (g.col(static_cast<Eigen::Index>(z)) -
                        g.col(static_cast<Eigen::Index>(zp)))
                           .squaredNorm();
            double rate = 0.5 * model.lambda * h * s;
            gamma(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(zp)) = rate;
            gamma(static_cast<Eigen::Index>(zp), static_cast<Eigen::Index>(z)) = rate;
        }
    return gamma;
}

LatticeCslTrajectory evolve_csl_lattice(const LatticeCslModel& model,
                                        const std::vector<cplx>& psi0,
                                        RngStreamPolicy policy, CslScheme scheme,
                                        std::size_t record_stride) {
    validate_lattice_model(model);
    const std::size_t n = model.grid.n_sites;
    const double h = model.grid.h();
    if (psi0.size() != n) throw std::invalid_argument("lattice csl: state size mismatch");
    double nrm = 0.0;
    for (const auto& v : psi0) nrm += std::norm(v) * h;
    if (std::abs(nrm - 1.0) > 1e-9)
        throw std::invalid_argument("lattice csl: initial state must be normalized");
    if (model.use_kinetic && !is_power_of_two(n))
        throw std::invalid_argument("lattice csl: kinetic term needs a power-of-two grid");
    if (record_stride < 1) record_stride = 1;

    const double lam = model.lambda, dt = model.dt;
    const double noise_sd = std::sqrt(lam / (h * dt));
    Eigen::MatrixXd g = smeared_mass_profile(model);

    RngStream rng(policy);
    std::vector<cplx> psi = psi0;

    // Mixture scheme: freeze the drift profile at a configuration drawn from
    // the initial weights; exact physical-measure sampler when H = 0.
    std::size_t pick = n - 1;
    if (scheme == CslScheme::Mixture) {
        double u = rng.uniform(), acc = 0.0;
        for (std::size_t z = 0; z < n; ++z) {
            acc += std::norm(psi0[z]) * h;
            if (u < acc) {
                pick = z;
                break;
            }
        }
    }

    LatticeCslTrajectory traj;
    auto record = [&](double t, double ln2) {
        traj.times.push_back(t);
        traj.states.push_back(psi);
        traj.log_norm2.push_back(ln2);
    };
    record(0.0, 0.0);

    std::vector<double> w(n), drift(n), expo(n);
    double log_norm2 = 0.0;
    std::vector<cplx> fpsi;
    auto kinetic_half = [&]() {
        if (!model.use_kinetic) return;
        fpsi = psi;
        fft_radix2(fpsi, false);
        for (std::size_t j = 0; j < n; ++j) {
            double k = fft_wavenumber(j, n, h);
            double ph = k * k / (2.0 * model.mass) * (0.5 * dt);
            fpsi[j] *= cplx(std::cos(ph), -std::sin(ph));
        }
        fft_radix2(fpsi, true);
        psi = fpsi;
    };

    for (std::size_t step = 0; step < model.n_steps; ++step) {
        kinetic_half();

        if (scheme == CslScheme::Mixture) {
            for (std::size_t x = 0; x < n; ++x)
                drift[x] = 2.0 * lam * g(static_cast<Eigen::Index>(x),
                                         static_cast<Eigen::Index>(pick));
        } else {
            for (std::size_t x = 0; x < n; ++x) {
                double mean_a = 0.0;
                for (std::size_t z = 0; z < n; ++z) {
                    double gz = g(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z));
                    if (gz != 0.0) mean_a += std::norm(psi[z]) * h * gz;
                }
                drift[x] = 2.0 * lam * mean_a;
            }
        }
        for (std::size_t x = 0; x < n; ++x) w[x] = drift[x] + noise_sd * rng.gaussian();

        double sum_w2 = 0.0;
        for (std::size_t x = 0; x < n; ++x) sum_w2 += w[x] * w[x];
        double emax = -std::numeric_limits<double>::infinity();
        for (std::size_t z = 0; z < n; ++z) {
            double cross = 0.0, self = 0.0;
            for (std::size_t x = 0; x < n; ++x) {
                double gx = g(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z));
                if (gx == 0.0) continue;
                cross += w[x] * gx;
                self += gx * gx;
            }
            // -(dt h / 4λ) Σ_x (w - 2λ A)^2, with the w² term kept for the log
            expo[z] = -dt * h / (4.0 * lam) *
                      (sum_w2 - 4.0 * lam * cross + 4.0 * lam * lam * self);
            emax = std::max(emax, expo[z]);
        }
        double s = 0.0;
        for (std::size_t z = 0; z < n; ++z) {
            psi[z] *= std::exp(expo[z] - emax);
            s += std::norm(psi[z]) * h;
        }
        if (s <= 0.0) throw std::runtime_error("lattice csl: state vanished");
        log_norm2 += 2.0 * emax + std::log(s);
        double inv = 1.0 / std::sqrt(s);
        for (auto& v : psi) v *= inv;

        kinetic_half();
        if ((step + 1) % record_stride == 0 || step + 1 == model.n_steps)
            record((static_cast<double>(step) + 1.0) * dt, log_norm2);
    }
    return traj;
}

Eigen::MatrixXcd density_matrix_evolution_lattice(const LatticeCslModel& model,
                                                  const Eigen::MatrixXcd& rho0, double t,
                                                  std::size_t n_sub) {
    validate_lattice_model(model);
    const std::size_t n = model.grid.n_sites;
    if (n > 256) throw std::invalid_argument("lattice rho: dense propagation capped at 256 sites");
    if (static_cast<std::size_t>(rho0.rows()) != n ||
        static_cast<std::size_t>(rho0.cols()) != n)
        throw std::invalid_argument("lattice rho: dimension mismatch");
    if (t < 0.0) throw std::invalid_argument("lattice rho: t must be >= 0");

    Eigen::MatrixXd gamma = lattice_decay_rates(model);
    if (!model.use_kinetic) {
        Eigen::MatrixXcd rho = rho0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *=
                    std::exp(-gamma(static_cast<Eigen::Index>(i),
                                    static_cast<Eigen::Index>(j)) *
                             t);
        return rho;
    }

    // dense kinetic Hamiltonian via the spectral derivative applied to columns
    const double h = model.grid.h();
    if (!is_power_of_two(n))
        throw std::invalid_argument("lattice rho: kinetic term needs a power-of-two grid");
    Eigen::MatrixXcd H(n, n);
    std::vector<cplx> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(col.begin(), col.end(), cplx(0.0, 0.0));
        col[j] = cplx(1.0, 0.0);
        fft_radix2(col, false);
        for (std::size_t k = 0; k < n; ++k) {
            double kk = fft_wavenumber(k, n, h);
            col[k] *= kk * kk / (2.0 * model.mass);
        }
        fft_radix2(col, true);
        for (std::size_t i = 0; i < n; ++i)
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }

    if (n_sub < 1) n_sub = 1;
    double dt = t / static_cast<double>(n_sub);
    const cplx mi(0.0, -1.0);
    Eigen::MatrixXcd gamma_c = gamma.cast<cplx>();
    auto deriv = [&](const Eigen::MatrixXcd& r) -> Eigen::MatrixXcd {
        return mi * (H * r - r * H) - gamma_c.cwiseProduct(r);
    };
    Eigen::MatrixXcd rho = rho0;
    for (std::size_t s = 0; s < n_sub; ++s) {
        Eigen::MatrixXcd k1 = deriv(rho);
        Eigen::MatrixXcd k2 = deriv(rho + 0.5 * dt * k1);
        Eigen::MatrixXcd k3 = deriv(rho + 0.5 * dt * k2);
        Eigen::MatrixXcd k4 = deriv(rho + dt * k3);
        rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return rho;
}

void gauss_hermite(std::size_t order, std::vector<double>& nodes,
                   std::vector<double>& weights) {
    if (order < 1) throw std::invalid_argument("gauss-hermite: order must be >= 1");
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
    for (std::size_t k = 1; k < order; ++k) {
        double b = std::sqrt(static_cast<double>(k) / 2.0);
        jac(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
        jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    nodes.resize(order);
    weights.resize(order);
    for (std::size_t i = 0; i < order; ++i) {
        nodes[i] = es.eigenvalues()(static_cast<Eigen::Index>(i));
        double v0 = es.eigenvectors()(0, static_cast<Eigen::Index>(i));
        weights[i] = std::sqrt(M_PI) * v0 * v0;
    }
}

double unitary_representation_check(const CommutingCslModel& model, double dt, double w,
                                    std::size_t quadrature_order) {
    validate_model(model);
    if (model.eigenvalues.size() > 4)
        throw std::invalid_argument("unitary check: at most 4 basis states");
    if (quadrature_order < 8)
        throw std::invalid_argument("unitary check: quadrature order must be >= 8");
    if (dt <= 0.0) throw std::invalid_argument("unitary check: dt must be > 0");

    std::vector<double> nodes, weights;
    gauss_hermite(quadrature_order, nodes, weights);

    // e^{-β²/4} = (1/√π) Σ_j ω_j e^{i ξ_j β}, β_n = sqrt(dt/λ)(w - 2λ a_n);
    // the ξ substitution turns the right side into the Gaussian average of
    // phases e^{iηw dt} times unitaries e^{-i 2λ dt η a_n}.
    double dev = 0.0;
    for (double a : model.eigenvalues) {
        double beta = std::sqrt(dt / model.lambda) * (w - 2.0 * model.lambda * a);
        double direct = std::exp(-beta * beta / 4.0);
        cplx quad(0.0, 0.0);
        for (std::size_t j = 0; j < nodes.size(); ++j)
            quad += weights[j] * std::exp(cplx(0.0, nodes[j] * beta));
        quad /= std::sqrt(M_PI);
        dev = std::max(dev, std::abs(quad - cplx(direct, 0.0)));
    }
    return dev;
}

}  // namespace collapse
