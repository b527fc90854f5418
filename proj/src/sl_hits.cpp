#include "collapse/sl_hits.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace collapse {

namespace {

void check_lattice(const LatticeWavefunction& psi) {
    const std::size_t n = psi.grid.n_sites;
    if (psi.n_particles != 1 && psi.n_particles != 2)
        throw std::invalid_argument("lattice: n_particles must be 1 or 2");
    std::size_t want = (psi.n_particles == 1) ? n : n * n;
    if (psi.values.size() != want)
        throw std::invalid_argument("lattice: value array does not match the grid");
    if (psi.grid.extent <= 0.0 || n < 8)
        throw std::invalid_argument("lattice: degenerate grid");
}

}  // namespace

double LatticeWavefunction::norm2() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return s * (n_particles == 1 ? grid.h() : grid.h() * grid.h());
}

void LatticeWavefunction::normalize() {
    double n2 = norm2();
    if (n2 < 1e-30)
        throw std::runtime_error("lattice: norm degenerate, state numerically destroyed");
    double inv = 1.0 / std::sqrt(n2);
    for (auto& v : values) v *= inv;
}

LatticeWavefunction make_gaussian_packet(const Grid1D& grid, double center, double width,
                                         double mass) {
    if (width <= 0.0) throw std::invalid_argument("packet: width must be > 0");
    LatticeWavefunction psi;
    psi.n_particles = 1;
    psi.grid = grid;
    psi.mass = mass;
    psi.values.resize(grid.n_sites);
    for (std::size_t i = 0; i < grid.n_sites; ++i) {
        double d = grid.wrap(grid.site(i) - center);
        psi.values[i] = std::exp(-d * d / (2.0 * width * width));
    }
    psi.normalize();
    return psi;
}

LatticeWavefunction make_two_packet_state(const Grid1D& grid, double amp1, double c1,
                                          double amp2, double c2, double width,
                                          double mass) {
    LatticeWavefunction a = make_gaussian_packet(grid, c1, width, mass);
    LatticeWavefunction b = make_gaussian_packet(grid, c2, width, mass);
    for (std::size_t i = 0; i < grid.n_sites; ++i)
        a.values[i] = amp1 * a.values[i] + amp2 * b.values[i];
    a.normalize();
    return a;
}

LatticeWavefunction make_entangled_pair(const Grid1D& grid, double amp1, double amp2,
                                        const double centers1[2], const double centers2[2],
                                        double width, double mass) {
    LatticeWavefunction l1 = make_gaussian_packet(grid, centers1[0], width, mass);
    LatticeWavefunction l2 = make_gaussian_packet(grid, centers2[0], width, mass);
    LatticeWavefunction r1 = make_gaussian_packet(grid, centers1[1], width, mass);
    LatticeWavefunction r2 = make_gaussian_packet(grid, centers2[1], width, mass);
    LatticeWavefunction psi;
    psi.n_particles = 2;
    psi.grid = grid;
    psi.mass = mass;
    const std::size_t n = grid.n_sites;
    psi.values.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            psi.values[i * n + j] =
                amp1 * l1.values[i] * l2.values[j] + amp2 * r1.values[i] * r2.values[j];
    psi.normalize();
    return psi;
}

double branch_weight(const LatticeWavefunction& psi, double c1, double c2) {
    check_lattice(psi);
    if (psi.n_particles != 1)
        throw std::invalid_argument("branch_weight: one-particle states only");
    double w = 0.0;
    for (std::size_t i = 0; i < psi.grid.n_sites; ++i) {
        double x = psi.grid.site(i);
        if (std::abs(psi.grid.wrap(x - c1)) <= std::abs(psi.grid.wrap(x - c2)))
            w += std::norm(psi.values[i]);
    }
    return w * psi.grid.h();
}

double branch_weight_pair(const LatticeWavefunction& psi, const double centers1[2],
                          const double centers2[2], int branch) {
    check_lattice(psi);
    if (psi.n_particles != 2)
        throw std::invalid_argument("branch_weight_pair: two-particle states only");
    const std::size_t n = psi.grid.n_sites;
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x1 = psi.grid.site(i);
        bool near1 = std::abs(psi.grid.wrap(x1 - centers1[branch])) <=
                     std::abs(psi.grid.wrap(x1 - centers1[1 - branch]));
        for (std::size_t j = 0; j < n; ++j) {
            double x2 = psi.grid.site(j);
            bool near2 = std::abs(psi.grid.wrap(x2 - centers2[branch])) <=
                         std::abs(psi.grid.wrap(x2 - centers2[1 - branch]));
            if (near1 && near2) w += std::norm(psi.values[i * n + j]);
        }
    }
    double h = psi.grid.h();
    return w * h * h;
}

std::vector<std::pair<double, int>> sample_hit_times(int n_particles, double lambda_hit,
                                                     double t_final, RngStreamPolicy policy) {
    if (n_particles < 1) throw std::invalid_argument("hit times: n_particles must be >= 1");
    if (lambda_hit < 0.0) throw std::invalid_argument("hit times: rate must be >= 0");
    if (t_final <= 0.0) throw std::invalid_argument("hit times: t_final must be > 0");
    RngStream rng(policy);
    std::vector<std::pair<double, int>> events;
    for (int p = 0; p < n_particles; ++p) {
        double t = 0.0;
        while (lambda_hit > 0.0) {
            t += -std::log(rng.uniform_pos()) / lambda_hit;
            if (t > t_final) break;
            events.emplace_back(t, p);
        }
    }
    std::sort(events.begin(), events.end());
    return events;
}

std::vector<double> hit_center_density(const LatticeWavefunction& psi, int particle,
                                       double width_a) {
    check_lattice(psi);
    if (width_a <= 0.0) throw std::invalid_argument("hit: width must be > 0");
    if (particle < 0 || particle >= psi.n_particles)
        throw std::invalid_argument("hit: bad particle index");
    const std::size_t n = psi.grid.n_sites;
    const double h = psi.grid.h();

    // marginal |psi|^2 mass along the hit particle's coordinate
    std::vector<double> marg(n, 0.0);
    if (psi.n_particles == 1) {
        for (std::size_t i = 0; i < n; ++i) marg[i] = std::norm(psi.values[i]) * h;
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double m = std::norm(psi.values[i * n + j]) * h * h;
                marg[particle == 0 ? i : j] += m;
            }
    }

    std::vector<double> density(n, 0.0);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double z = psi.grid.site(k);
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = psi.grid.wrap(psi.grid.site(i) - z);
            q += marg[i] * std::exp(-d * d / (width_a * width_a));
        }
        density[k] = q;
        sum += q;
    }
    if (sum <= 0.0) throw std::runtime_error("hit: center density vanished");
    for (auto& v : density) v /= sum;
    return density;
}

double sample_hit_center(const LatticeWavefunction& psi, int particle, double width_a,
                         RngStream& rng) {
    std::vector<double> density = hit_center_density(psi, particle, width_a);
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < density.size(); ++k) {
        acc += density[k];
        if (u < acc) return psi.grid.site(k);
    }
    return psi.grid.site(density.size() - 1);
}

HitDiagnostics apply_hit(LatticeWavefunction& psi, const HitEvent& event, double width_a) {
    check_lattice(psi);
    if (width_a <= 0.0) throw std::invalid_argument("hit: width must be > 0");
    if (event.particle_index < 0 || event.particle_index >= psi.n_particles)
        throw std::invalid_argument("hit: bad particle index");
    if (event.center < 0.0 || event.center >= psi.grid.extent)
        throw std::invalid_argument("hit: center outside the grid");
    const std::size_t n = psi.grid.n_sites;
    const double pref = std::pow(M_PI * width_a * width_a, -0.25);

    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = psi.grid.wrap(psi.grid.site(i) - event.center);
        g[i] = pref * std::exp(-d * d / (2.0 * width_a * width_a));
    }
    if (psi.n_particles == 1) {
        for (std::size_t i = 0; i < n; ++i) psi.values[i] *= g[i];
    } else if (event.particle_index == 0) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) psi.values[i * n + j] *= g[i];
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) psi.values[i * n + j] *= g[j];
    }
    HitDiagnostics diag;
    diag.raw_norm2 = psi.norm2();
    if (diag.raw_norm2 < 1e-30)
        throw std::runtime_error("hit: post-hit norm degenerate (center where psi ~ 0)");
    double inv = 1.0 / std::sqrt(diag.raw_norm2);
    for (auto& v : psi.values) v *= inv;
    return diag;
}

namespace {

// momentum-space |psi|^2 per axis; shared by the energy and aliasing checks
double spectral_kinetic(const LatticeWavefunction& psi) {
    const std::size_t n = psi.grid.n_sites;
    const double h = psi.grid.h();
    if (!is_power_of_two(n))
        throw std::invalid_argument("energy: grid size must be a power of two");

    double num = 0.0, den = 0.0, band = 0.0;
    const double kmax = M_PI / h;
    if (psi.n_particles == 1) {
        std::vector<cplx> a = psi.values;
        fft_radix2(a, false);
        for (std::size_t j = 0; j < n; ++j) {
            double k = fft_wavenumber(j, n, h);
            double w = std::norm(a[j]);
            num += k * k * w;
            den += w;
            if (std::abs(k) > 0.9 * kmax) band += w;
        }
    } else {
        std::vector<cplx> work = psi.values;
        std::vector<cplx> row(n);
        for (std::size_t i = 0; i < n; ++i) {  // along particle 2
            std::copy_n(work.begin() + i * n, n, row.begin());
            fft_radix2(row, false);
            std::copy_n(row.begin(), n, work.begin() + i * n);
        }
        std::vector<cplx> col(n);
        for (std::size_t j = 0; j < n; ++j) {  // along particle 1
            for (std::size_t i = 0; i < n; ++i) col[i] = work[i * n + j];
            fft_radix2(col, false);
            for (std::size_t i = 0; i < n; ++i) work[i * n + j] = col[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double k1 = fft_wavenumber(i, n, h);
            for (std::size_t j = 0; j < n; ++j) {
                double k2 = fft_wavenumber(j, n, h);
                double w = std::norm(work[i * n + j]);
                num += (k1 * k1 + k2 * k2) * w;
                den += w;
                if (std::abs(k1) > 0.9 * kmax || std::abs(k2) > 0.9 * kmax) band += w;
            }
        }
    }
    if (den <= 0.0) throw std::runtime_error("energy: empty state");
    if (band / den > 1e-6)
        throw std::runtime_error(
            "energy: momentum support reaches the grid band edge (aliasing)");
    return 0.5 * num / den / psi.mass;
}

}  // namespace

double kinetic_energy(const LatticeWavefunction& psi) {
    check_lattice(psi);
    return spectral_kinetic(psi);
}

double energy_gain(const LatticeWavefunction& before, const LatticeWavefunction& after) {
    return kinetic_energy(after) - kinetic_energy(before);
}

void evolve_free(LatticeWavefunction& psi, double t) {
    check_lattice(psi);
    const std::size_t n = psi.grid.n_sites;
    const double h = psi.grid.h();
    if (!is_power_of_two(n))
        throw std::invalid_argument("evolve: grid size must be a power of two");
    auto phase = [&](double k) {
        double w = k * k / (2.0 * psi.mass) * t;
        return cplx(std::cos(w), -std::sin(w));
    };
    if (psi.n_particles == 1) {
        fft_radix2(psi.values, false);
        for (std::size_t j = 0; j < n; ++j)
            psi.values[j] *= phase(fft_wavenumber(j, n, h));
        fft_radix2(psi.values, true);
    } else {
        std::vector<cplx> row(n), col(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(psi.values.begin() + i * n, n, row.begin());
            fft_radix2(row, false);
            for (std::size_t j = 0; j < n; ++j) row[j] *= phase(fft_wavenumber(j, n, h));
            fft_radix2(row, true);
            std::copy_n(row.begin(), n, psi.values.begin() + i * n);
        }
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) col[i] = psi.values[i * n + j];
            fft_radix2(col, false);
            for (std::size_t i = 0; i < n; ++i) col[i] *= phase(fft_wavenumber(i, n, h));
            fft_radix2(col, true);
            for (std::size_t i = 0; i < n; ++i) psi.values[i * n + j] = col[i];
        }
    }
}

EntangledCollapseRun run_entangled_collapse(const Grid1D& grid, double amp1, double amp2,
                                            const double centers1[2], const double centers2[2],
                                            double width, const SlConfig& config,
                                            double t_final, RngStreamPolicy policy) {
    LatticeWavefunction psi =
        make_entangled_pair(grid, amp1, amp2, centers1, centers2, width);
    auto events = sample_hit_times(2, config.lambda_hit, t_final, policy);
    RngStream center_rng(RngStreamPolicy{policy.master_seed, policy.stream_id ^ 0x8000000000000000ULL});

    EntangledCollapseRun run;
    for (const auto& [t, particle] : events) {
        HitEvent ev;
        ev.time = t;
        ev.particle_index = particle;
        ev.center = sample_hit_center(psi, particle, config.width_a, center_rng);
        apply_hit(psi, ev, config.width_a);
        ++run.n_hits;
        for (int b = 0; b < 2; ++b) {
            double w = branch_weight_pair(psi, centers1, centers2, b);
            if (w > 0.99) {
                run.collapse_time = t;
                run.branch = b;
                run.selected_weight = w;
                return run;
            }
        }
    }
    return run;
}

}  // namespace collapse
