#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "collapse/csl.hpp"

using namespace collapse;

namespace {

CommutingCslModel two_level(double lambda, double dt, std::size_t steps) {
    CommutingCslModel m;
    m.eigenvalues = {0.0, 1.0};
    m.lambda = lambda;
    m.dt = dt;
    m.n_steps = steps;
    return m;
}

std::vector<cplx> root_state(double x1) {
    return {cplx(std::sqrt(x1), 0.0), cplx(std::sqrt(1.0 - x1), 0.0)};
}

}  // namespace

TEST_CASE("per-state weights match the quadratic exponent formula") {
    CommutingCslModel m = two_level(0.7, 1e-2, 200);
    CslNoiseRecord noise = sample_raw_noise(m, {50, 1});
    std::vector<cplx> c0 = root_state(0.4);
    CslEvolveResult res = evolve_csl_commuting(m, c0, noise);
    for (std::size_t n = 0; n < 2; ++n) {
        double l = 0.0;
        for (std::size_t k = 0; k < m.n_steps; ++k) {
            double d = noise.w[k] - 2.0 * m.lambda * m.eigenvalues[n];
            l -= m.dt * d * d / (4.0 * m.lambda);
        }
        CHECK(res.log_weight[n] == doctest::Approx(l).epsilon(1e-12));
    }
    // populations follow from the weights
    double u1 = 0.4 * std::exp(2 * res.log_weight[0]);
    double u2 = 0.6 * std::exp(2 * res.log_weight[1]);
    CHECK(res.x[0] == doctest::Approx(u1 / (u1 + u2)).epsilon(1e-10));
}

TEST_CASE("the unnormalized evolution is linear in the initial state") {
    CommutingCslModel m = two_level(1.0, 1e-3, 40);
    CslNoiseRecord noise = sample_raw_noise(m, {51, 9});
    std::vector<cplx> e1{cplx(1, 0), cplx(0, 0)}, e2{cplx(0, 0), cplx(1, 0)};
    cplx a(0.6, 0.2), b(-0.3, 0.7);
    std::vector<cplx> c0{a / std::sqrt(0.98), b / std::sqrt(0.98)};

    auto unnorm = [&](const std::vector<cplx>& c) {
        CslNoiseRecord n2 = noise;
        CslEvolveResult r = evolve_csl_commuting(m, c, n2);
        double scale = std::exp(0.5 * r.log_norm2);
        return std::vector<cplx>{r.normalized[0] * scale, r.normalized[1] * scale};
    };
    auto u_e1 = unnorm(e1), u_e2 = unnorm(e2), u_c = unnorm(c0);
    double mag = std::abs(u_c[0]) + std::abs(u_c[1]);
    REQUIRE(mag > 0.0);
    for (std::size_t n = 0; n < 2; ++n) {
        cplx rhs = c0[0] * u_e1[n] + c0[1] * u_e2[n];
        CHECK(std::abs(u_c[n] - rhs) < 1e-10 * mag);
    }
}

TEST_CASE("physical-measure ensemble: martingale and Born outcomes") {
    const std::size_t steps = 6000;
    CommutingCslModel m = two_level(1.0, 1e-3, steps);
    std::vector<cplx> c0 = root_state(0.3);
    const int n = 4000;
    double sum_x = 0, sum_x2 = 0;
    std::vector<CslEvolveResult> runs;
    runs.reserve(n);
    for (int i = 0; i < n; ++i) {
        CslNoiseRecord noise =
            sample_physical_noise(m, c0, {606, static_cast<std::uint64_t>(i)}, CslScheme::Mixture);
        runs.push_back(evolve_csl_commuting(m, c0, noise));
        sum_x += runs.back().x[0];
        sum_x2 += runs.back().x[0] * runs.back().x[0];
    }
    double mean = sum_x / n;
    double se = std::sqrt(std::max(0.0, sum_x2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 0.3) < 5 * se);

    AsymptoticReport rep = asymptotic_collapse_check(runs, 2);
    REQUIRE(rep.outcome_frequency.size() == 2);
    double f = rep.outcome_frequency[0];
    double se_f = std::sqrt(f * (1 - f) / n);
    CHECK(std::abs(f - 0.3) < 5 * se_f);
    CHECK(rep.median_tail < 1e-3);
}

TEST_CASE("sequential sampling agrees at small dt") {
    CommutingCslModel m = two_level(1.0, 1e-3, 2000);
    std::vector<cplx> c0 = root_state(0.5);
    const int n = 2000;
    double sum_x = 0, sum_x2 = 0;
    for (int i = 0; i < n; ++i) {
        CslNoiseRecord noise = sample_physical_noise(
            m, c0, {607, static_cast<std::uint64_t>(i)}, CslScheme::Sequential);
        CslEvolveResult r = evolve_csl_commuting(m, c0, noise);
        sum_x += r.x[0];
        sum_x2 += r.x[0] * r.x[0];
    }
    double mean = sum_x / n;
    double se = std::sqrt(std::max(0.0, sum_x2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 0.5) < 5 * se + 2 * m.dt);
}

TEST_CASE("raw-measure importance weights average to one") {
    CommutingCslModel m = two_level(1.0, 1e-3, 500);
    std::vector<cplx> c0 = root_state(0.3);
    const int n = 20000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        CslNoiseRecord noise = sample_raw_noise(m, {608, static_cast<std::uint64_t>(i)});
        double w = raw_importance_weight(m, c0, noise);
        s1 += w;
        s2 += w * w;
    }
    double mean = s1 / n;
    double se = std::sqrt(std::max(0.0, s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 1.0) < 5 * se);
}

TEST_CASE("ensemble density matrix reproduces the analytic decay") {
    const double lt = 1.0;  // lambda * t
    CommutingCslModel m = two_level(1.0, 1e-3, 1000);
    std::vector<cplx> c0 = root_state(0.3);
    const int n = 5000;
    std::vector<CslEvolveResult> runs;
    runs.reserve(n);
    for (int i = 0; i < n; ++i) {
        CslNoiseRecord noise =
            sample_physical_noise(m, c0, {609, static_cast<std::uint64_t>(i)}, CslScheme::Mixture);
        runs.push_back(evolve_csl_commuting(m, c0, noise));
    }
    DensityMatrixStats stats = density_matrix_ensemble(runs, 2);
    Eigen::MatrixXcd ana = density_matrix_analytic(m, c0, lt);
    CHECK(std::abs(ana(0, 1)) ==
          doctest::Approx(std::sqrt(0.3 * 0.7) * std::exp(-0.5)).epsilon(1e-12));
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            cplx diff = stats.mean(r, c) - ana(r, c);
            CHECK(std::abs(diff.real()) < 5 * stats.stderr_re(r, c) + 1e-12);
            CHECK(std::abs(diff.imag()) < 5 * stats.stderr_im(r, c) + 1e-12);
        }
}

TEST_CASE("general evolver with H = 0 reduces to the commuting one") {
    CommutingCslModel m = two_level(1.0, 1e-2, 100);
    std::vector<cplx> c0 = root_state(0.4);
    CslNoiseRecord noise = sample_raw_noise(m, {60, 4});
    CslNoiseRecord noise_copy = noise;
    CslEvolveResult direct = evolve_csl_commuting(m, c0, noise_copy);

    std::vector<Eigen::VectorXd> ops(1, Eigen::VectorXd(2));
    ops[0] << 0.0, 1.0;
    HamiltonianFn h0 = [](double) { return Eigen::MatrixXcd::Zero(2, 2); };
    CslTrajectory traj = evolve_csl_general(ops, h0, c0, m.lambda, noise, 100);
    REQUIRE(!traj.states.empty());
    const auto& last = traj.states.back();
    for (std::size_t k = 0; k < 2; ++k)
        CHECK(std::abs(last[k] - direct.normalized[k]) < 1e-10);
    CHECK(traj.log_norm2.back() == doctest::Approx(direct.log_norm2).epsilon(1e-10));
}

TEST_CASE("a Hamiltonian alone rotates without decay") {
    // zero operator + zero noise leaves only Schrodinger evolution
    std::vector<Eigen::VectorXd> ops(1, Eigen::VectorXd::Zero(2));
    Eigen::MatrixXcd sx(2, 2);
    sx << 0, 1, 1, 0;
    HamiltonianFn h = [sx](double) { return sx; };
    std::vector<cplx> c0{cplx(1, 0), cplx(0, 0)};
    const double T = M_PI;  // exp(-i sx pi) = -1: population returns
    const std::size_t steps = 4000;
    CslNoiseRecord noise;
    noise.dt = T / static_cast<double>(steps);
    noise.n_modes = 1;
    noise.w.assign(steps, 0.0);
    CslTrajectory traj = evolve_csl_general(ops, h, c0, 1.0, noise, steps);
    const auto& last = traj.states.back();
    CHECK(std::norm(last[0]) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(traj.times.back() == doctest::Approx(M_PI).epsilon(1e-12));
}

TEST_CASE("lattice decay rates: symmetry, zero diagonal, saturation") {
    LatticeCslModel m;
    m.grid.n_sites = 32;
    m.grid.extent = 32.0;
    m.smear_width = 2.0;
    m.lambda = 0.8;
    Eigen::MatrixXd gamma = lattice_decay_rates(m);
    REQUIRE(gamma.rows() == 32);
    double self_overlap = 0.0;
    Eigen::MatrixXd prof = smeared_mass_profile(m);
    for (int x = 0; x < 32; ++x) self_overlap += prof(x, 0) * prof(x, 0);
    double saturation = m.lambda * m.grid.h() * self_overlap;
    for (int z = 0; z < 32; ++z) {
        CHECK(gamma(z, z) == 0.0);
        for (int zp = 0; zp < z; ++zp) {
            CHECK(gamma(z, zp) == doctest::Approx(gamma(zp, z)));
            CHECK(gamma(z, zp) > 0.0);
        }
    }
    // distant sites decohere at the saturated rate lambda h sum A^2
    CHECK(gamma(0, 16) == doctest::Approx(saturation).epsilon(1e-6));
    // near sites decohere slowly
    CHECK(gamma(0, 1) < 0.2 * saturation);
}

TEST_CASE("lattice trajectories: norm, martingale, off-diagonal decay") {
    LatticeCslModel m;
    m.grid.n_sites = 32;
    m.grid.extent = 32.0;
    m.smear_width = 2.0;
    m.lambda = 1.0;
    m.dt = 0.05;
    m.n_steps = 20;
    LatticeWavefunction packet =
        make_two_packet_state(m.grid, std::sqrt(0.5), 8.0, std::sqrt(0.5), 24.0, 2.0);
    const std::vector<cplx> psi0 = packet.values;
    const double h = m.grid.h();
    const double T = m.dt * static_cast<double>(m.n_steps);
    Eigen::MatrixXd gamma = lattice_decay_rates(m);

    const int n = 2000;
    const int z1 = 8, z2 = 24;  // packet centers
    double sx = 0, sx2 = 0;
    cplx srho(0, 0);
    double srho2 = 0;
    double worst_norm = 0.0;
    for (int i = 0; i < n; ++i) {
        LatticeCslTrajectory traj =
            evolve_csl_lattice(m, psi0, {701, static_cast<std::uint64_t>(i)},
                               CslScheme::Mixture, m.n_steps);
        const auto& last = traj.states.back();
        double nrm = 0.0;
        for (const auto& v : last) nrm += std::norm(v) * h;
        worst_norm = std::max(worst_norm, std::abs(nrm - 1.0));
        double p = std::norm(last[z1]) * h;
        sx += p;
        sx2 += p * p;
        cplx rho = last[z1] * std::conj(last[z2]) * h;
        srho += rho;
        srho2 += std::norm(rho);
    }
    CHECK(worst_norm < 1e-9);

    double mean = sx / n;
    double se = std::sqrt(std::max(0.0, sx2 / n - mean * mean) / n);
    double p0 = std::norm(psi0[z1]) * h;
    CHECK(std::abs(mean - p0) < 5 * se);

    cplx rho_mean = srho / static_cast<double>(n);
    double rho_var = std::max(0.0, srho2 / n - std::norm(rho_mean));
    double rho_se = std::sqrt(rho_var / n);
    cplx rho_ref = psi0[z1] * std::conj(psi0[z2]) * h *
                   std::exp(-gamma(z1, z2) * T);
    CHECK(std::abs(rho_mean - rho_ref) < 5 * rho_se);
    // and the decay is real: at least 30% below the initial coherence
    CHECK(std::abs(rho_mean) < 0.7 * std::abs(psi0[z1] * std::conj(psi0[z2]) * h));
}

TEST_CASE("deterministic lattice propagation matches the element-wise decay") {
    LatticeCslModel m;
    m.grid.n_sites = 32;
    m.grid.extent = 32.0;
    m.smear_width = 2.0;
    m.lambda = 0.6;
    LatticeWavefunction packet =
        make_two_packet_state(m.grid, std::sqrt(0.4), 8.0, std::sqrt(0.6), 24.0, 2.0);
    const std::size_t n = 32;
    Eigen::MatrixXcd rho0(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            rho0(i, j) = packet.values[i] * std::conj(packet.values[j]) * m.grid.h();
    Eigen::MatrixXd gamma = lattice_decay_rates(m);
    const double t = 1.7;
    Eigen::MatrixXcd prop = density_matrix_evolution_lattice(m, rho0, t);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            cplx ref = rho0(i, j) * std::exp(-gamma(i, j) * t);
            CHECK(std::abs(prop(i, j) - ref) < 1e-8);
        }
}

TEST_CASE("unitary reconstruction converges with quadrature order") {
    // a = 1, w = 0, dt = 16 puts the phase scale at beta = -8
    CommutingCslModel m = two_level(1.0, 0.1, 1);
    double d8 = unitary_representation_check(m, 16.0, 0.0, 8);
    double d16 = unitary_representation_check(m, 16.0, 0.0, 16);
    double d32 = unitary_representation_check(m, 16.0, 0.0, 32);
    double d64 = unitary_representation_check(m, 16.0, 0.0, 64);
    CHECK(d8 > 1e-1);   // coarse quadrature genuinely misses
    CHECK(d16 <= d8 + 1e-15);
    CHECK(d32 <= d16 + 1e-15);
    CHECK(d64 <= d32 + 1e-15);
    CHECK(d64 < 1e-8);
    CHECK_THROWS_AS(unitary_representation_check(m, 16.0, 0.0, 4), std::invalid_argument);
}

TEST_CASE("gauss-hermite quadrature integrates polynomials exactly") {
    std::vector<double> x, w;
    gauss_hermite(10, x, w);
    REQUIRE(x.size() == 10);
    double s0 = 0, s2 = 0, s4 = 0, s18 = 0, s_odd = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        s0 += w[i];
        s2 += w[i] * x[i] * x[i];
        s4 += w[i] * std::pow(x[i], 4);
        s18 += w[i] * std::pow(x[i], 18);
        s_odd += w[i] * std::pow(x[i], 7);
    }
    const double rp = std::sqrt(M_PI);
    CHECK(s0 == doctest::Approx(rp).epsilon(1e-13));
    CHECK(s2 == doctest::Approx(0.5 * rp).epsilon(1e-13));
    CHECK(s4 == doctest::Approx(0.75 * rp).epsilon(1e-13));
    // Gamma(19/2)/Gamma(1/2) = 17!!/2^9
    double m18 = 1.0;
    for (int k = 17; k > 0; k -= 2) m18 *= k;
    m18 /= 512.0;
    CHECK(s18 == doctest::Approx(m18 * rp).epsilon(1e-11));
    CHECK(std::abs(s_odd) < 1e-12);
}
