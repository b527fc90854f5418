#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "collapse/rng.hpp"
#include "collapse/sl_hits.hpp"

using namespace collapse;

namespace {

Grid1D std_grid() {
    Grid1D g;
    g.n_sites = 512;
    g.extent = 64.0;
    return g;
}

double position_variance(const LatticeWavefunction& psi, double center) {
    double h = psi.grid.h(), v = 0.0;
    for (std::size_t i = 0; i < psi.grid.n_sites; ++i) {
        double dx = psi.grid.wrap(psi.grid.site(i) - center);
        v += std::norm(psi.values[i]) * h * dx * dx;
    }
    return v;
}

}  // namespace

TEST_CASE("packets come out normalized") {
    LatticeWavefunction psi = make_gaussian_packet(std_grid(), 10.0, 2.0);
    CHECK(std::abs(psi.norm2() - 1.0) < 1e-12);
    LatticeWavefunction two =
        make_two_packet_state(std_grid(), std::sqrt(0.3), -8.0, std::sqrt(0.7), 8.0, 2.0);
    CHECK(std::abs(two.norm2() - 1.0) < 1e-12);
    double w = branch_weight(two, -8.0, 8.0);
    CHECK(std::abs(w - 0.3) < 1e-3);  // packet overlap e^{-8} shifts the split
}

TEST_CASE("hit center density is an exact probability vector") {
    LatticeWavefunction psi =
        make_two_packet_state(std_grid(), std::sqrt(0.3), -8.0, std::sqrt(0.7), 8.0, 2.0);
    std::vector<double> d = hit_center_density(psi, 0, 1.0);
    REQUIRE(d.size() == 512);
    double sum = 0.0, mass_left = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(d[i] >= 0.0);
        sum += d[i];
        double x = psi.grid.site(i);
        if (std::abs(psi.grid.wrap(x + 8.0)) < std::abs(psi.grid.wrap(x - 8.0)))
            mass_left += d[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    CHECK(std::abs(mass_left - 0.3) < 1e-3);  // separation >> widths
}

TEST_CASE("hit selection follows the branch weights") {
    LatticeWavefunction psi =
        make_two_packet_state(std_grid(), std::sqrt(0.3), -8.0, std::sqrt(0.7), 8.0, 2.0);
    RngStream rng(99, 0);
    const int n = 4000;
    int left = 0;
    for (int i = 0; i < n; ++i) {
        double z = sample_hit_center(psi, 0, 1.0, rng);
        if (std::abs(psi.grid.wrap(z + 8.0)) < std::abs(psi.grid.wrap(z - 8.0))) ++left;
    }
    double f = static_cast<double>(left) / n;
    double se = std::sqrt(f * (1 - f) / n);
    CHECK(std::abs(f - 0.3) < 5 * se);
}

TEST_CASE("a hit renormalizes, sharpens, and adds the oracle energy") {
    Grid1D g = std_grid();
    const double a = 1.0, mass = 1.0;
    for (double center : {0.0, 3.0, 52.5}) {
        for (double z_off : {0.0, 0.4, -1.1}) {
            LatticeWavefunction psi = make_gaussian_packet(g, center, 2.0, mass);
            double e0 = kinetic_energy(psi);
            double v0 = position_variance(psi, center);
            double z = std::fmod(center + z_off + g.extent, g.extent);
            HitEvent ev{0.5, 0, z};
            HitDiagnostics diag = apply_hit(psi, ev, a);
            CHECK(diag.raw_norm2 > 0.0);
            CHECK(std::abs(psi.norm2() - 1.0) < 1e-9);
            double gain = kinetic_energy(psi) - e0;
            CHECK(gain > 0.0);
            CHECK(std::abs(gain * 4.0 * mass * a * a - 1.0) < 1e-9);
            CHECK(position_variance(psi, center) < v0);
        }
    }
}

TEST_CASE("hit on a superposition boosts the selected branch") {
    LatticeWavefunction psi =
        make_two_packet_state(std_grid(), std::sqrt(0.5), 16.0, std::sqrt(0.5), 40.0, 2.0);
    HitEvent ev{0.1, 0, 16.0};
    apply_hit(psi, ev, 1.0);
    CHECK(branch_weight(psi, 16.0, 40.0) > 0.99);
}

TEST_CASE("free evolution is unitary, conserves energy, spreads the packet") {
    LatticeWavefunction psi = make_gaussian_packet(std_grid(), 0.0, 2.0);
    double e0 = kinetic_energy(psi);
    double v0 = position_variance(psi, 0.0);
    evolve_free(psi, 3.0);
    CHECK(std::abs(psi.norm2() - 1.0) < 1e-12);
    CHECK(std::abs(kinetic_energy(psi) - e0) < 1e-9 * e0);
    CHECK(position_variance(psi, 0.0) > v0 * 1.5);
}

TEST_CASE("momentum support at the band edge is refused") {
    LatticeWavefunction psi = make_gaussian_packet(std_grid(), 0.0, 0.07);  // h/2 wide
    CHECK_THROWS_AS(kinetic_energy(psi), std::runtime_error);
}

TEST_CASE("poisson hit times") {
    auto ev = sample_hit_times(2, 1.5, 10.0, {12, 7});
    double prev = 0.0;
    for (const auto& [t, p] : ev) {
        CHECK(t > prev);
        CHECK(t <= 10.0);
        CHECK(p >= 0);
        CHECK(p < 2);
        prev = t;
    }
    // rate check over many draws
    double total = 0.0;
    const int reps = 2000;
    for (int i = 0; i < reps; ++i)
        total += static_cast<double>(
            sample_hit_times(1, 1.5, 4.0, {12, static_cast<std::uint64_t>(100 + i)}).size());
    double mean = total / reps;
    CHECK(std::abs(mean - 6.0) < 5 * std::sqrt(6.0 / reps));
}

TEST_CASE("entangled pair: branch weights sum to one") {
    const double c1[2] = {-16.0, 16.0};
    const double c2[2] = {16.0, -16.0};
    Grid1D g;
    g.n_sites = 128;
    g.extent = 64.0;
    LatticeWavefunction psi =
        make_entangled_pair(g, std::sqrt(0.4), std::sqrt(0.6), c1, c2, 2.0);
    CHECK(std::abs(psi.norm2() - 1.0) < 1e-12);
    double w0 = branch_weight_pair(psi, c1, c2, 0);
    double w1 = branch_weight_pair(psi, c1, c2, 1);
    CHECK(std::abs(w0 + w1 - 1.0) < 1e-9);
    CHECK(std::abs(w0 - 0.4) < 1e-6);
}

TEST_CASE("either particle's first hit collapses the pair") {
    const double c1[2] = {-16.0, 16.0};
    const double c2[2] = {16.0, -16.0};
    Grid1D g;
    g.n_sites = 128;
    g.extent = 64.0;
    SlConfig cfg;
    cfg.lambda_hit = 1.0;
    cfg.width_a = 1.0;
    const int n = 600;
    int b0 = 0, decided = 0;
    double sum_t = 0, sum_t2 = 0;
    for (int i = 0; i < n; ++i) {
        EntangledCollapseRun r =
            run_entangled_collapse(g, std::sqrt(0.3), std::sqrt(0.7), c1, c2, 2.0, cfg, 4.0,
                                   {606, static_cast<std::uint64_t>(i)});
        if (r.branch < 0) continue;
        ++decided;
        b0 += r.branch == 0;
        CHECK(r.selected_weight > 0.99);
        CHECK(r.n_hits >= 1);
        sum_t += r.collapse_time;
        sum_t2 += r.collapse_time * r.collapse_time;
    }
    REQUIRE(decided > n * 99 / 100);
    double f = static_cast<double>(b0) / decided;
    double se = std::sqrt(f * (1 - f) / decided);
    CHECK(std::abs(f - 0.3) < 5 * se);
    // first hit of a rate-2*lambda Poisson stream
    double mean = sum_t / decided;
    double var = std::max(0.0, sum_t2 / decided - mean * mean);
    CHECK(std::abs(mean - 0.5) < 5 * std::sqrt(var / decided));
}
