#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "collapse/discrete_collapse.hpp"
#include "collapse/ensemble.hpp"

using namespace collapse;

namespace {

CollapseConfig two_state(double alpha, double dt, std::size_t steps) {
    CollapseConfig c;
    c.omega = {0.0, 0.0};
    c.alpha = {cplx(0, 0), cplx(alpha, 0), cplx(alpha, 0), cplx(0, 0)};
    c.sigma = 1.0;
    c.dt = dt;
    c.n_steps = steps;
    return c;
}

// basin fraction of the minority outcome for the phase-driven equation,
// from the conserved quantity cos(theta)/sin(Theta) on the Bloch sphere
constexpr double kMinorBasin03 = 0.36901011956554536;

}  // namespace

TEST_CASE("collapsed state is a fixed point") {
    CollapseConfig c = two_state(1.0, 1e-3, 1000);
    auto traj = evolve_sde_amplitudes(c, {1.0, 0.0}, RngStreamPolicy{17, 0}, 100);
    REQUIRE(!traj.aborted);
    for (const auto& s : traj.states) {
        CHECK(std::abs(s.x(0) - 1.0) < 1e-6);
        CHECK(s.x(1) < 1e-6);
    }
}

TEST_CASE("noise-driven ensemble: simplex, martingale, Born frequencies, cross decay") {
    const double T = 8.0, dt = 1e-3;
    CollapseConfig c = two_state(1.0, dt, static_cast<std::size_t>(T / dt));
    const std::vector<double> x0{0.3, 0.7};
    const std::size_t stride = 400;
    std::vector<double> times{0.0};
    for (std::size_t k = stride; k <= c.n_steps; k += stride)
        times.push_back(static_cast<double>(k) * dt);

    const std::size_t n_traj = 4000;
    std::vector<int> outcome(n_traj, -1);
    auto fn = [&](std::uint64_t sid, std::vector<double>& out) {
        auto traj = evolve_sde_amplitudes(c, x0, RngStreamPolicy{2026, sid}, stride);
        if (traj.aborted) return false;
        for (std::size_t k = 0; k < times.size(); ++k) {
            out[2 * k] = traj.states[k].x(0);
            out[2 * k + 1] = traj.states[k].x(1);
        }
        outcome[sid] = detect_outcome(traj).outcome_index;
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = n_traj;
    EnsembleStats st = run_ensemble(fn, 2, times, opt);
    REQUIRE(st.n_aborted == 0);

    CHECK(st.max_abs_sum_minus_one < 1e-6);

    CollapseConditionsReport rep = check_collapse_conditions(st);
    CHECK(rep.simplex_ok);
    for (std::size_t n = 0; n < 2; ++n)
        CHECK(rep.martingale_drift[n] < 5.0 * rep.martingale_stderr[n]);

    for (std::size_t k = 0; k < times.size(); ++k) {
        double ref = 0.21 * std::exp(-2.0 * times[k]);
        double se = st.cross[0].stderr_[k];
        if (se == 0.0) continue;  // t = 0 row
        CHECK(std::abs(st.cross[0].mean[k] - ref) < 5.0 * se);
    }

    std::size_t wins0 = 0, decided = 0;
    for (int o : outcome)
        if (o >= 0) {
            decided += 1;
            wins0 += o == 0;
        }
    CHECK(decided > n_traj * 99 / 100);
    double f = static_cast<double>(wins0) / static_cast<double>(decided);
    double se = std::sqrt(f * (1 - f) / static_cast<double>(decided));
    CHECK(std::abs(f - 0.3) < 5.0 * se);
}

TEST_CASE("three-state ensemble keeps the simplex and the martingale") {
    CollapseConfig c;
    const std::size_t N = 3;
    c.omega = {0.3, -0.1, 0.7};
    c.alpha.assign(N * N, cplx(0, 0));
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t m = 0; m < N; ++m)
            if (n != m) c.alpha[n * N + m] = cplx(1.0, 0.0);
    c.dt = 1e-3;
    c.n_steps = 2000;
    const std::vector<double> x0{0.2, 0.5, 0.3};
    std::vector<double> times{0.0, 1.0, 2.0};

    auto fn = [&](std::uint64_t sid, std::vector<double>& out) {
        auto traj = evolve_sde_amplitudes(c, x0, RngStreamPolicy{5, sid}, 1000);
        if (traj.aborted) return false;
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t n = 0; n < N; ++n) out[k * N + n] = traj.states[k].x(n);
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = 1500;
    EnsembleStats st = run_ensemble(fn, N, times, opt);
    CHECK(st.max_abs_sum_minus_one < 1e-6);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 1; k < 3; ++k)
            CHECK(std::abs(st.component[n].mean[k] - x0[n]) <
                  5.0 * st.component[n].stderr_[k]);
}

TEST_CASE("phase-driven model: symmetric start splits evenly") {
    const double T = 12.0, dt = 1e-3;
    CollapseConfig c = two_state(1.0, dt, static_cast<std::size_t>(T / dt));
    const std::size_t n_traj = 2000;
    std::size_t wins0 = 0, decided = 0;
    double worst_sum = 0.0;
    for (std::size_t i = 0; i < n_traj; ++i) {
        auto traj = evolve_random_phase(c, {0.5, 0.5}, RngStreamPolicy{31, i}, 10);
        REQUIRE(!traj.aborted);
        for (const auto& s : traj.states)
            worst_sum = std::max(worst_sum, std::abs(s.x(0) + s.x(1) - 1.0));
        CollapseOutcome oc = detect_outcome(traj);
        if (oc.outcome_index >= 0) {
            ++decided;
            wins0 += oc.outcome_index == 0;
        }
    }
    CHECK(worst_sum < 1e-6);
    CHECK(decided > n_traj * 95 / 100);
    double f = static_cast<double>(wins0) / static_cast<double>(decided);
    double se = std::sqrt(f * (1 - f) / static_cast<double>(decided));
    CHECK(std::abs(f - 0.5) < 5.0 * se);
}

TEST_CASE("phase-driven model: asymmetric outcome law from the conserved quantity") {
    // orbits are periodic and never settle; the outcome is the first pole
    // visited, fixed entirely by the initial azimuth
    const double T = 12.0, dt = 1e-3;
    CollapseConfig c = two_state(1.0, dt, static_cast<std::size_t>(T / dt));
    const std::size_t n_traj = 3000;
    std::size_t wins_minor = 0, decided = 0;
    for (std::size_t i = 0; i < n_traj; ++i) {
        auto traj = evolve_random_phase(c, {0.3, 0.7}, RngStreamPolicy{77, i}, 10);
        REQUIRE(!traj.aborted);
        CollapseOutcome oc = detect_outcome(traj);
        if (oc.outcome_index >= 0) {
            ++decided;
            wins_minor += oc.outcome_index == 0;
        }
    }
    CHECK(decided > n_traj * 95 / 100);
    double f = static_cast<double>(wins_minor) / static_cast<double>(decided);
    double se = std::sqrt(f * (1 - f) / static_cast<double>(decided));
    CHECK(std::abs(f - kMinorBasin03) < 5.0 * se);
}

TEST_CASE("outcome detection reads the recorded crossing") {
    AmplitudeTrajectory traj;
    traj.dt = 0.1;
    traj.record_stride = 1;
    traj.times = {0.0, 0.1, 0.2};
    AmplitudeState s0, s1, s2;
    s0.r = {std::sqrt(0.5), std::sqrt(0.5)};
    s0.phi = {0.0, 0.0};
    s1.r = {std::sqrt(0.9995), std::sqrt(0.0005)};
    s1.phi = {0.0, 0.0};
    s2.r = {std::sqrt(0.99999), std::sqrt(0.00001)};
    s2.phi = {0.0, 0.0};
    traj.states = {s0, s1, s2};
    CollapseOutcome oc = detect_outcome(traj);
    CHECK(oc.outcome_index == 0);
    CHECK(oc.collapse_time == doctest::Approx(0.1));
    CHECK(oc.collapsed());

    traj.states = {s0, s0, s0};
    CollapseOutcome none = detect_outcome(traj);
    CHECK(none.outcome_index == -1);
    CHECK(!none.collapsed());
}

TEST_CASE("vanishing amplitude freezes its phase instead of dividing by zero") {
    CollapseConfig c = two_state(1.0, 1e-3, 500);
    auto traj = evolve_random_phase(c, {1.0, 0.0}, RngStreamPolicy{1, 0}, 50);
    REQUIRE(!traj.aborted);
    for (const auto& s : traj.states) {
        CHECK(std::isfinite(s.x(0)));
        CHECK(std::isfinite(s.phi[0]));
        CHECK(std::isfinite(s.phi[1]));
    }
}
