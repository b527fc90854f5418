#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "collapse/ensemble.hpp"
#include "collapse/noise.hpp"
#include "collapse/rng.hpp"
#include "collapse/sde.hpp"

using namespace collapse;

namespace {

bool series_equal(const MomentSeries& a, const MomentSeries& b) {
    return a.mean == b.mean && a.stderr_ == b.stderr_;
}

}  // namespace

TEST_CASE("moments match hand computation") {
    // out = sid + 1 at t0, 2(sid + 1) at t1; three trajectories
    std::vector<double> times{0.0, 1.0};
    auto fn = [](std::uint64_t sid, std::vector<double>& out) {
        out[0] = static_cast<double>(sid + 1);
        out[1] = 2.0 * static_cast<double>(sid + 1);
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = 3;
    EnsembleStats st = run_ensemble(fn, 1, times, opt);
    REQUIRE(st.n_trajectories == 3);
    CHECK(st.component[0].mean[0] == doctest::Approx(2.0));
    CHECK(st.component[0].mean[1] == doctest::Approx(4.0));
    // sample sd of {1,2,3} is 1, stderr 1/sqrt(3)
    CHECK(st.component[0].stderr_[0] == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(st.component[0].stderr_[1] == doctest::Approx(2.0 / std::sqrt(3.0)));
}

TEST_CASE("worker count does not change any statistic") {
    std::vector<double> times{0.0, 0.5, 1.0};
    auto fn = [](std::uint64_t sid, std::vector<double>& out) {
        RngStream rng(99, sid);
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t n = 0; n < 2; ++n) out[k * 2 + n] = rng.uniform();
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = 1000;
    opt.histogram_bins = 16;
    EnsembleStats a, b;
    opt.n_workers = 1;
    a = run_ensemble(fn, 2, times, opt);
    opt.n_workers = 4;
    b = run_ensemble(fn, 2, times, opt);
    for (std::size_t n = 0; n < 2; ++n) {
        CHECK(series_equal(a.component[n], b.component[n]));
        CHECK(series_equal(a.self_product[n], b.self_product[n]));
    }
    CHECK(series_equal(a.cross[0], b.cross[0]));
    CHECK(a.histograms == b.histograms);
    CHECK(a.max_abs_sum_minus_one == b.max_abs_sum_minus_one);
}

TEST_CASE("aborted trajectories are counted and excluded") {
    std::vector<double> times{0.0};
    auto fn = [](std::uint64_t sid, std::vector<double>& out) {
        if (sid % 4 == 0) return false;
        out[0] = 1.0;
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = 100;
    EnsembleStats st = run_ensemble(fn, 1, times, opt);
    CHECK(st.n_aborted == 25);
    CHECK(st.component[0].mean[0] == doctest::Approx(1.0));
    CHECK(st.component[0].stderr_[0] == doctest::Approx(0.0));
}

TEST_CASE("histograms are probability masses in the declared range") {
    std::vector<double> times{0.0};
    auto fn = [](std::uint64_t sid, std::vector<double>& out) {
        out[0] = sid < 25 ? 0.1 : 0.9;  // bin 0 gets 1/4, bin 3 gets 3/4
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = 100;
    opt.histogram_bins = 4;
    EnsembleStats st = run_ensemble(fn, 1, times, opt);
    CHECK(st.histograms[0][0][0] == doctest::Approx(0.25));
    CHECK(st.histograms[0][0][1] == doctest::Approx(0.0));
    CHECK(st.histograms[0][0][2] == doctest::Approx(0.0));
    CHECK(st.histograms[0][0][3] == doctest::Approx(0.75));
}

TEST_CASE("simplex deviation tracker sees the worst sample") {
    std::vector<double> times{0.0, 1.0};
    auto fn = [](std::uint64_t sid, std::vector<double>& out) {
        out[0] = 0.5;
        out[1] = 0.5;
        out[2] = 0.5;
        out[3] = sid == 7 ? 0.503 : 0.5;  // one bad sample
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = 10;
    EnsembleStats st = run_ensemble(fn, 2, times, opt);
    CHECK(st.max_abs_sum_minus_one == doctest::Approx(0.003));
}

TEST_CASE("polynomial evaluation, gradient, hessian") {
    // f(x, y) = 3 x^2 y + 2 y
    Polynomial f;
    f.dim = 2;
    f.terms = {{3.0, {2, 1}}, {2.0, {0, 1}}};
    std::vector<double> x{1.5, -2.0};
    CHECK(f.eval(x) == doctest::Approx(3 * 2.25 * -2.0 + 2 * -2.0));
    std::vector<double> g(2), h(4);
    f.gradient(x, g);
    CHECK(g[0] == doctest::Approx(6 * 1.5 * -2.0));
    CHECK(g[1] == doctest::Approx(3 * 2.25 + 2));
    f.hessian(x, h);
    CHECK(h[0] == doctest::Approx(6 * -2.0));   // f_xx
    CHECK(h[1] == doctest::Approx(6 * 1.5));    // f_xy
    CHECK(h[2] == doctest::Approx(6 * 1.5));
    CHECK(h[3] == doctest::Approx(0.0));
}

TEST_CASE("moment identity residual vanishes for pure diffusion") {
    // dx = dB: d/dt E[x^2] = sigma^2 holds exactly for the Euler chain
    SdeSystem sys;
    sys.dimension = 1;
    sys.drift = [](const std::vector<double>&, double, std::vector<double>& G) { G[0] = 0.0; };
    sys.diffusion = [](const std::vector<double>&, double, std::vector<double>& F) {
        F[0] = 1.0;
    };
    const double dt = 1e-2;
    const std::size_t steps = 100;
    std::vector<double> times;
    for (std::size_t k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * dt);
    auto fn = [&](std::uint64_t sid, std::vector<double>& out) {
        NoisePath noise = sample_noise_path(1, dt, steps, 1.0, {42, sid});
        Trajectory traj = integrate_ito(sys, {0.0}, noise);
        if (traj.aborted) return false;
        for (std::size_t k = 0; k <= steps; ++k) out[k] = traj.states[k][0];
        return true;
    };
    EnsembleOptions opt;
    opt.n_trajectories = 2000;
    opt.keep_states = true;
    EnsembleStats st = run_ensemble(fn, 1, times, opt);

    Polynomial x2 = Polynomial::monomial(1, {2});
    auto residuals = fokker_planck_moment_residual(st, sys, 1.0, {x2});
    REQUIRE(residuals.size() == 1);
    const FpResidualSeries& r = residuals[0];
    REQUIRE(!r.residual.empty());
    for (std::size_t k = 0; k < r.residual.size(); ++k)
        CHECK(r.residual[k] < 5.0 * r.stderr_[k] + 1e-12);
}
