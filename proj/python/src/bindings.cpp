// Python face of the native core: a handful of closed-form evaluators and
// small simulation drivers that are cheap enough for notebook-scale use.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "collapse/csl.hpp"
#include "collapse/discrete_collapse.hpp"
#include "collapse/gamblers_ruin.hpp"
#include "collapse/hidden_variables.hpp"
#include "collapse/rng.hpp"

namespace py = pybind11;
using namespace collapse;

namespace {

Vec3 tilted(double angle) { return Vec3{std::sin(angle), 0.0, std::cos(angle)}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "native core for collapse-lab";
    m.attr("__version__") = "0.1.0";

    py::class_<RngStream>(m, "RngStream",
                          "Counter-based stream; (seed, stream) fixes the whole sequence.")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"),
             py::arg("stream") = 0)
        .def("uniform", &RngStream::uniform, "Uniform draw in [0, 1).")
        .def("gaussian", &RngStream::gaussian, "Standard normal draw.")
        .def("next_u64", &RngStream::next_u64, "Raw 64-bit word.");

    m.def(
        "win_probability",
        [](double x, double delta) {
            return static_cast<double>(win_probability_exact(x, delta));
        },
        py::arg("x"), py::arg("delta"),
        "Win odds for the fair wealth game from fraction x at stake delta, "
        "solved in exact rational arithmetic and returned as a float.");

    m.def(
        "win_probability_exact",
        [](std::int64_t k, std::int64_t total_quanta) {
            rational q = win_probability_exact(k, total_quanta);
            return py::make_tuple(boost::multiprecision::numerator(q).str(),
                                  boost::multiprecision::denominator(q).str());
        },
        py::arg("k"), py::arg("total_quanta"),
        "Exact win odds as a (numerator, denominator) pair of decimal strings.");

    m.def(
        "expected_duration",
        [](std::int64_t k, std::int64_t total_quanta) {
            return static_cast<double>(expected_duration_exact(k, total_quanta));
        },
        py::arg("k"), py::arg("total_quanta"),
        "Expected toss count from k of total_quanta under unit stakes.");

    m.def(
        "spin_up_probability",
        [](double angle, std::size_t n_polar, std::size_t n_azimuthal) {
            return outcome_probability_quadrature(Vec3{0.0, 0.0, 1.0}, tilted(angle),
                                                  n_polar, n_azimuthal);
        },
        py::arg("angle"), py::arg("n_polar") = 400, py::arg("n_azimuthal") = 800,
        "Quadrature of the hidden-variable up-probability at the given "
        "angle between preparation and measurement axes.");

    m.def(
        "spin_up_frequency",
        [](double angle, std::size_t n_draws, std::uint64_t seed) {
            if (n_draws == 0) throw std::invalid_argument("n_draws must be positive");
            RngStream rng(seed, 0);
            const Vec3 n_hat{0.0, 0.0, 1.0};
            const Vec3 m_hat = tilted(angle);
            std::size_t ups = 0;
            for (std::size_t i = 0; i < n_draws; ++i)
                ups += (measure(sample_hidden(n_hat, rng), m_hat) == SpinOutcome::Up);
            return static_cast<double>(ups) / static_cast<double>(n_draws);
        },
        py::arg("angle"), py::arg("n_draws") = 100000, py::arg("seed") = 0,
        "Monte Carlo estimate of the same up-probability.");

    m.def(
        "offdiagonal_magnitude",
        [](double x1, double lam, double t, double a1, double a2) {
            if (x1 <= 0.0 || x1 >= 1.0)
                throw std::invalid_argument("x1 must lie strictly inside (0, 1)");
            CommutingCslModel mdl;
            mdl.eigenvalues = {a1, a2};
            mdl.lambda = lam;
            std::vector<cplx> c0{cplx(std::sqrt(x1), 0.0), cplx(std::sqrt(1.0 - x1), 0.0)};
            return std::abs(density_matrix_analytic(mdl, c0, t)(0, 1));
        },
        py::arg("x1"), py::arg("lam"), py::arg("t"), py::arg("a1") = 0.0,
        py::arg("a2") = 1.0,
        "Closed-form |rho_12(t)| of the two-level commuting model started "
        "from populations (x1, 1 - x1).");

    m.def(
        "born_frequency",
        [](double x1, std::size_t n_traj, double dt, double t_final, std::uint64_t seed) {
            if (x1 <= 0.0 || x1 >= 1.0)
                throw std::invalid_argument("x1 must lie strictly inside (0, 1)");
            if (n_traj == 0) throw std::invalid_argument("n_traj must be positive");
            CollapseConfig c;
            c.omega = {0.0, 0.0};
            c.alpha = {cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0)};
            c.dt = dt;
            c.n_steps = static_cast<std::size_t>(std::llround(t_final / dt));
            const std::vector<double> x0{x1, 1.0 - x1};
            std::size_t wins = 0, decided = 0;
            for (std::size_t sid = 0; sid < n_traj; ++sid) {
                auto traj =
                    evolve_sde_amplitudes(c, x0, RngStreamPolicy{seed, sid}, c.n_steps);
                if (traj.aborted) continue;
                auto out = detect_outcome(traj);
                if (!out.collapsed()) continue;
                decided += 1;
                wins += (out.outcome_index == 0);
            }
            if (decided == 0) throw std::runtime_error("no trajectory reached an outcome");
            return py::make_tuple(
                static_cast<double>(wins) / static_cast<double>(decided), decided);
        },
        py::arg("x1"), py::arg("n_traj") = 400, py::arg("dt") = 0.002,
        py::arg("t_final") = 6.0, py::arg("seed") = 0,
        "Simulated frequency of the first outcome in the two-state "
        "noise-driven model; returns (frequency, decided_count).");
}
