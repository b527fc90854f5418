#include "collapse/fp_two_state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace collapse {

double FpTwoState::stability_limit() const {
    double amax = 0.0;
    for (double a : diffusion) amax = std::max(amax, a);
    if (amax == 0.0) return std::numeric_limits<double>::infinity();
    return h() * h() / (2.0 * amax);
}

std::vector<double> fp_delta_density(std::size_t m_cells, double x0) {
    if (x0 < 0.0 || x0 > 1.0) throw std::invalid_argument("fp: x0 outside [0,1]");
    std::vector<double> p(m_cells + 1, 0.0);
    double h = 1.0 / static_cast<double>(m_cells);
    std::size_t i = static_cast<std::size_t>(std::llround(x0 / h));
    if (i > m_cells) i = m_cells;
    double w = (i == 0 || i == m_cells) ? 0.5 * h : h;
    p[i] = 1.0 / w;
    return p;
}

std::vector<double> fp_logistic_diffusion(std::size_t m_cells, double rate) {
    std::vector<double> a(m_cells + 1);
    double h = 1.0 / static_cast<double>(m_cells);
    for (std::size_t i = 0; i <= m_cells; ++i) {
        double x = static_cast<double>(i) * h;
        a[i] = rate * x * (1.0 - x);
    }
    return a;
}

namespace {

void validate(const FpTwoState& spec) {
    const std::size_t M = spec.m_cells;
    if (M < 4) throw std::invalid_argument("fp: need at least 4 cells");
    if (spec.diffusion.size() != M + 1 || spec.p.size() != M + 1)
        throw std::invalid_argument("fp: diffusion and p must have M+1 nodes");
    for (double a : spec.diffusion)
        if (a < 0.0 || !std::isfinite(a))
            throw std::invalid_argument("fp: diffusion must be finite and >= 0");
    if (spec.boundary == FpBoundary::SelfAbsorbing &&
        (spec.diffusion.front() != 0.0 || spec.diffusion.back() != 0.0))
        throw std::invalid_argument("fp: self-absorbing mode needs A(0)=A(1)=0");
    if (spec.dt_pde <= 0.0) throw std::invalid_argument("fp: dt_pde must be > 0");
    if (spec.dt_pde > spec.stability_limit() * (1.0 + 1e-12))
        throw std::invalid_argument("fp: dt_pde exceeds the stability bound h^2/(2 max A)");
}

double moment_x_one_minus_x(const FpTwoState& spec, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i <= spec.m_cells; ++i) {
        double x = spec.node(i);
        s += spec.cell_width(i) * x * (1.0 - x) * p[i];
    }
    return s;
}

double total_mass(const FpTwoState& spec, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i <= spec.m_cells; ++i) s += spec.cell_width(i) * p[i];
    return s;
}

}  // namespace

FpResult fp_solve_two_state(const FpTwoState& spec, const std::vector<double>& record_times) {
    validate(spec);
    if (record_times.empty()) throw std::invalid_argument("fp: no record times");
    for (std::size_t k = 1; k < record_times.size(); ++k)
        if (record_times[k] <= record_times[k - 1])
            throw std::invalid_argument("fp: record times must be strictly increasing");
    if (record_times.front() < 0.0)
        throw std::invalid_argument("fp: record times must be >= 0");

    const std::size_t M = spec.m_cells;
    const double h = spec.h();
    const bool explicit_abs = spec.boundary == FpBoundary::ExplicitAbsorbing;

    std::vector<double> p = spec.p;
    if (explicit_abs) p[0] = p[M] = 0.0;
    std::vector<double> ap(M + 1), flux(M + 2);  // flux[i] = interface i-1/2
    double abs_left = 0.0, abs_right = 0.0;

    FpResult out;
    out.grid_h = h;
    out.m_cells = M;
    auto record = [&](double t) {
        out.times.push_back(t);
        out.densities.push_back(p);
        out.moment_x1x2.push_back(moment_x_one_minus_x(spec, p));
        out.mass.push_back(total_mass(spec, p));
        out.absorbed_left.push_back(abs_left);
        out.absorbed_right.push_back(abs_right);
    };

    double t = 0.0;
    std::size_t k0 = 0;
    if (record_times.front() == 0.0) {
        record(0.0);
        k0 = 1;
    }

    for (std::size_t k = k0; k < record_times.size(); ++k) {
        double span = record_times[k] - t;
        auto n_sub = static_cast<std::size_t>(std::ceil(span / spec.dt_pde - 1e-12));
        if (n_sub == 0) n_sub = 1;
        double dt = span / static_cast<double>(n_sub);
        for (std::size_t s = 0; s < n_sub; ++s) {
            for (std::size_t i = 0; i <= M; ++i) ap[i] = spec.diffusion[i] * p[i];
            flux[0] = flux[M + 1] = 0.0;
            for (std::size_t i = 1; i <= M; ++i) flux[i] = (ap[i] - ap[i - 1]) / h;
            if (explicit_abs) {
                // mass crossing the end interfaces leaves the domain
                abs_left += dt * flux[1];
                abs_right -= dt * flux[M];
                for (std::size_t i = 1; i < M; ++i)
                    p[i] += dt * (flux[i + 1] - flux[i]) / h;
                p[0] = p[M] = 0.0;
            } else {
                for (std::size_t i = 0; i <= M; ++i)
                    p[i] += dt * (flux[i + 1] - flux[i]) / spec.cell_width(i);
            }
        }
        t = record_times[k];
        record(t);
    }
    return out;
}

FpResult fp_solve_two_state(const FpTwoState& spec, double t_final, std::size_t n_records) {
    if (t_final <= 0.0) throw std::invalid_argument("fp: t_final must be > 0");
    if (n_records < 1) n_records = 1;
    std::vector<double> times(n_records + 1);
    for (std::size_t k = 0; k <= n_records; ++k)
        times[k] = t_final * static_cast<double>(k) / static_cast<double>(n_records);
    return fp_solve_two_state(spec, times);
}

FpComparison compare_sde_to_fp(const EnsembleStats& stats, const FpResult& pde,
                               std::size_t comp) {
    if (stats.histogram_bins == 0)
        throw std::invalid_argument("compare_sde_to_fp: stats carry no histograms");
    if (stats.histogram_lo != 0.0 || stats.histogram_hi != 1.0)
        throw std::invalid_argument("compare_sde_to_fp: histogram range must be [0,1]");
    if (comp >= stats.dim) throw std::invalid_argument("compare_sde_to_fp: bad component");
    if (stats.times.size() != pde.times.size())
        throw std::invalid_argument("compare_sde_to_fp: time grids differ in length");
    for (std::size_t k = 0; k < stats.times.size(); ++k)
        if (std::abs(stats.times[k] - pde.times[k]) > 1e-9)
            throw std::invalid_argument("compare_sde_to_fp: time grids do not match");

    const std::size_t B = stats.histogram_bins;
    const std::size_t M = pde.m_cells;
    const double h = pde.grid_h;
    const double bw = 1.0 / static_cast<double>(B);
    const auto n = static_cast<double>(stats.n_trajectories - stats.n_aborted);

    FpComparison cmp;
    cmp.times = stats.times;
    cmp.bin_width = bw;
    for (std::size_t k = 0; k < stats.times.size(); ++k) {
        // PDE mass per bin: p is piecewise constant over node-centered cells
        std::vector<double> pmass(B, 0.0);
        for (std::size_t i = 0; i <= M; ++i) {
            double lo = (i == 0) ? 0.0 : (static_cast<double>(i) - 0.5) * h;
            double hi = (i == M) ? 1.0 : (static_cast<double>(i) + 0.5) * h;
            double pi = pde.densities[k][i];
            if (pi == 0.0) continue;
            auto b0 = static_cast<std::size_t>(lo / bw);
            auto b1 = static_cast<std::size_t>(std::min(hi / bw, static_cast<double>(B - 1)));
            for (std::size_t b = b0; b <= b1; ++b) {
                double seg = std::min(hi, (static_cast<double>(b) + 1.0) * bw) -
                             std::max(lo, static_cast<double>(b) * bw);
                if (seg > 0.0) pmass[b] += pi * seg;
            }
        }
        double l1 = 0.0, linf = 0.0, tol = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            double q = stats.histograms[k][comp][b];
            double d = std::abs(q - pmass[b]);
            l1 += d;
            linf = std::max(linf, d);
            // expected |hist - truth| per bin under binomial sampling
            tol += std::sqrt(2.0 / M_PI) * std::sqrt(std::max(pmass[b] * (1.0 - pmass[b]), 0.0) / n);
        }
        cmp.l1.push_back(l1);
        cmp.linf.push_back(linf);
        cmp.mc_tolerance.push_back(tol);
    }
    return cmp;
}

}  // namespace collapse
