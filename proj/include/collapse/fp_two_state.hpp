#pragma once

#include <cstddef>
#include <vector>

#include "collapse/ensemble.hpp"

namespace collapse {

// One-variable diffusion on [0,1] in the form  dp/dt = d^2/dx^2 [A(x) p].
// Node-centered finite volume: M+1 nodes x_i = i/M, end cells half width.
// Zero exterior flux, so total mass is conserved to machine precision.
//
// SelfAbsorbing: A(0)=A(1)=0 required; mass parks in the end cells on its own.
// ExplicitAbsorbing: p is pinned to 0 at both ends and the flux through each
// end is integrated into absorbed_left / absorbed_right.
enum class FpBoundary { SelfAbsorbing, ExplicitAbsorbing };

struct FpTwoState {
    std::size_t m_cells = 400;       // M; grid has M+1 nodes
    std::vector<double> diffusion;   // A(x_i) >= 0, size M+1
    std::vector<double> p;           // density at nodes, size M+1
    double dt_pde = 0.0;             // explicit step; must satisfy the bound below
    FpBoundary boundary = FpBoundary::SelfAbsorbing;

    double h() const { return 1.0 / static_cast<double>(m_cells); }
    double node(std::size_t i) const { return static_cast<double>(i) * h(); }
    double cell_width(std::size_t i) const {
        return (i == 0 || i == m_cells) ? 0.5 * h() : h();
    }

    // stability bound for the explicit scheme: dt <= h^2 / (2 max A)
    double stability_limit() const;
};

struct FpResult {
    std::vector<double> times;
    std::vector<std::vector<double>> densities;  // p snapshot per recorded time
    std::vector<double> moment_x1x2;             // E[x(1-x)] per recorded time
    std::vector<double> mass;                    // alive mass per recorded time
    std::vector<double> absorbed_left;           // ExplicitAbsorbing only, else 0
    std::vector<double> absorbed_right;
    double grid_h = 0.0;
    std::size_t m_cells = 0;
};

// Density concentrated at the node nearest x0 (unit mass in that node's cell).
std::vector<double> fp_delta_density(std::size_t m_cells, double x0);
// A(x) = rate * x (1 - x), vanishing at both ends.
std::vector<double> fp_logistic_diffusion(std::size_t m_cells, double rate);

// Integrate to each time in record_times (ascending, first may be 0).
// Substeps never exceed dt_pde so the recorded times are hit exactly.
FpResult fp_solve_two_state(const FpTwoState& spec, const std::vector<double>& record_times);
// Uniform recording: n_records intervals over [0, t_final].
FpResult fp_solve_two_state(const FpTwoState& spec, double t_final, std::size_t n_records = 20);

struct FpComparison {
    std::vector<double> times;
    std::vector<double> l1;            // sum_bins |hist - pde bin mass|
    std::vector<double> linf;
    std::vector<double> mc_tolerance;  // expected L1 noise floor of the histogram
    double bin_width = 0.0;
};

// Histogram of component `comp` in `stats` against the PDE density, per time.
// Time grids must agree; histogram range must be [0,1].
FpComparison compare_sde_to_fp(const EnsembleStats& stats, const FpResult& pde,
                               std::size_t comp = 0);

}  // namespace collapse
