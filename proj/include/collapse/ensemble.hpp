#pragma once
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "collapse/sde.hpp"

namespace collapse {

// Sparse multivariate polynomial sum_j coeff_j * prod_n x_n^{e_jn}.
// Exact gradients/hessians keep the FP adjoint evaluation bias-free.
struct Polynomial {
    struct Term {
        double coeff = 0.0;
        std::vector<unsigned> exponents;  // one entry per state variable
    };
    std::size_t dim = 0;
    std::vector<Term> terms;

    double eval(const std::vector<double>& x) const;
    void gradient(const std::vector<double>& x, std::vector<double>& g) const;
    void hessian(const std::vector<double>& x, std::vector<double>& h) const;  // row-major

    static Polynomial constant(std::size_t dim, double c);
    static Polynomial monomial(std::size_t dim, std::vector<unsigned> exponents,
                               double coeff = 1.0);
};

struct MomentSeries {
    std::vector<double> mean;    // per time
    std::vector<double> stderr_; // sample std / sqrt(n)
};

// Per-time moment accumulators over an ensemble of trajectories.
// keep_states retains the full (time x trajectory) state table so
// post-hoc diagnostics (FP residuals, histograms at new bin counts)
// can be evaluated without re-running.
struct EnsembleStats {
    std::vector<double> times;
    std::size_t dim = 0;
    std::size_t n_trajectories = 0;
    std::size_t n_aborted = 0;
    double max_abs_sum_minus_one = 0.0;  // worst |sum_n x_n - 1| over all samples

    std::vector<MomentSeries> component;        // E[x_n], per n
    std::vector<MomentSeries> cross;            // E[x_n x_m], n < m, lexicographic
    std::vector<MomentSeries> self_product;     // E[x_n (1 - x_n)], per n
    std::vector<std::vector<std::vector<double>>> histograms;  // [time][n][bin]
    std::size_t histogram_bins = 0;
    double histogram_lo = 0.0, histogram_hi = 1.0;

    bool keep_states = false;
    // states[time][trajectory * dim + n]; filled only when keep_states
    std::vector<std::vector<double>> states;

    std::size_t cross_index(std::size_t n, std::size_t m) const;
};

struct EnsembleOptions {
    std::size_t n_trajectories = 0;
    std::uint64_t master_seed = 0;
    std::uint64_t stream_offset = 0;   // first stream_id used
    std::size_t record_stride = 1;     // record every k-th step
    std::size_t histogram_bins = 0;    // 0 = no histograms
    double histogram_lo = 0.0, histogram_hi = 1.0;
    bool keep_states = false;
    std::size_t n_workers = 1;
    std::size_t block_size = 256;      // reduction granularity, worker-count independent
};

// A trajectory source: fills `out` with the state at each recorded time
// (n_times rows of dim values) for the given stream id. Returns false if
// the trajectory aborted (excluded from moments, counted).
using TrajectoryFn =
    std::function<bool(std::uint64_t stream_id, std::vector<double>& out)>;

// Runs trajectories in fixed-size blocks and merges block sums in block
// order, so results are bitwise independent of n_workers.
EnsembleStats run_ensemble(const TrajectoryFn& fn, std::size_t dim,
                           const std::vector<double>& times, const EnsembleOptions& opt);

struct FpResidualSeries {
    Polynomial poly;
    std::vector<double> times;      // interior times
    std::vector<double> residual;   // |d/dt E[f] - E[L+ f]|
    std::vector<double> stderr_;    // stderr of the per-trajectory estimator
};

// Residual of the Fokker-Planck moment identity d/dt E[f] = E[G.grad f
// + (sigma^2/2) (F F^T) : hess f], estimated per trajectory with central
// differences on the recorded grid. Requires keep_states.
std::vector<FpResidualSeries> fokker_planck_moment_residual(
    const EnsembleStats& stats, const SdeSystem& system, double sigma,
    const std::vector<Polynomial>& test_polynomials);

}  // namespace collapse
