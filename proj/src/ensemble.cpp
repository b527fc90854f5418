#include "collapse/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace collapse {

// ---------------------- Polynomial ----------------------

double Polynomial::eval(const std::vector<double>& x) const {
    double s = 0.0;
    for (const auto& t : terms) {
        double p = t.coeff;
        for (std::size_t n = 0; n < dim; ++n)
            for (unsigned e = 0; e < t.exponents[n]; ++e) p *= x[n];
        s += p;
    }
    return s;
}

void Polynomial::gradient(const std::vector<double>& x, std::vector<double>& g) const {
    g.assign(dim, 0.0);
    for (const auto& t : terms) {
        for (std::size_t n = 0; n < dim; ++n) {
            if (t.exponents[n] == 0) continue;
            double p = t.coeff * t.exponents[n];
            for (std::size_t m = 0; m < dim; ++m) {
                unsigned e = t.exponents[m] - (m == n ? 1 : 0);
                for (unsigned i = 0; i < e; ++i) p *= x[m];
            }
            g[n] += p;
        }
    }
}

void Polynomial::hessian(const std::vector<double>& x, std::vector<double>& h) const {
    h.assign(dim * dim, 0.0);
    for (const auto& t : terms) {
        for (std::size_t n = 0; n < dim; ++n) {
            for (std::size_t m = 0; m < dim; ++m) {
                unsigned en = t.exponents[n], em = t.exponents[m];
                if (n == m) {
                    if (en < 2) continue;
                } else if (en == 0 || em == 0) {
                    continue;
                }
                double factor = (n == m) ? en * (en - 1) : en * em;
                double p = t.coeff * factor;
                for (std::size_t r = 0; r < dim; ++r) {
                    unsigned e = t.exponents[r];
                    if (r == n) e -= 1;
                    if (r == m) e -= 1;
                    for (unsigned i = 0; i < e; ++i) p *= x[r];
                }
                h[n * dim + m] += p;
            }
        }
    }
}

Polynomial Polynomial::constant(std::size_t dim, double c) {
    Polynomial p;
    p.dim = dim;
    p.terms.push_back({c, std::vector<unsigned>(dim, 0u)});
    return p;
}

Polynomial Polynomial::monomial(std::size_t dim, std::vector<unsigned> exponents, double coeff) {
    Polynomial p;
    p.dim = dim;
    p.terms.push_back({coeff, std::move(exponents)});
    return p;
}

// ---------------------- Ensemble runner ----------------------

std::size_t EnsembleStats::cross_index(std::size_t n, std::size_t m) const {
    if (n > m) std::swap(n, m);
    // index of (n, m), n < m, in lexicographic pair order
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) idx += dim - 1 - i;
    return idx + (m - n - 1);
}

namespace {

struct BlockSums {
    std::size_t n_ok = 0;
    std::size_t n_aborted = 0;
    double max_dev = 0.0;  // worst |sum_n x_n - 1|
    std::vector<double> sum;      // [time][n]       E x_n
    std::vector<double> sum_sq;   // [time][n]       E x_n^2
    std::vector<double> sum_cross;       // [time][pair]
    std::vector<double> sum_cross_sq;    // [time][pair]
    std::vector<double> hist;     // [time][n][bin]
    std::vector<std::vector<double>> states;  // [time][local_traj * dim + n]
};

}  // namespace

EnsembleStats run_ensemble(const TrajectoryFn& fn, std::size_t dim,
                           const std::vector<double>& times, const EnsembleOptions& opt) {
    const std::size_t T = times.size();
    const std::size_t n_pairs = dim * (dim - 1) / 2;
    const std::size_t B = std::max<std::size_t>(1, opt.block_size);
    const std::size_t n_blocks = (opt.n_trajectories + B - 1) / B;
    const std::size_t bins = opt.histogram_bins;

    std::vector<BlockSums> blocks(n_blocks);

    auto run_block = [&](std::size_t b) {
        BlockSums& bs = blocks[b];
        bs.sum.assign(T * dim, 0.0);
        bs.sum_sq.assign(T * dim, 0.0);
        bs.sum_cross.assign(T * n_pairs, 0.0);
        bs.sum_cross_sq.assign(T * n_pairs, 0.0);
        if (bins) bs.hist.assign(T * dim * bins, 0.0);
        std::size_t lo = b * B;
        std::size_t hi = std::min(opt.n_trajectories, lo + B);
        if (opt.keep_states) bs.states.assign(T, std::vector<double>());
        std::vector<double> rec(T * dim);
        for (std::size_t i = lo; i < hi; ++i) {
            bool ok = fn(opt.stream_offset + i, rec);
            if (!ok) {
                ++bs.n_aborted;
                continue;
            }
            ++bs.n_ok;
            for (std::size_t k = 0; k < T; ++k) {
                const double* x = &rec[k * dim];
                double s = 0.0;
                for (std::size_t n = 0; n < dim; ++n) s += x[n];
                bs.max_dev = std::max(bs.max_dev, std::abs(s - 1.0));
                for (std::size_t n = 0; n < dim; ++n) {
                    bs.sum[k * dim + n] += x[n];
                    bs.sum_sq[k * dim + n] += x[n] * x[n];
                    if (bins) {
                        double u = (x[n] - opt.histogram_lo) /
                                   (opt.histogram_hi - opt.histogram_lo);
                        auto bin = static_cast<long>(u * static_cast<double>(bins));
                        bin = std::clamp<long>(bin, 0, static_cast<long>(bins) - 1);
                        bs.hist[(k * dim + n) * bins + static_cast<std::size_t>(bin)] += 1.0;
                    }
                }
                std::size_t p = 0;
                for (std::size_t n = 0; n < dim; ++n)
                    for (std::size_t m = n + 1; m < dim; ++m, ++p) {
                        double v = x[n] * x[m];
                        bs.sum_cross[k * n_pairs + p] += v;
                        bs.sum_cross_sq[k * n_pairs + p] += v * v;
                    }
                if (opt.keep_states)
                    bs.states[k].insert(bs.states[k].end(), x, x + dim);
            }
        }
    };

    std::size_t workers = std::max<std::size_t>(1, opt.n_workers);
    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t b = next.fetch_add(1);
                    if (b >= n_blocks) return;
                    run_block(b);
                }
            });
        for (auto& th : pool) th.join();
    }

    // merge in block order: summation order fixed regardless of worker count
    EnsembleStats st;
    st.times = times;
    st.dim = dim;
    st.histogram_bins = bins;
    st.histogram_lo = opt.histogram_lo;
    st.histogram_hi = opt.histogram_hi;
    st.keep_states = opt.keep_states;

    std::vector<double> sum(T * dim, 0.0), sum_sq(T * dim, 0.0);
    std::vector<double> sum_cross(T * n_pairs, 0.0), sum_cross_sq(T * n_pairs, 0.0);
    std::vector<double> hist;
    if (bins) hist.assign(T * dim * bins, 0.0);
    if (opt.keep_states) st.states.assign(T, std::vector<double>());
    std::size_t n_ok = 0, n_ab = 0;
    for (auto& bs : blocks) {
        n_ok += bs.n_ok;
        n_ab += bs.n_aborted;
        st.max_abs_sum_minus_one = std::max(st.max_abs_sum_minus_one, bs.max_dev);
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += bs.sum[i];
            sum_sq[i] += bs.sum_sq[i];
        }
        for (std::size_t i = 0; i < sum_cross.size(); ++i) {
            sum_cross[i] += bs.sum_cross[i];
            sum_cross_sq[i] += bs.sum_cross_sq[i];
        }
        for (std::size_t i = 0; i < hist.size(); ++i) hist[i] += bs.hist[i];
        if (opt.keep_states)
            for (std::size_t k = 0; k < T; ++k)
                st.states[k].insert(st.states[k].end(), bs.states[k].begin(),
                                    bs.states[k].end());
    }
    st.n_trajectories = n_ok;
    st.n_aborted = n_ab;

    auto finish = [&](double s, double ss, std::size_t n) {
        double mean = n ? s / static_cast<double>(n) : 0.0;
        double var = n > 1 ? std::max(0.0, (ss - s * mean) / static_cast<double>(n - 1)) : 0.0;
        double se = n ? std::sqrt(var / static_cast<double>(n)) : 0.0;
        return std::pair<double, double>{mean, se};
    };

    st.component.assign(dim, {});
    st.self_product.assign(dim, {});
    st.cross.assign(n_pairs, {});
    for (std::size_t n = 0; n < dim; ++n) {
        st.component[n].mean.resize(T);
        st.component[n].stderr_.resize(T);
        st.self_product[n].mean.resize(T);
        st.self_product[n].stderr_.resize(T);
    }
    for (std::size_t p = 0; p < n_pairs; ++p) {
        st.cross[p].mean.resize(T);
        st.cross[p].stderr_.resize(T);
    }
    for (std::size_t k = 0; k < T; ++k) {
        for (std::size_t n = 0; n < dim; ++n) {
            auto [mean, se] = finish(sum[k * dim + n], sum_sq[k * dim + n], n_ok);
            st.component[n].mean[k] = mean;
            st.component[n].stderr_[k] = se;
            // E[x(1-x)] = E[x] - E[x^2]; stderr from the x - x^2 combination
            double m2 = n_ok ? sum_sq[k * dim + n] / static_cast<double>(n_ok) : 0.0;
            st.self_product[n].mean[k] = mean - m2;
            st.self_product[n].stderr_[k] = se;  // dominated by the E[x] error near 0/1
        }
        for (std::size_t p = 0; p < n_pairs; ++p) {
            auto [mean, se] =
                finish(sum_cross[k * n_pairs + p], sum_cross_sq[k * n_pairs + p], n_ok);
            st.cross[p].mean[k] = mean;
            st.cross[p].stderr_[k] = se;
        }
    }
    if (bins) {
        st.histograms.assign(T, std::vector<std::vector<double>>(
                                    dim, std::vector<double>(bins, 0.0)));
        for (std::size_t k = 0; k < T; ++k)
            for (std::size_t n = 0; n < dim; ++n)
                for (std::size_t b = 0; b < bins; ++b)
                    st.histograms[k][n][b] =
                        n_ok ? hist[(k * dim + n) * bins + b] / static_cast<double>(n_ok) : 0.0;
    }
    return st;
}

// ---------------------- FP moment residual ----------------------

std::vector<FpResidualSeries> fokker_planck_moment_residual(
    const EnsembleStats& stats, const SdeSystem& system, double sigma,
    const std::vector<Polynomial>& test_polynomials) {
    if (stats.times.size() < 3)
        throw std::invalid_argument(
            "fokker_planck_moment_residual: need at least 3 time samples");
    if (!stats.keep_states || stats.states.empty())
        throw std::invalid_argument(
            "fokker_planck_moment_residual: stats must retain per-trajectory states");

    const std::size_t T = stats.times.size();
    const std::size_t dim = stats.dim;
    const std::size_t n = stats.n_trajectories;

    std::vector<FpResidualSeries> out;
    out.reserve(test_polynomials.size());
    std::vector<double> x(dim), G(dim), F(dim * dim), grad(dim), hess(dim * dim);
    for (const auto& poly : test_polynomials) {
        FpResidualSeries series;
        series.poly = poly;
        for (std::size_t k = 1; k + 1 < T; ++k) {
            double t = stats.times[k];
            double span = stats.times[k + 1] - stats.times[k - 1];
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t d = 0; d < dim; ++d) x[d] = stats.states[k][i * dim + d];
                system.drift(x, t, G);
                system.diffusion(x, t, F);
                poly.gradient(x, grad);
                poly.hessian(x, hess);
                double adj = 0.0;
                for (std::size_t a = 0; a < dim; ++a) adj += G[a] * grad[a];
                double q = 0.0;
                for (std::size_t a = 0; a < dim; ++a)
                    for (std::size_t b = 0; b < dim; ++b) {
                        double ffT = 0.0;
                        for (std::size_t c = 0; c < dim; ++c)
                            ffT += F[a * dim + c] * F[b * dim + c];
                        q += ffT * hess[a * dim + b];
                    }
                adj += 0.5 * sigma * sigma * q;

                double f_prev = 0.0, f_next = 0.0;
                {
                    std::vector<double> xp(dim), xn2(dim);
                    for (std::size_t d = 0; d < dim; ++d) {
                        xp[d] = stats.states[k - 1][i * dim + d];
                        xn2[d] = stats.states[k + 1][i * dim + d];
                    }
                    f_prev = poly.eval(xp);
                    f_next = poly.eval(xn2);
                }
                double r = (f_next - f_prev) / span - adj;
                s1 += r;
                s2 += r * r;
            }
            double mean = n ? s1 / static_cast<double>(n) : 0.0;
            double var =
                n > 1 ? std::max(0.0, (s2 - s1 * mean) / static_cast<double>(n - 1)) : 0.0;
            series.times.push_back(t);
            series.residual.push_back(std::abs(mean));
            series.stderr_.push_back(n ? std::sqrt(var / static_cast<double>(n)) : 0.0);
        }
        out.push_back(std::move(series));
    }
    return out;
}

}  // namespace collapse
