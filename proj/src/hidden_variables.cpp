#include "collapse/hidden_variables.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace collapse {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

namespace {

void check_unit(const Vec3& v, const char* what) {
    if (std::abs(v.norm() - 1.0) > 1e-12)
        throw std::invalid_argument(std::string(what) + " must be a unit vector");
}

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

Vec3 scaled(const Vec3& v, double s) { return {v.x * s, v.y * s, v.z * s}; }

Vec3 unit_perpendicular(const Vec3& n) {
    // helper axis with the smallest overlap keeps the cross product well away
    // from zero
    Vec3 helper{1.0, 0.0, 0.0};
    double ax = std::abs(n.x), ay = std::abs(n.y), az = std::abs(n.z);
    if (ay <= ax && ay <= az) helper = {0.0, 1.0, 0.0};
    else if (az <= ax && az <= ay) helper = {0.0, 0.0, 1.0};
    Vec3 e = cross(helper, n);
    return scaled(e, 1.0 / e.norm());
}

// Legendre nodes/weights on [-1,1] by Newton iteration on the recurrence.
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double p1 = 1.0, p2 = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            p1 = 1.0;
            p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                double jj = static_cast<double>(j);
                p1 = ((2.0 * jj + 1.0) * x * p2 - jj * p3) / (jj + 1.0);
            }
            double dp = static_cast<double>(n) * (x * p1 - p2) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) {
                p1 = 1.0;
                p2 = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    double p3 = p2;
                    p2 = p1;
                    double jj = static_cast<double>(j);
                    p1 = ((2.0 * jj + 1.0) * x * p2 - jj * p3) / (jj + 1.0);
                }
                break;
            }
        }
        double dp = static_cast<double>(n) * (x * p1 - p2) / (x * x - 1.0);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

// integral of cos(t) sin(t) [arc(t)/(2pi)] * 2 dt over [lo, hi] with the
// azimuth arc at each Gauss-Legendre node; `mode` 0: full arc, 1: none,
// 2: 2·arccos(-cot(theta) cot(t))
double polar_segment(double lo, double hi, int mode, double cot_theta, std::size_t n_nodes) {
    if (hi <= lo) return 0.0;
    if (mode == 1) return 0.0;
    std::vector<double> xs, ws;
    gauss_legendre(n_nodes, xs, ws);
    double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double sum = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double t = mid + half * xs[i];
        double arc = 2.0 * M_PI;
        if (mode == 2) {
            double c = std::clamp(-cot_theta * (std::cos(t) / std::sin(t)), -1.0, 1.0);
            arc = 2.0 * std::acos(c);
        }
        sum += ws[i] * std::cos(t) * std::sin(t) * arc;
    }
    return half * sum / M_PI;
}

}  // namespace

Vec3 sample_hidden(const Vec3& n_hat, RngStream& rng) {
    check_unit(n_hat, "n_hat");
    double theta = std::asin(std::sqrt(rng.uniform()));  // CDF sin^2
    double phi = 2.0 * M_PI * rng.uniform();
    Vec3 e1 = unit_perpendicular(n_hat);
    Vec3 e2 = cross(n_hat, e1);
    double s = std::sin(theta);
    Vec3 r{n_hat.x * std::cos(theta) + s * (e1.x * std::cos(phi) + e2.x * std::sin(phi)),
           n_hat.y * std::cos(theta) + s * (e1.y * std::cos(phi) + e2.y * std::sin(phi)),
           n_hat.z * std::cos(theta) + s * (e1.z * std::cos(phi) + e2.z * std::sin(phi))};
    double inv = 1.0 / r.norm();
    return scaled(r, inv);
}

SpinOutcome measure(const Vec3& r_hat, const Vec3& m_hat) {
    check_unit(r_hat, "r_hat");
    check_unit(m_hat, "m_hat");
    return r_hat.dot(m_hat) >= 0.0 ? SpinOutcome::Up : SpinOutcome::Down;
}

double outcome_probability_quadrature(const Vec3& n_hat, const Vec3& m_hat,
                                      std::size_t n_polar, std::size_t n_azimuthal) {
    check_unit(n_hat, "n_hat");
    check_unit(m_hat, "m_hat");
    if (n_polar < 200 || n_azimuthal < 400)
        throw std::invalid_argument("quadrature: need >= 200 polar and >= 400 azimuthal nodes");

    double ct = std::clamp(n_hat.dot(m_hat), -1.0, 1.0);
    double theta = std::acos(ct);
    double st = std::sin(theta);
    if (st < 1e-12) return theta < M_PI / 2.0 ? 1.0 : 0.0;
    double cot_theta = ct / st;

    // admissible azimuth arc is full below the opening angle when the axes
    // are aligned (theta < pi/2) and empty below it when they are opposed
    double split = std::abs(M_PI / 2.0 - theta);
    int first_mode = theta < M_PI / 2.0 ? 0 : 1;
    double p = polar_segment(0.0, split, first_mode, cot_theta, n_polar);
    p += polar_segment(split, M_PI / 2.0, 2, cot_theta, n_polar);
    return p;
}

}  // namespace collapse
