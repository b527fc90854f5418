#pragma once

#include <cstddef>

#include "collapse/rng.hpp"

namespace collapse {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 1.0;
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const;
};

enum class SpinOutcome { Up, Down };

// Hidden point on the upper hemisphere of n_hat, density (n_hat . r_hat)/pi:
// polar angle from inverse CDF sin^2(theta') = u, azimuth uniform.
Vec3 sample_hidden(const Vec3& n_hat, RngStream& rng);

// Up iff r_hat . m_hat >= 0 (the boundary is measure zero; ties go up).
SpinOutcome measure(const Vec3& r_hat, const Vec3& m_hat);

// Deterministic quadrature of (n_hat . r)/pi over the overlap of the two upper
// hemispheres. The polar integral is split at the angle where the admissible
// azimuth arc opens or closes, Gauss-Legendre on each piece; the azimuth arc
// itself has closed form 2·arccos(-cot(theta)·cot(theta')), so the azimuthal
// node count only caps the arc evaluation and the result is exact in phi.
// Requires n_polar >= 200 and n_azimuthal >= 400.
double outcome_probability_quadrature(const Vec3& n_hat, const Vec3& m_hat,
                                      std::size_t n_polar = 400,
                                      std::size_t n_azimuthal = 800);

}  // namespace collapse
