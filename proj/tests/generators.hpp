#pragma once

// Small hand-rolled generators for property tests. Each test draws from its
// own seeded stream so failures reproduce exactly.

#include <cmath>

#include "strictbounds/bayes.hpp"
#include "strictbounds/model.hpp"
#include "strictbounds/rng.hpp"

namespace gen {

using strictbounds::Index;
using strictbounds::Matrix;
using strictbounds::Rng;
using strictbounds::Vector;

inline Index integer(Rng& rng, Index lo, Index hi) {
    return lo + static_cast<Index>(std::floor(rng.uniform() * static_cast<double>(hi - lo + 1)));
}

inline double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
}

// SPD matrix with eigenvalues in [lo, hi].
inline Matrix spd(Rng& rng, Index p, double lo = 0.2, double hi = 4.0) {
    Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(p, p));
    const Matrix Q = qr.householderQ();
    Vector ev(p);
    for (Index i = 0; i < p; ++i) ev(i) = log_uniform(rng, lo, hi);
    return Q * ev.asDiagonal() * Q.transpose();
}

// Raw problem with a positive diagonal or dense noise covariance.
inline strictbounds::LinearProblem problem(Rng& rng, Index n, Index p, bool dense_noise = false) {
    strictbounds::LinearProblem out;
    out.K = rng.normal_matrix(n, p);
    if (dense_noise)
        out.noise_cov = strictbounds::NoiseCovariance::dense(spd(rng, n, 0.1, 2.0));
    else {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = log_uniform(rng, 0.05, 5.0);
        out.noise_cov = strictbounds::NoiseCovariance::diagonal(v);
    }
    out.h = rng.normal_vector(p);
    return out;
}

inline strictbounds::PriorModel prior(Rng& rng, Index p) {
    return {rng.normal_vector(p), spd(rng, p)};
}

} // namespace gen
