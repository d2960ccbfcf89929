#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strictbounds/bayes.hpp"
#include "strictbounds/constraints.hpp"
#include "strictbounds/rng.hpp"

namespace strictbounds {

// Knobs for gen_problem. The whitened operator is K_w = U diag(sigma) V^T with
// Haar factors; sigma decays geometrically over the first p - rank_deficiency
// entries and the rest sit at null_scale * sigma_1. h is orthogonal to the
// null directions, so h^T x stays bounded without constraints.
struct SyntheticSpec {
    Index n = 400;
    Index p = 39;
    double decay = 0.6;
    double top_singular_value = 1.0;
    // When positive, sigma is rescaled so that sqrt(h^T (K_w^T K_w)^+ h) equals this.
    double target_standard_error = 0.0;
    Index rank_deficiency = 1;
    double null_scale = 1e-13;

    // h: uniform average over [functional_begin, functional_end), boundary halved.
    Index functional_begin = 0;
    Index functional_end = 20;

    // Optional nuisance element that shares the weakest direction with h.
    // key_mixing is the squared weight of that element in the direction.
    Index key_index = -1;
    double key_mixing = 0.5;

    // Noise variance per unit of mean signal, one constant per band; observations
    // are split into contiguous bands of near-equal size.
    std::vector<double> band_constants{1e-3, 2e-3, 4e-3};

    // "paper_like" (p = 39: profile, pressure, albedo, aerosol blocks) or "generic".
    std::string state = "generic";
    double mean_misspecification = 1.0; // scales mu_a - mu_x
    double generic_prior_sd = 1.0;
    double generic_correlation = 0.5;

    std::vector<Index> nonnegative; // default constraint indices

    void validate() const;
    static SyntheticSpec paper_like();
};

struct NoiseModel {
    std::vector<Index> band_of; // length n
    std::vector<double> band_constants;
    Vector mean_signal; // floored |K mu_x|

    Vector variances() const;
    void validate() const;
};

struct SyntheticInstance {
    LinearProblem problem;
    GenerativeModel generative;
    PriorModel prior;
    NoiseModel noise;
    ConstraintSet constraints;
};

SyntheticInstance gen_problem(const SyntheticSpec& spec, std::uint64_t seed);

// Four-block state layout: CO2 profile, surface pressure, albedo, aerosols.
struct StateBlocks {
    Index profile = 20, pressure = 1, albedo = 6, aerosol = 12;
    Index pressure_index() const { return profile; }
};
std::vector<std::string> paper_like_labels();

Vector sample_state(const GenerativeModel& gen, Rng& rng);
Vector sample_state(const GenerativeModel& gen, std::uint64_t seed);
Vector sample_noise(const NoiseModel& noise, Rng& rng);
Vector sample_noise(const NoiseModel& noise, std::uint64_t seed);
Vector observe(const LinearProblem& problem, const Vector& x, const Vector& noise_draw);

// Symmetric square root used for sampling: Cholesky when it succeeds, else the
// eigen square root with negative eigenvalues clamped (covers sigma = 0).
Matrix covariance_factor(const Matrix& sigma);

// Closed-form Matern correlation for nu in {1/2, 3/2, 5/2}.
double matern(double nu, double distance, double range);

struct SpatialModel {
    Matrix locations; // m x 2, km
    Matrix nu;        // p x p
    Matrix rho;       // p x p, km
    GenerativeModel base;

    Index sites() const { return locations.rows(); }
    void validate() const;
};

// Regular nx x ny grid with the given spacings, row-major from the origin.
Matrix grid_locations(Index nx, Index ny, double dx, double dy);
// One smoothness and one range for every element pair.
SpatialModel uniform_spatial_model(const GenerativeModel& base, const Matrix& locations, double nu, double range);

// Joint covariance over (site, element), site-major.
Matrix assemble_spatial_covariance(const SpatialModel& spatial);

struct SpatialFactor {
    Matrix L;
    double jitter = 0.0; // absolute diagonal shift that made the Cholesky succeed
};

// Cholesky with jitter 0, then 1e-12 .. 1e-8 times the largest diagonal entry.
SpatialFactor factor_spatial(const SpatialModel& spatial);

Matrix sample_grid(const SpatialModel& spatial, const SpatialFactor& factor, Rng& rng);
Matrix sample_grid(const SpatialModel& spatial, std::uint64_t seed);

} // namespace strictbounds
