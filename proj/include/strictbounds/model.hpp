#pragma once

#include <string>
#include <utility>
#include <vector>

#include "strictbounds/types.hpp"

namespace strictbounds {

inline constexpr double kDefaultRankTol = 1e-10;

// Either a diagonal (the usual case) or a dense SPD noise covariance.
class NoiseCovariance {
public:
    NoiseCovariance() = default;
    static NoiseCovariance diagonal(Vector variances);
    static NoiseCovariance dense(Matrix cov);

    bool is_diagonal() const { return dense_.size() == 0; }
    Index size() const { return is_diagonal() ? diag_.size() : dense_.rows(); }
    const Vector& variances() const { return diag_; }
    const Matrix& matrix() const { return dense_; }
    Matrix to_dense() const;
    // Row/column permutation, used by the spectral invariance checks.
    NoiseCovariance permuted(const std::vector<Index>& order) const;

private:
    Vector diag_;
    Matrix dense_;
};

struct LinearProblem {
    Matrix K;
    NoiseCovariance noise_cov;
    Vector h;
    std::vector<std::string> labels;

    Index n() const { return K.rows(); }
    Index p() const { return K.cols(); }
    // Throws InvalidInput naming the offending field.
    void validate() const;
    // Index of a state label, or of a decimal index string.
    Index index_of(const std::string& label) const;
};

// K_w = L^{-1} K with L L^T = noise_cov. Diagonal covariances keep only diag(L).
class WhitenedProblem {
public:
    Matrix K_w;
    Vector h;

    Index n() const { return K_w.rows(); }
    Index p() const { return K_w.cols(); }

    Vector whiten(const Vector& y) const;        // L^{-1} y
    Vector color(const Vector& z) const;         // L z
    Matrix whiten_columns(const Matrix& M) const; // L^{-1} M
    Matrix chol_L() const;
    bool diagonal_noise() const { return chol_dense_.size() == 0; }

    static WhitenedProblem identity_noise(Matrix K_w, Vector h);

private:
    friend WhitenedProblem whiten(const LinearProblem& problem);
    Vector chol_diag_;
    Matrix chol_dense_;
};

struct SpectralSummary {
    Vector singular_values;
    Index numeric_rank = 0;
    double condition_number = 0.0;
    Matrix U;
    Vector D;
    Matrix V;
};

WhitenedProblem whiten(const LinearProblem& problem);
std::pair<WhitenedProblem, Vector> whiten(const LinearProblem& problem, const Vector& y);

SpectralSummary spectral_summary(const WhitenedProblem& problem, double rank_tol = kDefaultRankTol);
SpectralSummary spectral_summary(const LinearProblem& problem, double rank_tol = kDefaultRankTol);

double apply_functional(const Vector& h, const Vector& x);

// Uniform average over [begin, end) with the two boundary weights halved; sums to one.
Vector averaging_weights(Index p, Index begin, Index end);

// (y - Kx)^T noise_cov^{-1} (y - Kx)
double weighted_residual_sq(const LinearProblem& problem, const Vector& y, const Vector& x);

} // namespace strictbounds
