#pragma once

#include <utility>

#include "strictbounds/model.hpp"

namespace strictbounds {

struct PriorModel {
    Vector mu_a;
    Matrix sigma_a;

    void validate(Index p) const;
};

struct GenerativeModel {
    Vector mu_x;
    Matrix sigma_x;

    void validate(Index p) const;
};

struct BayesResult {
    Vector x_hat;
    double theta_hat = 0.0;
    double posterior_sd = 0.0;
    double standard_error = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;
    Matrix gain_matrix;      // p x n, acts on raw observations
    Matrix averaging_kernel; // p x p
    Vector bias_multipliers;

    double length() const { return upper - lower; }
};

// Factorizations shared by every retrieval against one (problem, prior) pair.
// With M = K_w^T K_w + Sigma_a^{-1} and u = M^{-1} h:
//   theta_hat = h^T mu_a + (K_w u)^T (y_w - K_w mu_a)
//   sigma^2 = h^T u,  se = ||K_w u||,  m = -Sigma_a^{-1} u.
class BayesOperator {
public:
    BayesOperator(const WhitenedProblem& problem, const PriorModel& prior);

    Vector x_hat(const Vector& y_w) const;
    double theta_hat(const Vector& y_w) const { return offset_ + g_.dot(y_w - K_mu_a_); }
    double posterior_sd() const { return sigma_; }
    double standard_error() const { return se_; }
    const Vector& bias_multipliers() const { return m_; }
    const Vector& whitened_gain() const { return g_; }

    // M^{-1} K_w^T, the gain with respect to whitened observations.
    Matrix whitened_gain_matrix() const;
    Matrix averaging_kernel() const;
    double bias(const Vector& x_true) const { return m_.dot(x_true - mu_a_); }

private:
    // Prior-whitened SVD: K_w L_a = U diag(s) V^T with Sigma_a = L_a L_a^T and s
    // padded with zeros to length p, so M^{-1} = L_a V diag(1 / (1 + s^2)) V^T L_a^T.
    // Working through it avoids forming M, whose condition number can reach
    // 1e15 when the operator spans many decades.
    Matrix L_a_;
    Matrix U_;
    Matrix V_;
    Vector s_;
    Vector mu_a_;
    Vector K_mu_a_; // K_w mu_a
    Vector g_;
    Vector m_;
    double offset_ = 0.0; // h^T mu_a
    double sigma_ = 0.0;
    double se_ = 0.0;
};

BayesResult bayes_retrieve(const LinearProblem& problem, const PriorModel& prior, const Vector& y,
                           double alpha = 0.05);
Vector bias_multipliers(const LinearProblem& problem, const PriorModel& prior);
double bayes_bias(const LinearProblem& problem, const PriorModel& prior, const Vector& x_true);
double bayes_coverage(double bias, double standard_error, double posterior_sd, double alpha = 0.05);

struct BiasDistribution {
    double mean = 0.0;
    double variance = 0.0;
};
BiasDistribution bias_distribution(const LinearProblem& problem, const PriorModel& prior,
                                   const GenerativeModel& generative);
BiasDistribution bias_distribution(const Vector& m, const PriorModel& prior,
                                   const GenerativeModel& generative);

} // namespace strictbounds
