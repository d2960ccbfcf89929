#include "strictbounds/bayes.hpp"

#include <cmath>
#include <string>

#include "strictbounds/error.hpp"
#include "strictbounds/stats.hpp"

namespace strictbounds {

namespace {

void check_square(const Matrix& S, Index p, const char* field) {
    if (S.rows() != p || S.cols() != p)
        throw Error(ErrorKind::InvalidInput, std::string("field '") + field + "': expected " + std::to_string(p) +
                                                 "x" + std::to_string(p) + " matrix");
    if (!S.allFinite()) throw Error(ErrorKind::InvalidInput, std::string("field '") + field + "': non-finite entry");
    if (!S.isApprox(S.transpose(), 1e-10) && (S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw Error(ErrorKind::InvalidInput, std::string("field '") + field + "': not symmetric");
}

} // namespace

void PriorModel::validate(Index p) const {
    if (mu_a.size() != p)
        throw Error(ErrorKind::InvalidInput, "field 'mu_a': length " + std::to_string(mu_a.size()) +
                                                 " does not match p = " + std::to_string(p));
    check_square(sigma_a, p, "sigma_a");
}

void GenerativeModel::validate(Index p) const {
    if (mu_x.size() != p)
        throw Error(ErrorKind::InvalidInput, "field 'mu_x': length " + std::to_string(mu_x.size()) +
                                                 " does not match p = " + std::to_string(p));
    check_square(sigma_x, p, "sigma_x");
}

BayesOperator::BayesOperator(const WhitenedProblem& problem, const PriorModel& prior) {
    const Index p = problem.p();
    prior.validate(p);
    Eigen::LLT<Matrix> prior_llt(prior.sigma_a);
    if (prior_llt.info() != Eigen::Success)
        throw Error(ErrorKind::SingularSystem, "prior covariance is not positive definite");
    L_a_ = prior_llt.matrixL();
    mu_a_ = prior.mu_a;
    K_mu_a_ = problem.K_w * mu_a_;

    Eigen::BDCSVD<Matrix> svd(problem.K_w * L_a_, Eigen::ComputeThinU | Eigen::ComputeFullV);
    if (!svd.singularValues().allFinite())
        throw Error(ErrorKind::SingularSystem, "SVD of the prior-whitened operator failed");
    U_ = svd.matrixU();
    V_ = svd.matrixV();
    s_ = Vector::Zero(p);
    s_.head(svd.singularValues().size()) = svd.singularValues();

    // c = V^T L_a^T h in the prior-whitened basis.
    const Vector c = V_.transpose() * (L_a_.transpose() * problem.h);
    const Vector d = (1.0 + s_.array().square()).inverse().matrix();
    const Index k = U_.cols();
    g_ = U_ * (s_.head(k).cwiseProduct(d.head(k)).cwiseProduct(c.head(k)));
    offset_ = problem.h.dot(mu_a_);
    sigma_ = std::sqrt(c.dot(d.cwiseProduct(c)));
    se_ = g_.norm();
    // (A_k^T - I) h = -Sigma_a^{-1} u = -L_a^{-T} V diag(d) c
    m_ = -L_a_.transpose().triangularView<Eigen::Upper>().solve(V_ * d.cwiseProduct(c));
}

Vector BayesOperator::x_hat(const Vector& y_w) const {
    const Index k = U_.cols();
    const Vector d = (1.0 + s_.head(k).array().square()).inverse().matrix();
    const Vector w = s_.head(k).cwiseProduct(d).cwiseProduct(U_.transpose() * (y_w - K_mu_a_));
    return mu_a_ + L_a_ * (V_.leftCols(k) * w);
}

Matrix BayesOperator::whitened_gain_matrix() const {
    const Index k = U_.cols();
    const Vector sd = s_.head(k).cwiseQuotient((1.0 + s_.head(k).array().square()).matrix());
    return L_a_ * (V_.leftCols(k) * sd.asDiagonal() * U_.transpose());
}

Matrix BayesOperator::averaging_kernel() const {
    // A = L_a V diag(s^2 / (1 + s^2)) V^T L_a^{-1}
    const Vector r = (s_.array().square() / (1.0 + s_.array().square())).matrix();
    const Matrix right = L_a_.transpose().triangularView<Eigen::Upper>().solve(V_);
    return L_a_ * V_ * r.asDiagonal() * right.transpose();
}

BayesResult bayes_retrieve(const LinearProblem& problem, const PriorModel& prior, const Vector& y, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must lie in (0, 1)");
    const auto [pw, y_w] = whiten(problem, y);
    const BayesOperator op(pw, prior);
    const double z = z_two_sided(alpha);

    BayesResult r;
    r.alpha = alpha;
    r.x_hat = op.x_hat(y_w);
    r.theta_hat = problem.h.dot(r.x_hat);
    r.posterior_sd = op.posterior_sd();
    r.standard_error = op.standard_error();
    r.lower = r.theta_hat - z * r.posterior_sd;
    r.upper = r.theta_hat + z * r.posterior_sd;
    // G acts on raw y: G = M^{-1} K_w^T L^{-1}.
    const Matrix Gw = op.whitened_gain_matrix();
    r.gain_matrix = pw.chol_L().transpose().triangularView<Eigen::Upper>().solve(Gw.transpose()).transpose();
    r.averaging_kernel = op.averaging_kernel();
    r.bias_multipliers = op.bias_multipliers();
    return r;
}

Vector bias_multipliers(const LinearProblem& problem, const PriorModel& prior) {
    return BayesOperator(whiten(problem), prior).bias_multipliers();
}

double bayes_bias(const LinearProblem& problem, const PriorModel& prior, const Vector& x_true) {
    if (x_true.size() != problem.p()) throw Error(ErrorKind::InvalidInput, "x_true length does not match p");
    return bias_multipliers(problem, prior).dot(x_true - prior.mu_a);
}

double bayes_coverage(double bias, double standard_error, double posterior_sd, double alpha) {
    if (!(standard_error > 0.0) || !(posterior_sd > 0.0))
        throw Error(ErrorKind::InvalidInput, "standard error and posterior sd must be positive");
    const double z = z_two_sided(alpha);
    const double b = bias / standard_error;
    const double w = z * posterior_sd / standard_error;
    // Phi(b + w) - Phi(b - w), written symmetrically so coverage(b) == coverage(-b) bitwise.
    const double a = std::fabs(b);
    return 1.0 - normal_cdf(-(a + w)) - normal_cdf(a - w);
}

BiasDistribution bias_distribution(const Vector& m, const PriorModel& prior, const GenerativeModel& generative) {
    BiasDistribution d;
    d.mean = m.dot(generative.mu_x - prior.mu_a);
    d.variance = m.dot(generative.sigma_x * m);
    return d;
}

BiasDistribution bias_distribution(const LinearProblem& problem, const PriorModel& prior,
                                   const GenerativeModel& generative) {
    generative.validate(problem.p());
    return bias_distribution(bias_multipliers(problem, prior), prior, generative);
}

} // namespace strictbounds
