#include "strictbounds/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "strictbounds/error.hpp"

namespace strictbounds {

NoiseCovariance NoiseCovariance::diagonal(Vector variances) {
    NoiseCovariance c;
    c.diag_ = std::move(variances);
    return c;
}

NoiseCovariance NoiseCovariance::dense(Matrix cov) {
    NoiseCovariance c;
    c.dense_ = std::move(cov);
    return c;
}

Matrix NoiseCovariance::to_dense() const {
    if (is_diagonal()) return diag_.asDiagonal();
    return dense_;
}

NoiseCovariance NoiseCovariance::permuted(const std::vector<Index>& order) const {
    const Index n = static_cast<Index>(order.size());
    if (is_diagonal()) {
        Vector d(n);
        for (Index i = 0; i < n; ++i) d(i) = diag_(order[i]);
        return diagonal(std::move(d));
    }
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) m(i, j) = dense_(order[i], order[j]);
    return dense(std::move(m));
}

void LinearProblem::validate() const {
    if (K.rows() < 1) throw Error(ErrorKind::InvalidInput, "field 'K': n must be at least 1");
    if (K.cols() < 1) throw Error(ErrorKind::InvalidInput, "field 'K': p must be at least 1");
    if (!K.allFinite()) throw Error(ErrorKind::InvalidInput, "field 'K': non-finite entry");
    if (noise_cov.size() != n())
        throw Error(ErrorKind::InvalidInput, "field 'noise_cov': size " + std::to_string(noise_cov.size()) +
                                                 " does not match n = " + std::to_string(n()));
    if (noise_cov.is_diagonal() ? !noise_cov.variances().allFinite() : !noise_cov.matrix().allFinite())
        throw Error(ErrorKind::InvalidInput, "field 'noise_cov': non-finite entry");
    if (h.size() != p())
        throw Error(ErrorKind::InvalidInput,
                    "field 'h': length " + std::to_string(h.size()) + " does not match p = " + std::to_string(p()));
    if (!h.allFinite()) throw Error(ErrorKind::InvalidInput, "field 'h': non-finite entry");
    if (h.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorKind::InvalidInput, "field 'h': identically zero");
    if (!labels.empty() && static_cast<Index>(labels.size()) != p())
        throw Error(ErrorKind::InvalidInput, "field 'labels': length " + std::to_string(labels.size()) +
                                                 " does not match p = " + std::to_string(p()));
}

Index LinearProblem::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<Index>(i);
    try {
        std::size_t used = 0;
        long v = std::stol(label, &used);
        if (used == label.size() && v >= 0 && v < p()) return static_cast<Index>(v);
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::InvalidInput, "unknown state element '" + label + "'");
}

Vector WhitenedProblem::whiten(const Vector& y) const {
    if (y.size() != n())
        throw Error(ErrorKind::InvalidInput, "observation length " + std::to_string(y.size()) +
                                                 " does not match n = " + std::to_string(n()));
    if (diagonal_noise()) return y.cwiseQuotient(chol_diag_);
    return chol_dense_.triangularView<Eigen::Lower>().solve(y);
}

Vector WhitenedProblem::color(const Vector& z) const {
    if (diagonal_noise()) return z.cwiseProduct(chol_diag_);
    return chol_dense_.triangularView<Eigen::Lower>() * z;
}

Matrix WhitenedProblem::whiten_columns(const Matrix& M) const {
    if (diagonal_noise()) return chol_diag_.cwiseInverse().asDiagonal() * M;
    return chol_dense_.triangularView<Eigen::Lower>().solve(M);
}

Matrix WhitenedProblem::chol_L() const {
    if (diagonal_noise()) return chol_diag_.asDiagonal();
    return chol_dense_;
}

WhitenedProblem WhitenedProblem::identity_noise(Matrix K_w, Vector h) {
    WhitenedProblem w;
    w.chol_diag_ = Vector::Ones(K_w.rows());
    w.K_w = std::move(K_w);
    w.h = std::move(h);
    return w;
}

WhitenedProblem whiten(const LinearProblem& problem) {
    problem.validate();
    WhitenedProblem w;
    w.h = problem.h;
    if (problem.noise_cov.is_diagonal()) {
        const Vector& v = problem.noise_cov.variances();
        for (Index i = 0; i < v.size(); ++i)
            if (!(v(i) > 0.0))
                throw Error(ErrorKind::CholeskyFailure,
                            "noise_cov is not positive definite (diagonal entry " + std::to_string(i) + ")");
        w.chol_diag_ = v.cwiseSqrt();
        w.K_w = w.chol_diag_.cwiseInverse().asDiagonal() * problem.K;
    } else {
        const Matrix& C = problem.noise_cov.matrix();
        if (!C.isApprox(C.transpose(), 1e-12))
            throw Error(ErrorKind::CholeskyFailure, "noise_cov is not symmetric");
        Eigen::LLT<Matrix> llt(C);
        if (llt.info() != Eigen::Success || !llt.matrixL().toDenseMatrix().allFinite())
            throw Error(ErrorKind::CholeskyFailure, "noise_cov is not positive definite");
        w.chol_dense_ = llt.matrixL();
        w.K_w = w.chol_dense_.triangularView<Eigen::Lower>().solve(problem.K);
    }
    return w;
}

std::pair<WhitenedProblem, Vector> whiten(const LinearProblem& problem, const Vector& y) {
    WhitenedProblem w = whiten(problem);
    Vector y_w = w.whiten(y);
    return {std::move(w), std::move(y_w)};
}

SpectralSummary spectral_summary(const WhitenedProblem& problem, double rank_tol) {
    if (!(rank_tol > 0.0)) throw Error(ErrorKind::InvalidInput, "rank_tol must be positive");
    Eigen::BDCSVD<Matrix> svd(problem.K_w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SpectralSummary s;
    s.singular_values = svd.singularValues();
    s.U = svd.matrixU();
    s.D = s.singular_values;
    s.V = svd.matrixV();
    const double top = s.singular_values.size() > 0 ? s.singular_values(0) : 0.0;
    s.numeric_rank = 0;
    for (Index i = 0; i < s.singular_values.size(); ++i)
        if (s.singular_values(i) > rank_tol * top) ++s.numeric_rank;
    s.condition_number = s.numeric_rank > 0 ? top / s.singular_values(s.numeric_rank - 1)
                                            : std::numeric_limits<double>::infinity();
    return s;
}

SpectralSummary spectral_summary(const LinearProblem& problem, double rank_tol) {
    return spectral_summary(whiten(problem), rank_tol);
}

double apply_functional(const Vector& h, const Vector& x) {
    if (h.size() != x.size())
        throw Error(ErrorKind::InvalidInput, "functional length " + std::to_string(h.size()) +
                                                 " does not match state length " + std::to_string(x.size()));
    return h.dot(x);
}

Vector averaging_weights(Index p, Index begin, Index end) {
    if (begin < 0 || end > p || end - begin < 1)
        throw Error(ErrorKind::InvalidInput, "functional support must be a non-empty range inside [0, p)");
    Vector h = Vector::Zero(p);
    const Index k = end - begin;
    if (k == 1) {
        h(begin) = 1.0;
        return h;
    }
    // k - 2 interior weights w and two boundary weights w/2: (k - 1) w = 1.
    const double w = 1.0 / static_cast<double>(k - 1);
    h.segment(begin, k).setConstant(w);
    h(begin) = w / 2.0;
    h(end - 1) = w / 2.0;
    return h;
}

double weighted_residual_sq(const LinearProblem& problem, const Vector& y, const Vector& x) {
    const Vector r = y - problem.K * x;
    if (problem.noise_cov.is_diagonal()) return r.cwiseAbs2().cwiseQuotient(problem.noise_cov.variances()).sum();
    return r.dot(problem.noise_cov.matrix().llt().solve(r));
}

} // namespace strictbounds
