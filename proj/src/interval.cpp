#include "strictbounds/interval.hpp"

#include <algorithm>
#include <cmath>

#include "strictbounds/error.hpp"
#include "strictbounds/nnls.hpp"
#include "strictbounds/stats.hpp"

namespace strictbounds {

const char* to_string(RadiusMode mode) {
    return mode == RadiusMode::OneAtATime ? "one_at_a_time" : "simultaneous";
}

RadiusMode parse_radius_mode(const std::string& text) {
    if (text == "one_at_a_time") return RadiusMode::OneAtATime;
    if (text == "simultaneous") return RadiusMode::Simultaneous;
    throw Error(ErrorKind::InvalidInput, "unknown radius mode '" + text + "'");
}

double radius_sq_for(RadiusMode mode, double alpha, Index n, double slack_sq) {
    if (mode == RadiusMode::OneAtATime) {
        const double z = z_two_sided(alpha);
        return z * z + slack_sq;
    }
    return chi2_quantile(static_cast<double>(n), 1.0 - alpha);
}

namespace {

// y = U y_top + e with e orthogonal to range(U). One reorthogonalization pass:
// when y is large next to e, the plain difference leaks into range(U).
std::pair<Vector, Vector> split_range(const Matrix& U, const Vector& y) {
    Vector top = U.transpose() * y;
    Vector e = y - U * top;
    const Vector fix = U.transpose() * e;
    top += fix;
    e -= U * fix;
    return {std::move(top), std::move(e)};
}

// Affine rows whose Farkas system A^T c = 0, b^T c = -1, c >= 0 is solvable are empty.
bool rows_infeasible(const Matrix& A, const Vector& b) {
    const Index q = A.rows(), p = A.cols();
    if (q == 0) return false;
    Matrix E(p + 1, q);
    for (Index i = 0; i < q; ++i) {
        const double scale = std::max(std::sqrt(A.row(i).squaredNorm() + b(i) * b(i)), 1e-300);
        E.col(i).head(p) = A.row(i).transpose() / scale;
        E(p, i) = b(i) / scale;
    }
    Vector f = Vector::Zero(p + 1);
    f(p) = -1.0;
    return nnls(E, f).residual_norm <= 1e-9;
}

// h^T x is bounded below on {K_w x in a ball, A x <= b} iff N^T (h + A^T c) = 0 for some c >= 0,
// where N spans null(K_w); bounded above with -h in place of h.
bool functional_bounded(const Matrix& N, const Matrix& A, const Vector& h, double sign) {
    if (N.cols() == 0) return true;
    const Vector target = -sign * (N.transpose() * h);
    const double scale = std::max(h.norm(), 1e-300);
    if (A.rows() == 0) return target.norm() <= 1e-8 * scale;
    const Matrix E = N.transpose() * A.transpose();
    return nnls(E, target).residual_norm <= 1e-8 * scale;
}

} // namespace

CertificateCheck verify_certificate(const WhitenedProblem& problem_w, const Vector& y_w,
                                    const ConstraintSet& constraints, double radius_sq, Endpoint endpoint,
                                    const DualCertificate& cert) {
    const Index q = constraints.q();
    if (cert.w.size() != problem_w.n() || cert.c.size() != q)
        throw Error(ErrorKind::InvalidInput, "certificate dimensions do not match the problem");
    const double sign = endpoint == Endpoint::Lower ? 1.0 : -1.0;
    const double r = std::sqrt(radius_sq);
    CertificateCheck out;
    Vector stat = problem_w.h - problem_w.K_w.transpose() * cert.w;
    double bc = 0.0;
    if (q > 0) {
        stat += sign * (constraints.A().transpose() * cert.c);
        bc = constraints.b().dot(cert.c);
        out.min_c = cert.c.minCoeff();
    }
    out.stationarity = stat.norm();
    out.objective = cert.w.dot(y_w) - sign * (r * cert.w.norm() + bc);
    return out;
}

IntervalSolver::IntervalSolver(const WhitenedProblem& problem, const ConstraintSet& constraints, bool reduce,
                               SolverOptions options)
    : problem_(problem), constraints_(constraints), reduce_(reduce), options_(options) {
    const Index p = problem_.p();
    if (constraints_.p() == 0 && constraints_.empty()) constraints_ = ConstraintSet(p);
    if (constraints_.p() != p)
        throw Error(ErrorKind::InvalidInput, "constraint set dimension " + std::to_string(constraints_.p()) +
                                                 " does not match p = " + std::to_string(p));
    if (!problem_.K_w.allFinite()) throw Error(ErrorKind::InvalidInput, "whitened operator has non-finite entries");
    if (rows_infeasible(constraints_.A(), constraints_.solver_b()))
        throw Error(ErrorKind::InfeasibleConstraints, "the affine constraint rows admit no feasible point");

    Eigen::BDCSVD<Matrix> svd(problem_.K_w, Eigen::ComputeThinU | Eigen::ComputeFullV);
    sv_ = svd.singularValues();
    const Index k = sv_.size();
    U_ = svd.matrixU();
    Vfull_ = svd.matrixV();
    V_ = Vfull_.leftCols(k);

    const double top = k > 0 ? sv_(0) : 0.0;
    rank_ = 0;
    for (Index i = 0; i < k; ++i)
        if (sv_(i) > options_.rank_tol * top) ++rank_;
    const Matrix N = Vfull_.rightCols(p - rank_);
    bounded_below_ = functional_bounded(N, constraints_.A(), problem_.h, 1.0);
    bounded_above_ = functional_bounded(N, constraints_.A(), problem_.h, -1.0);

    const Vector vh = V_.leftCols(rank_).transpose() * problem_.h;
    h_gram_norm_ = vh.cwiseQuotient(sv_.head(rank_)).norm();

    // Programs are solved in xi with x = V diag(1 / max(sigma, floor)) xi, which
    // turns the operator into an (almost) isometry on its range; the normal
    // equations in x would otherwise square the condition number.
    const double floor = top > 0.0 ? 1e-8 * top : 1.0;
    // Null coordinates carry no operator scale; giving them sigma_1 keeps their
    // constraint rows on the same footing as the best-determined directions.
    col_scale_ = Vector::Constant(p, top > 0.0 ? top : 1.0);
    for (Index i = 0; i < rank_; ++i) col_scale_(i) = std::max(sv_(i), floor);
    T_ = Vfull_ * col_scale_.cwiseInverse().asDiagonal();
    // Directions below rank_tol are treated as exactly null: any slope left on
    // them is roundoff, and after rescaling it would steer the iterates.
    if (reduce_) {
        R_ = sv_.asDiagonal() * V_.transpose();
        Rt_ = Matrix::Zero(k, p);
        for (Index i = 0; i < rank_; ++i) Rt_(i, i) = sv_(i) / col_scale_(i);
    } else {
        Rt_ = problem_.K_w * T_;
        Rt_.rightCols(p - rank_).setZero();
    }
    gram_ = Rt_.transpose() * Rt_;
    ht_ = T_.transpose() * problem_.h;
    if ((N.transpose() * problem_.h).norm() <= 1e-8 * problem_.h.norm()) ht_.tail(p - rank_).setZero();
    rows_ = ipm::Rows(constraints_.A() * T_, constraints_.solver_b());
}

Vector IntervalSolver::to_xi(const Vector& x) const { return col_scale_.cwiseProduct(Vfull_.transpose() * x); }

Vector IntervalSolver::to_x(const Vector& xi) const { return T_ * xi; }

ReducedProblem IntervalSolver::reduce(const Vector& y_w) const {
    if (y_w.size() != problem_.n()) throw Error(ErrorKind::InvalidInput, "observation length does not match n");
    ReducedProblem out;
    out.R = R_.size() > 0 ? R_ : Matrix(sv_.asDiagonal() * V_.transpose());
    auto [top, e] = split_range(U_, y_w);
    out.y_top = std::move(top);
    out.tail_sq = e.squaredNorm();
    return out;
}

// Truncated-SVD least squares; the exact minimizer when no constraint binds.
Vector IntervalSolver::least_squares(const Vector& y_top) const {
    Vector coef = Vector::Zero(sv_.size());
    for (Index i = 0; i < rank_; ++i) coef(i) = y_top(i) / sv_(i);
    return V_ * coef;
}

SlackResult IntervalSolver::slack(const Vector& y_w) const {
    if (y_w.size() != problem_.n()) throw Error(ErrorKind::InvalidInput, "observation length does not match n");
    SlackResult out;
    const auto [y_top, e] = split_range(U_, y_w);
    const double tail = reduce_ ? e.squaredNorm() : 0.0;
    const Vector x_ls = least_squares(y_top);

    if (constraints_.empty()) {
        // Null directions carry no residual, so the truncated solution is optimal.
        out.x_feas = x_ls;
        out.iterations = 0;
    } else {
        const Vector& d = reduce_ ? y_top : y_w;
        ipm::Program prog;
        prog.R = &Rt_;
        prog.d = &d;
        prog.gram = &gram_;
        prog.quadratic = true;
        prog.rows = &rows_;
        const ipm::Result res = ipm::solve(prog, to_xi(x_ls), {}, options_.ipm);
        if (res.status == ipm::Status::Failed)
            throw Error(ErrorKind::SolverStall, "slack program did not reach tolerance in " +
                                                    std::to_string(res.iterations) + " iterations");
        out.x_feas = to_x(res.x);
        out.iterations = res.iterations;
        out.kkt_residual = std::max({res.dual_residual, res.primal_residual, res.gap});
        out.attained = res.status == ipm::Status::Converged;
    }
    if (reduce_) {
        const Matrix& R = R_;
        out.reduced_s_sq = (y_top - R * out.x_feas).squaredNorm();
    } else {
        out.reduced_s_sq = (y_w - problem_.K_w * out.x_feas).squaredNorm();
    }
    out.tail_sq = tail;
    out.s_sq = out.reduced_s_sq + tail;
    return out;
}

IntervalSolver::Endpoint_ IntervalSolver::solve_endpoint(const Vector& y_w, const Vector& d, double ball_rhs,
                                                         double radius_sq, const Vector& x0, Endpoint which) const {
    const double sign = which == Endpoint::Lower ? 1.0 : -1.0;
    ipm::Program prog;
    prog.R = &Rt_;
    prog.d = &d;
    prog.gram = &gram_;
    prog.quadratic = false;
    prog.cost = sign * ht_;
    prog.has_ball = true;
    prog.ball_rhs = ball_rhs;
    prog.rows = &rows_;
    ipm::Start start;
    start.ball_dual = h_gram_norm_;
    const ipm::Result res = ipm::solve(prog, to_xi(x0), start, options_.ipm);
    if (res.status == ipm::Status::Failed)
        throw Error(ErrorKind::SolverStall, std::string(which == Endpoint::Lower ? "lower" : "upper") +
                                                " endpoint program did not reach tolerance in " +
                                                std::to_string(res.iterations) + " iterations");
    Endpoint_ out;
    out.x = to_x(res.x);
    out.value = problem_.h.dot(out.x);
    out.iterations = res.iterations;
    out.residual = std::max({res.dual_residual, res.primal_residual, res.gap});
    out.inaccurate = res.status != ipm::Status::Converged;
    if (options_.certify) {
        DualCertificate& cert = out.cert;
        const Index k = Rt_.rows();
        const Vector w_top = -sign * res.ball_dual.tail(k);
        if (reduce_) {
            // Lift to n-space: the tail of y_w carries the share of the ball not used by R.
            cert.w = U_ * w_top;
            const double r_top = std::sqrt(ball_rhs);
            if (r_top > 0.0) cert.w += (sign * w_top.norm() / r_top) * split_range(U_, y_w).second;
        } else {
            cert.w = w_top;
        }
        cert.c = res.lambda;
        const CertificateCheck chk =
            verify_certificate(problem_, y_w, constraints_, radius_sq, which, cert);
        cert.objective = chk.objective;
        cert.stationarity = chk.stationarity;
        cert.gap = std::fabs(out.value - chk.objective);
        const double tol = options_.certificate_tol;
        cert.certified = chk.stationarity <= tol * (1.0 + problem_.h.norm()) && chk.min_c >= -1e-10 &&
                         cert.gap <= tol * (1.0 + std::fabs(out.value));
    }
    return out;
}

IntervalResult IntervalSolver::interval_at_radius(const Vector& y_w, double radius_sq, const SlackResult& sl) const {
    if (!(radius_sq > sl.s_sq))
        throw Error(ErrorKind::EmptyConfidenceSet, "radius^2 " + std::to_string(radius_sq) +
                                                       " does not exceed the slack " + std::to_string(sl.s_sq));
    if (!bounded_below_) throw Error(ErrorKind::UnboundedFunctional, "h^T x is unbounded below on the feasible set");
    if (!bounded_above_) throw Error(ErrorKind::UnboundedFunctional, "h^T x is unbounded above on the feasible set");

    Vector y_top;
    if (reduce_) y_top = split_range(U_, y_w).first;
    const Vector& d = reduce_ ? y_top : y_w;
    const double ball_rhs = reduce_ ? radius_sq - sl.tail_sq : radius_sq;

    const Endpoint_ lo = solve_endpoint(y_w, d, ball_rhs, radius_sq, sl.x_feas, Endpoint::Lower);
    const Endpoint_ hi = solve_endpoint(y_w, d, ball_rhs, radius_sq, sl.x_feas, Endpoint::Upper);

    IntervalResult out;
    out.method = "fixed_radius";
    out.lower = lo.value;
    out.upper = hi.value;
    out.slack_sq = sl.s_sq;
    out.radius_sq = radius_sq;
    out.x_at_lower = lo.x;
    out.x_at_upper = hi.x;
    out.dual_lower = lo.cert;
    out.dual_upper = hi.cert;
    SolverStats& st = out.stats;
    st.reduced = reduce_;
    st.slack_iterations = sl.iterations;
    st.lower_iterations = lo.iterations;
    st.upper_iterations = hi.iterations;
    st.slack_residual = sl.kkt_residual;
    st.lower_residual = lo.residual;
    st.upper_residual = hi.residual;
    st.reduced_slack_sq = sl.reduced_s_sq;
    st.tail_sq = sl.tail_sq;
    st.slack_attained = sl.attained;
    st.inaccurate = lo.inaccurate || hi.inaccurate || !sl.attained;
    return out;
}

IntervalResult IntervalSolver::interval(const Vector& y_w, double alpha, RadiusMode mode) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidInput, "alpha must lie in (0, 1)");
    const SlackResult sl = slack(y_w);
    const double radius_sq = radius_sq_for(mode, alpha, problem_.n(), sl.s_sq);
    IntervalResult out = interval_at_radius(y_w, radius_sq, sl);
    out.method = to_string(mode);
    return out;
}

SlackResult solve_slack(const WhitenedProblem& problem_w, const Vector& y_w, const ConstraintSet& constraints) {
    return IntervalSolver(problem_w, constraints, false).slack(y_w);
}

IntervalResult solve_interval(const WhitenedProblem& problem_w, const Vector& y_w, const ConstraintSet& constraints,
                              double alpha, RadiusMode mode, const SolverOptions& options) {
    return IntervalSolver(problem_w, constraints, false, options).interval(y_w, alpha, mode);
}

IntervalResult solve_interval_reduced(const WhitenedProblem& problem_w, const Vector& y_w,
                                      const ConstraintSet& constraints, double alpha, RadiusMode mode,
                                      const SolverOptions& options) {
    return IntervalSolver(problem_w, constraints, true, options).interval(y_w, alpha, mode);
}

ReducedProblem svd_reduce(const WhitenedProblem& problem_w, const Vector& y_w) {
    if (y_w.size() != problem_w.n()) throw Error(ErrorKind::InvalidInput, "observation length does not match n");
    Eigen::BDCSVD<Matrix> svd(problem_w.K_w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    ReducedProblem out;
    out.R = svd.singularValues().asDiagonal() * svd.matrixV().transpose();
    auto [top, e] = split_range(svd.matrixU(), y_w);
    out.y_top = std::move(top);
    out.tail_sq = e.squaredNorm();
    return out;
}

DualCertificate dual_solve(const WhitenedProblem& problem_w, const Vector& y_w, const ConstraintSet& constraints,
                           double radius_sq, Endpoint endpoint) {
    if (!(radius_sq > 0.0)) throw Error(ErrorKind::InvalidInput, "radius_sq must be positive");
    const IntervalSolver solver(problem_w, constraints, true);
    const SlackResult sl = solver.slack(y_w);
    const IntervalResult res = solver.interval_at_radius(y_w, radius_sq, sl);
    const DualCertificate& cert = endpoint == Endpoint::Lower ? res.dual_lower : res.dual_upper;
    if (!cert.certified)
        throw Error(ErrorKind::CertificateUnavailable,
                    "multipliers do not certify the endpoint (gap " + std::to_string(cert.gap) + ", stationarity " +
                        std::to_string(cert.stationarity) + ")");
    return cert;
}

IntervalResult closed_form_fullrank(const WhitenedProblem& problem_w, const Vector& y_w, double alpha,
                                    double rank_tol) {
    if (y_w.size() != problem_w.n()) throw Error(ErrorKind::InvalidInput, "observation length does not match n");
    const SpectralSummary sp = spectral_summary(problem_w, rank_tol);
    if (sp.numeric_rank < problem_w.p())
        throw Error(ErrorKind::RankDeficient, "closed form needs rank(K_w) = p; numeric rank is " +
                                                  std::to_string(sp.numeric_rank));
    const double z = z_two_sided(alpha);
    const Vector x_ls = sp.V * (sp.U.transpose() * y_w).cwiseQuotient(sp.D);
    const Vector u = sp.V * (sp.V.transpose() * problem_w.h).cwiseQuotient(sp.D.cwiseAbs2());
    const double se = std::sqrt(problem_w.h.dot(u));
    const Vector r_ls = y_w - problem_w.K_w * x_ls;
    const Vector Ku = problem_w.K_w * u;
    const double center = problem_w.h.dot(x_ls);

    IntervalResult out;
    out.method = "closed_form";
    out.lower = center - z * se;
    out.upper = center + z * se;
    out.slack_sq = r_ls.squaredNorm();
    out.radius_sq = z * z + out.slack_sq;
    out.x_at_lower = x_ls - (z / se) * u;
    out.x_at_upper = x_ls + (z / se) * u;
    const ConstraintSet none(problem_w.p());
    out.dual_lower.w = (se / z) * r_ls + Ku;
    out.dual_upper.w = -(se / z) * r_ls + Ku;
    for (auto [cert, which, value] : {std::tuple{&out.dual_lower, Endpoint::Lower, out.lower},
                                      std::tuple{&out.dual_upper, Endpoint::Upper, out.upper}}) {
        cert->c = Vector(0);
        const CertificateCheck chk = verify_certificate(problem_w, y_w, none, out.radius_sq, which, *cert);
        cert->objective = chk.objective;
        cert->stationarity = chk.stationarity;
        cert->gap = std::fabs(value - chk.objective);
        cert->certified = chk.stationarity <= 1e-6 * (1.0 + problem_w.h.norm()) &&
                          cert->gap <= 1e-6 * (1.0 + std::fabs(value));
    }
    out.stats.reduced = true;
    out.stats.reduced_slack_sq = out.slack_sq;
    return out;
}

} // namespace strictbounds
