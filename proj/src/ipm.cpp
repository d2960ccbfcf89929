#include "strictbounds/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "strictbounds/error.hpp"

namespace strictbounds::ipm {

Rows::Rows(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)), single_(static_cast<std::size_t>(A_.rows()), -1) {
    for (Index i = 0; i < A_.rows(); ++i) {
        Index nz = 0, col = -1;
        for (Index j = 0; j < A_.cols(); ++j)
            if (A_(i, j) != 0.0) {
                ++nz;
                col = j;
            }
        if (nz == 1) single_[static_cast<std::size_t>(i)] = col;
    }
}

void Rows::add_weighted_gram(const Vector& w, Matrix& M) const {
    for (Index i = 0; i < A_.rows(); ++i) {
        const Index j = single_[static_cast<std::size_t>(i)];
        if (j >= 0)
            M(j, j) += w(i) * A_(i, j) * A_(i, j);
        else
            M.selfadjointView<Eigen::Lower>().rankUpdate(A_.row(i).transpose(), w(i));
    }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Second-order cone Q = {(u0, u1) : u0 >= ||u1||} and its Jordan algebra.
double soc_det(const Vector& u) {
    const double n1 = u.tail(u.size() - 1).norm();
    return (u(0) - n1) * (u(0) + n1);
}

Vector soc_J(const Vector& u) {
    Vector v = -u;
    v(0) = u(0);
    return v;
}

Vector soc_prod(const Vector& u, const Vector& v) {
    Vector w(u.size());
    w(0) = u.dot(v);
    w.tail(u.size() - 1) = u(0) * v.tail(v.size() - 1) + v(0) * u.tail(u.size() - 1);
    return w;
}

// w with u o w = v
Vector soc_div(const Vector& u, const Vector& v) {
    const Index k = u.size() - 1;
    Vector w(u.size());
    w(0) = (u(0) * v(0) - u.tail(k).dot(v.tail(k))) / soc_det(u);
    w.tail(k) = (v.tail(k) - w(0) * u.tail(k)) / u(0);
    return w;
}

double soc_max_step(const Vector& u, const Vector& du) {
    const Index k = u.size() - 1;
    const double a = du(0) * du(0) - du.tail(k).squaredNorm();
    const double b = u(0) * du(0) - u.tail(k).dot(du.tail(k));
    const double c = std::max(soc_det(u), 0.0);
    const double disc = b * b - a * c;
    if (a < 0.0 || (b < 0.0 && disc >= 0.0)) return c / (-b + std::sqrt(std::max(disc, 0.0)));
    return kInf;
}

double orthant_max_step(const Vector& u, const Vector& du) {
    double a = kInf;
    for (Index i = 0; i < u.size(); ++i)
        if (du(i) < 0.0) a = std::min(a, -u(i) / du(i));
    return a;
}

// Nesterov-Todd scaling W = beta (2 v v^T - J) with W z = W^{-1} s.
struct NtScaling {
    double beta = 1.0;
    Vector wbar; // normalized scaling point, det(wbar) = 1
    Vector v;    // Jordan square root of wbar

    NtScaling(const Vector& s, const Vector& z) {
        const double ds = soc_det(s), dz = soc_det(z);
        const Vector sb = s / std::sqrt(ds);
        const Vector zb = z / std::sqrt(dz);
        const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
        wbar = (sb + soc_J(zb)) / (2.0 * gamma);
        v = wbar;
        v(0) += 1.0;
        v /= std::sqrt(2.0 * (wbar(0) + 1.0));
        beta = std::pow(ds / dz, 0.25);
    }
    Vector apply(const Vector& u) const { return beta * (2.0 * v.dot(u) * v - soc_J(u)); }
    Vector apply_inv(const Vector& u) const {
        const Vector Jv = soc_J(v);
        return (2.0 * Jv.dot(u) * Jv - soc_J(u)) / beta;
    }
};

struct Step {
    Vector dx, dzl, dsl, dzs, dss;
};

} // namespace

Result solve(const Program& P, const Vector& x0, const Start& start, const Options& opt) {
    const Index p = x0.size();
    static const Rows kNoRows;
    const Rows& rows = P.rows ? *P.rows : kNoRows;
    const Index q = rows.count();
    const bool soc = P.has_ball;
    const Index k = soc ? P.R->rows() : 0;
    const Matrix& A = rows.A();
    const Vector& b = rows.b();
    const double degree = static_cast<double>(q + (soc ? 1 : 0));
    const double r = soc ? std::sqrt(P.ball_rhs) : 0.0;
    if (soc && !(P.ball_rhs > 0.0)) throw Error(ErrorKind::InvalidInput, "ball radius must be positive");

    // Work in the shifted variable x - x0 so residuals are measured on the
    // scale of the data misfit rather than of the data.
    const Vector bs = q > 0 ? Vector(b - A * x0) : Vector(0);
    const Vector ds = (soc || P.quadratic) ? Vector(*P.d - (*P.R) * x0) : Vector(0);
    const Vector c = P.quadratic ? Vector(-2.0 * (P.R->transpose() * ds)) : P.cost;
    const double c_x0 = P.quadratic ? 0.0 : c.dot(x0);
    auto objective = [&](const Vector& x) { return P.quadratic ? (ds - (*P.R) * x).squaredNorm() : c_x0 + c.dot(x); };
    auto G_t = [&](const Vector& tl, const Vector& ts) {
        Vector out = Vector::Zero(p);
        if (q > 0) out += A.transpose() * tl;
        if (soc) out += P.R->transpose() * ts.tail(k);
        return out;
    };

    Vector x = Vector::Zero(p);
    Vector sl(q), zl(q), ss, zs;
    // Rows violated or nearly active at the start get a generous slack: tiny
    // slacks mean huge initial multipliers, and complementarity then collapses
    // before the dual residual is removed.
    for (Index i = 0; i < q; ++i) sl(i) = std::max(bs(i), 0.1 * (1.0 + std::fabs(bs(i))));
    if (soc) {
        ss.resize(k + 1);
        ss(0) = r;
        ss.tail(k) = ds;
        const double margin = 1e-4 * (1.0 + r);
        if (ss(0) - ss.tail(k).norm() < margin) ss(0) = ss.tail(k).norm() + margin;
    }
    double mu0 = 0.0;
    if (soc && start.ball_dual > 0.0) mu0 = start.ball_dual * soc_det(ss) / ss(0);
    if (!(mu0 > 0.0)) mu0 = std::max(1.0, std::fabs(objective(x))) / std::max(degree, 1.0);
    zl = mu0 * sl.cwiseInverse();
    if (soc) zs = (mu0 / soc_det(ss)) * soc_J(ss);

    Result res;
    const double tol = opt.tolerance;
    const double bscale = 1.0 + (q > 0 ? bs.lpNorm<Eigen::Infinity>() : 0.0);
    const double sscale = soc ? 1.0 + r + ds.norm() : 1.0;
    Eigen::LLT<Matrix> llt;
    Matrix M(p, p);
    int it = 0;
    struct Snapshot {
        double merit = kInf;
        Vector x, zl, zs;
        double dual = 0.0, primal = 0.0, gap = 0.0, objective = 0.0;
    } best;

    for (;; ++it) {
        // Residuals of G x + s = h_c and P x + c + G^T z = 0.
        Vector Px = P.quadratic ? Vector(2.0 * ((*P.gram) * x)) : Vector::Zero(p);
        const Vector Gz = G_t(zl, zs);
        const Vector rx = Px + c + Gz;
        Vector rzl(q), rzs;
        if (q > 0) rzl = A * x + sl - bs;
        if (soc) {
            rzs.resize(k + 1);
            rzs(0) = ss(0) - r;
            rzs.tail(k) = (*P.R) * x + ss.tail(k) - ds;
        }
        const double gap = (q > 0 ? sl.dot(zl) : 0.0) + (soc ? ss.dot(zs) : 0.0);
        const double f0 = objective(x);
        res.dual_residual = rx.norm() / (1.0 + std::max({c.norm(), Px.norm(), Gz.norm()}));
        res.primal_residual = std::max(q > 0 ? rzl.lpNorm<Eigen::Infinity>() / bscale : 0.0,
                                       soc ? rzs.norm() / sscale : 0.0);
        res.gap = gap / (1.0 + std::fabs(f0));
        res.objective = f0;
        const double merit = std::max({res.dual_residual, res.primal_residual, res.gap});
        if (merit < best.merit) best = {merit, x, zl, zs, res.dual_residual, res.primal_residual, res.gap, f0};
        if (res.dual_residual <= tol && res.primal_residual <= tol && res.gap <= tol) {
            res.status = Status::Converged;
            break;
        }
        if (it >= opt.max_iterations) break;
        const double mu = degree > 0 ? gap / degree : 0.0;

        // Scalings and the reduced Newton matrix P + G^T W^{-2} G.
        Vector dl, laml;
        if (q > 0) {
            dl = sl.cwiseQuotient(zl).cwiseSqrt();
            laml = sl.cwiseProduct(zl).cwiseSqrt();
        }
        M.setZero();
        if (P.quadratic) M += 2.0 * (*P.gram);
        if (q > 0) rows.add_weighted_gram(dl.cwiseAbs2().cwiseInverse(), M);
        std::optional<NtScaling> W;
        Vector lams;
        if (soc) {
            W.emplace(ss, zs);
            lams = W->apply(zs);
            const Vector g = P.R->transpose() * W->wbar.tail(k);
            const double ib2 = 1.0 / (W->beta * W->beta);
            M += ib2 * (*P.gram);
            M.selfadjointView<Eigen::Lower>().rankUpdate(g, 2.0 * ib2);
        }
        M.triangularView<Eigen::StrictlyUpper>() = M.transpose();

        // Symmetric diagonal scaling before the factorization; bound rows with
        // large z/s ratios otherwise dominate the pivots late in the run.
        const Vector scale = M.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        const Matrix Ms = scale.asDiagonal() * M * scale.asDiagonal();
        bool factored = false;
        double eps = 1e-13;
        for (int attempt = 0; attempt < 12 && !factored; ++attempt, eps *= 100.0) {
            Matrix Mreg = Ms;
            Mreg.diagonal().array() += eps + eps * eps;
            llt.compute(Mreg);
            factored = llt.info() == Eigen::Success && llt.matrixLLT().allFinite();
        }
        if (!factored) break;

        // Solves  P dx + G^T dz = ex,  G dx + ds = ez,  lambda o (W dz + W^{-1} ds) = es.
        auto newton_once = [&](const Vector& ex, const Vector& ezl, const Vector& ezs, const Vector& esl,
                          const Vector& ess, Step& st) {
            Vector ul, us, tl, ts;
            if (q > 0) {
                ul = esl.cwiseQuotient(laml);
                tl = (ezl.cwiseQuotient(dl) - ul).cwiseQuotient(dl);
            }
            if (soc) {
                us = soc_div(lams, ess);
                ts = W->apply_inv(W->apply_inv(ezs) - us);
            }
            st.dx = scale.cwiseProduct(llt.solve(scale.cwiseProduct(ex + G_t(tl, ts))));
            if (q > 0) {
                st.dzl = ((A * st.dx - ezl).cwiseQuotient(dl) + ul).cwiseQuotient(dl);
                st.dsl = dl.cwiseProduct(ul - dl.cwiseProduct(st.dzl));
            }
            if (soc) {
                Vector Gdx(k + 1);
                Gdx(0) = 0.0;
                Gdx.tail(k) = (*P.R) * st.dx;
                st.dzs = W->apply_inv(W->apply_inv(Gdx - ezs) + us);
                st.dss = W->apply(us - W->apply(st.dzs));
            }
        };
        // Iterative refinement on the first block row, evaluated without the
        // squared operator, recovers accuracy lost in the normal equations.
        auto newton = [&](const Vector& ex, const Vector& ezl, const Vector& ezs, const Vector& esl,
                          const Vector& ess, Step& st) {
            newton_once(ex, ezl, ezs, esl, ess, st);
            const Vector zl0 = q > 0 ? Vector::Zero(q) : Vector(), zs0 = soc ? Vector::Zero(k + 1) : Vector();
            double prev = kInf;
            for (int round = 0; round < 3; ++round) {
                Vector rho = ex - G_t(st.dzl, st.dzs);
                if (P.quadratic) rho -= 2.0 * ((*P.gram) * st.dx);
                const double norm = rho.norm();
                if (!(norm < 0.5 * prev) || norm <= 1e-15 * (1.0 + ex.norm())) break;
                prev = norm;
                Step corr;
                newton_once(rho, zl0, zs0, zl0, zs0, corr);
                st.dx += corr.dx;
                if (q > 0) {
                    st.dzl += corr.dzl;
                    st.dsl += corr.dsl;
                }
                if (soc) {
                    st.dzs += corr.dzs;
                    st.dss += corr.dss;
                }
            }
        };
        auto max_step = [&](const Step& st) {
            double a = kInf;
            if (q > 0) a = std::min({a, orthant_max_step(sl, st.dsl), orthant_max_step(zl, st.dzl)});
            if (soc) a = std::min({a, soc_max_step(ss, st.dss), soc_max_step(zs, st.dzs)});
            return a;
        };

        Vector esl_aff, ess_aff;
        if (q > 0) esl_aff = -laml.cwiseAbs2();
        if (soc) ess_aff = -soc_prod(lams, lams);
        Step aff;
        newton(-rx, -rzl, -rzs, esl_aff, ess_aff, aff);
        const double a_aff = std::min(1.0, max_step(aff));
        double gap_aff = 0.0;
        if (q > 0) gap_aff += (sl + a_aff * aff.dsl).dot(zl + a_aff * aff.dzl);
        if (soc) gap_aff += (ss + a_aff * aff.dss).dot(zs + a_aff * aff.dzs);
        const double sigma = gap > 0.0 ? std::clamp(std::pow(gap_aff / gap, 3.0), 0.0, 1.0) : 0.0;

        Vector esl, ess;
        if (q > 0)
            esl = esl_aff - aff.dsl.cwiseProduct(aff.dzl) + Vector::Constant(q, sigma * mu);
        if (soc) {
            ess = ess_aff - soc_prod(W->apply_inv(aff.dss), W->apply(aff.dzs));
            ess(0) += sigma * mu;
        }
        Step st;
        newton(-rx, -rzl, -rzs, esl, ess, st);
        const double alpha = std::min(1.0, 0.99 * max_step(st));
        if (!(alpha > 1e-14)) break;

        x += alpha * st.dx;
        if (q > 0) {
            sl += alpha * st.dsl;
            zl += alpha * st.dzl;
        }
        if (soc) {
            ss += alpha * st.dss;
            zs += alpha * st.dzs;
        }
    }

    res.iterations = it;
    if (res.status != Status::Converged) {
        x = best.x;
        zl = best.zl;
        zs = best.zs;
        res.dual_residual = best.dual;
        res.primal_residual = best.primal;
        res.gap = best.gap;
        res.objective = best.objective;
        const double acc = opt.accept_tolerance;
        res.status = (res.dual_residual <= acc && res.primal_residual <= acc && res.gap <= acc) ? Status::Inaccurate
                                                                                                 : Status::Failed;
    }
    res.x = x0 + x;
    res.lambda = zl;
    res.ball_dual = zs;
    return res;
}

} // namespace strictbounds::ipm
