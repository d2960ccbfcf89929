#include "strictbounds/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "strictbounds/error.hpp"
#include "strictbounds/stats.hpp"

namespace strictbounds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Index uniform_index(Rng& rng, Index a, Index b) {
    const Index k = a + static_cast<Index>(std::floor(rng.uniform() * static_cast<double>(b - a + 1)));
    return std::min(k, b);
}

double uniform_in(Rng& rng, double a, double b) { return a + (b - a) * rng.uniform(); }

double rel(double a, double b) { return std::fabs(a - b) / (1.0 + std::fabs(b)); }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// Exact 1-D pieces for the grid oracle. With base = y - K_- v and k the last
// column, ||base - k t||^2 = a t^2 - 2 b t + c.
struct Line {
    double a, b, c;
};

double line_min(const Line& l, double lo, double hi, double& t) {
    t = l.a > 0.0 ? std::clamp(l.b / l.a, lo, hi) : lo;
    return l.a * t * t - 2.0 * l.b * t + l.c;
}

bool line_feasible(const Line& l, double radius_sq, double lo, double hi, double& t1, double& t2) {
    if (l.a <= 1e-300) {
        if (l.c > radius_sq) return false;
        t1 = lo;
        t2 = hi;
        return true;
    }
    const double disc = l.b * l.b - l.a * (l.c - radius_sq);
    if (disc < 0.0) return false;
    const double root = std::sqrt(disc);
    // Stable roots of a t^2 - 2 b t + (c - R).
    const double qv = l.b + std::copysign(root, l.b);
    double r1, r2;
    if (qv != 0.0) {
        r1 = qv / l.a;
        r2 = (l.c - radius_sq) / qv;
    } else {
        r1 = r2 = 0.0;
    }
    t1 = std::max(std::min(r1, r2), lo);
    t2 = std::min(std::max(r1, r2), hi);
    return t1 <= t2;
}

// Visits every grid point of the first p - 1 coordinates.
template <class F>
void walk_grid(const WhitenedProblem& W, const Vector& y_w, const Vector& lo, const Vector& hi, Index steps, F&& f) {
    const Index p = W.p();
    const Index g = p - 1;
    const Vector k = W.K_w.col(p - 1);
    const double a = k.squaredNorm();
    std::vector<Index> idx(static_cast<std::size_t>(g), 0);
    Vector v(g);
    while (true) {
        for (Index i = 0; i < g; ++i)
            v(i) = lo(i) + (hi(i) - lo(i)) * static_cast<double>(idx[static_cast<std::size_t>(i)]) /
                               static_cast<double>(steps);
        const Vector base = g > 0 ? Vector(y_w - W.K_w.leftCols(g) * v) : y_w;
        f(v, Line{a, k.dot(base), base.squaredNorm()});
        Index i = 0;
        while (i < g && ++idx[static_cast<std::size_t>(i)] > steps) idx[static_cast<std::size_t>(i++)] = 0;
        if (i == g) break;
    }
}

CheckResult named(std::string name) {
    CheckResult r;
    r.name = std::move(name);
    return r;
}

CheckResult finish(CheckResult r) {
    r.passed = r.failures == 0;
    return r;
}

} // namespace

RandomInstance random_instance(Rng& rng, const InstanceShape& s) {
    const Index p = uniform_index(rng, s.p_min, s.p_max);
    const Index n = p + uniform_index(rng, 1, std::max<Index>(1, s.n_extra_max));
    const bool deficient = s.allow_rank_deficient && p >= 2 && rng.uniform() < 0.5;
    Matrix K;
    if (deficient) {
        const Index r = uniform_index(rng, 1, p - 1);
        K = rng.normal_matrix(n, r) * rng.normal_matrix(r, p);
    } else {
        K = rng.normal_matrix(n, p);
    }
    for (Index j = 0; j < p; ++j) K.col(j) *= std::pow(10.0, uniform_in(rng, -1.0, 1.0));
    Vector h = rng.normal_vector(p);
    Vector x = rng.normal_vector(p).cwiseAbs();

    RandomInstance out;
    out.constraints = ConstraintSet(p);
    out.lo = Vector::Constant(p, -kInf);
    out.hi = Vector::Constant(p, kInf);
    if (s.constrained) {
        for (Index i = 0; i < p; ++i) {
            if (rng.uniform() < 0.5) {
                out.constraints.add_nonnegative(i);
                out.lo(i) = std::max(out.lo(i), 0.0);
            }
            if (s.box_every_coordinate || rng.uniform() < 0.3) {
                const double a = x(i) - uniform_in(rng, 0.2, 2.0), b = x(i) + uniform_in(rng, 0.2, 2.0);
                out.constraints.add_box(i, a, b);
                out.lo(i) = std::max(out.lo(i), a);
                out.hi(i) = std::min(out.hi(i), b);
            }
        }
        if (!s.box_every_coordinate && rng.uniform() < 0.3) {
            Vector row = rng.normal_vector(p);
            out.constraints.add_general(row, row.dot(x) + uniform_in(rng, 0.0, 1.0));
        }
    }
    if (deficient && !s.box_every_coordinate) {
        // Keep h^T x bounded without relying on the constraints.
        Eigen::JacobiSVD<Matrix> svd(K, Eigen::ComputeFullV);
        const Index r = (svd.singularValues().array() > 1e-10 * svd.singularValues()(0)).count();
        const Matrix Vr = svd.matrixV().leftCols(r);
        h = Vr * (Vr.transpose() * h);
    }
    out.x_true = x;
    out.y_w = K * x + s.noise_scale * rng.normal_vector(n);
    out.problem = WhitenedProblem::identity_noise(std::move(K), std::move(h));
    return out;
}

OracleInterval grid_oracle_interval(const WhitenedProblem& W, const Vector& y_w, const Vector& lo, const Vector& hi,
                                    double alpha, Index steps) {
    const Index p = W.p();
    if (p < 1 || p > 3) throw Error(ErrorKind::InvalidInput, "grid oracle supports 1 <= p <= 3");
    if (lo.size() != p || hi.size() != p || !lo.allFinite() || !hi.allFinite() || (lo.array() > hi.array()).any())
        throw Error(ErrorKind::InvalidInput, "grid oracle needs a finite box");
    if (steps < 1) throw Error(ErrorKind::InvalidInput, "grid oracle needs at least one step");
    const double l_lo = lo(p - 1), l_hi = hi(p - 1);

    OracleInterval out;
    out.slack_sq = kInf;
    walk_grid(W, y_w, lo, hi, steps, [&](const Vector&, const Line& l) {
        double t;
        out.slack_sq = std::min(out.slack_sq, line_min(l, l_lo, l_hi, t));
    });
    const double z = z_two_sided(alpha);
    const double radius_sq = z * z + out.slack_sq;
    out.lower = kInf;
    out.upper = -kInf;
    const double h_last = W.h(p - 1);
    walk_grid(W, y_w, lo, hi, steps, [&](const Vector& v, const Line& l) {
        double t1, t2;
        if (!line_feasible(l, radius_sq, l_lo, l_hi, t1, t2)) return;
        const double base = W.h.head(p - 1).dot(v);
        const double a = base + h_last * t1, b = base + h_last * t2;
        out.lower = std::min({out.lower, a, b});
        out.upper = std::max({out.upper, a, b});
    });
    for (Index i = 0; i + 1 < p; ++i)
        out.grid_step += std::fabs(W.h(i)) * (hi(i) - lo(i)) / static_cast<double>(steps);
    return out;
}

CheckResult check_closed_form(Index count, std::uint64_t seed, double tol) {
    CheckResult r = named("closed_form_equivalence");
    r.tolerance = tol;
    Rng rng(seed, {stream::instance, 1});
    InstanceShape shape;
    shape.constrained = false;
    for (Index t = 0; t < count; ++t) {
        const RandomInstance inst = random_instance(rng, shape);
        ++r.instances;
        try {
            const IntervalResult a = solve_interval(inst.problem, inst.y_w, inst.constraints);
            const IntervalResult b = closed_form_fullrank(inst.problem, inst.y_w);
            const double e = std::max(rel(a.lower, b.lower), rel(a.upper, b.upper));
            r.worst = std::max(r.worst, e);
            if (!(e <= tol)) {
                ++r.failures;
                if (r.detail.empty()) r.detail = "instance " + std::to_string(t) + ": discrepancy " + fmt(e);
            }
        } catch (const Error& e) {
            ++r.failures;
            if (r.detail.empty()) r.detail = "instance " + std::to_string(t) + ": " + e.what();
        }
    }
    return finish(r);
}

CheckResult check_reduction(Index count, std::uint64_t seed, double tol, double slack_tol) {
    CheckResult r = named("reduction_equivalence");
    r.tolerance = tol;
    Rng rng(seed, {stream::instance, 2});
    InstanceShape shape;
    shape.allow_rank_deficient = true;
    for (Index t = 0; t < count; ++t) {
        shape.constrained = t % 2 == 1;
        const RandomInstance inst = random_instance(rng, shape);
        ++r.instances;
        try {
            const IntervalResult f = solve_interval(inst.problem, inst.y_w, inst.constraints);
            const IntervalResult g = solve_interval_reduced(inst.problem, inst.y_w, inst.constraints);
            const double e = std::max(rel(g.lower, f.lower), rel(g.upper, f.upper));
            const double es = rel(g.stats.reduced_slack_sq + g.stats.tail_sq, f.slack_sq);
            r.worst = std::max(r.worst, e);
            if (!(e <= tol) || !(es <= slack_tol)) {
                ++r.failures;
                if (r.detail.empty())
                    r.detail = "instance " + std::to_string(t) + ": endpoint " + fmt(e) + ", slack " + fmt(es);
            }
        } catch (const Error& e) {
            ++r.failures;
            if (r.detail.empty()) r.detail = "instance " + std::to_string(t) + ": " + e.what();
        }
    }
    return finish(r);
}

CheckResult check_certificates(Index count, std::uint64_t seed, double tol, double min_share) {
    CheckResult r = named("duality_certificates");
    r.tolerance = tol;
    Rng rng(seed, {stream::instance, 3});
    InstanceShape shape;
    shape.allow_rank_deficient = true;
    Index endpoints = 0, certified = 0, bad_emitted = 0;
    for (Index t = 0; t < count; ++t) {
        const RandomInstance inst = random_instance(rng, shape);
        ++r.instances;
        try {
            const IntervalResult res = solve_interval(inst.problem, inst.y_w, inst.constraints);
            const std::pair<const DualCertificate*, Endpoint> ends[] = {{&res.dual_lower, Endpoint::Lower},
                                                                        {&res.dual_upper, Endpoint::Upper}};
            for (const auto& [cert, which] : ends) {
                ++endpoints;
                const double value = which == Endpoint::Lower ? res.lower : res.upper;
                r.worst = std::max(r.worst, cert->gap / (1.0 + std::fabs(value)));
                if (!cert->certified) continue;
                ++certified;
                const CertificateCheck chk =
                    verify_certificate(inst.problem, inst.y_w, inst.constraints, res.radius_sq, which, *cert);
                const bool ok = chk.stationarity <= tol * (1.0 + inst.problem.h.norm()) &&
                                (inst.constraints.empty() || chk.min_c >= -1e-10) &&
                                std::fabs(chk.objective - value) <= tol * (1.0 + std::fabs(value));
                if (!ok) {
                    ++bad_emitted;
                    if (r.detail.empty()) r.detail = "instance " + std::to_string(t) + ": certificate fails re-check";
                }
            }
        } catch (const Error& e) {
            endpoints += 2;
            if (r.detail.empty()) r.detail = "instance " + std::to_string(t) + ": " + e.what();
        }
    }
    const double share = endpoints > 0 ? static_cast<double>(certified) / static_cast<double>(endpoints) : 1.0;
    r.failures = (endpoints - certified) + bad_emitted;
    r.passed = share >= min_share && bad_emitted == 0;
    std::string summary = "certified " + std::to_string(certified) + "/" + std::to_string(endpoints);
    r.detail = r.detail.empty() ? summary : summary + "; " + r.detail;
    return r;
}

CheckResult check_grid_oracle(Index count, std::uint64_t seed, Index steps) {
    CheckResult r = named("grid_oracle_equivalence");
    Rng rng(seed, {stream::instance, 4});
    InstanceShape shape;
    shape.p_max = 3;
    shape.n_extra_max = 6;
    shape.box_every_coordinate = true;
    for (Index t = 0; t < count; ++t) {
        const RandomInstance inst = random_instance(rng, shape);
        ++r.instances;
        try {
            const IntervalResult s = solve_interval(inst.problem, inst.y_w, inst.constraints);
            const OracleInterval o = grid_oracle_interval(inst.problem, inst.y_w, inst.lo, inst.hi, 0.05, steps);
            const double allow = o.grid_step + 1e-6 * (1.0 + std::max(std::fabs(o.lower), std::fabs(o.upper)));
            const double e = std::max(std::fabs(s.lower - o.lower), std::fabs(s.upper - o.upper));
            r.worst = std::max(r.worst, e / allow);
            if (!(e <= allow)) {
                ++r.failures;
                if (r.detail.empty())
                    r.detail = "instance " + std::to_string(t) + ": off by " + fmt(e) + " (allowed " + fmt(allow) + ")";
            }
        } catch (const Error& e) {
            ++r.failures;
            if (r.detail.empty()) r.detail = "instance " + std::to_string(t) + ": " + e.what();
        }
    }
    r.tolerance = 1.0; // worst is reported in grid steps
    return finish(r);
}

std::vector<CheckResult> self_check(const LinearProblem* problem, const ConstraintSet* constraints,
                                    std::uint64_t seed, Index count) {
    std::vector<CheckResult> out;
    auto done = [&] { return !out.empty() && !out.back().passed; };

    if (problem) {
        CheckResult in = named("input_validation");
        in.instances = 1;
        try {
            problem->validate();
            if (constraints && constraints->p() != problem->p())
                throw Error(ErrorKind::InvalidInput, "constraints dimension does not match problem p");
            const WhitenedProblem W = whiten(*problem);
            if (!W.K_w.allFinite()) throw Error(ErrorKind::InvalidInput, "whitened K has non-finite entries");
        } catch (const Error& e) {
            in.failures = 1;
            in.detail = e.what();
        }
        out.push_back(finish(in));
        if (done()) return out;

        // The supplied problem itself: reduced vs full on simulated data, plus
        // the closed form when it is unconstrained and full rank.
        const WhitenedProblem W = whiten(*problem);
        const ConstraintSet cs = constraints ? *constraints : ConstraintSet(problem->p());
        CheckResult pr = named("supplied_problem_reduction");
        pr.tolerance = 1e-6;
        try {
            const IntervalSolver full(W, cs, false), red(W, cs, true);
            Rng rng(seed, {stream::instance, 5});
            const Vector x0 = full.slack(W.K_w * rng.normal_vector(W.p()).cwiseAbs()).x_feas;
            for (Index t = 0; t < std::min<Index>(count, 10); ++t) {
                const Vector y = W.K_w * x0 + rng.normal_vector(W.n());
                const IntervalResult f = full.interval(y, 0.05, RadiusMode::OneAtATime);
                const IntervalResult g = red.interval(y, 0.05, RadiusMode::OneAtATime);
                const double e = std::max(rel(g.lower, f.lower), rel(g.upper, f.upper));
                pr.worst = std::max(pr.worst, e);
                ++pr.instances;
                if (!(e <= pr.tolerance)) {
                    ++pr.failures;
                    if (pr.detail.empty()) pr.detail = "draw " + std::to_string(t) + ": discrepancy " + fmt(e);
                }
                if (cs.empty() && spectral_summary(W).numeric_rank == W.p()) {
                    const IntervalResult c = closed_form_fullrank(W, y);
                    const double ec = std::max(rel(f.lower, c.lower), rel(f.upper, c.upper));
                    pr.worst = std::max(pr.worst, ec);
                    if (!(ec <= pr.tolerance)) {
                        ++pr.failures;
                        if (pr.detail.empty()) pr.detail = "draw " + std::to_string(t) + ": closed form off by " + fmt(ec);
                    }
                }
            }
        } catch (const Error& e) {
            ++pr.failures;
            pr.detail = e.what();
        }
        out.push_back(finish(pr));
        if (done()) return out;
    }

    out.push_back(check_reduction(count, seed));
    if (done()) return out;
    out.push_back(check_closed_form(count, seed));
    if (done()) return out;
    out.push_back(check_certificates(count, seed));
    if (done()) return out;
    out.push_back(check_grid_oracle(std::max<Index>(1, count / 2), seed));
    return out;
}

} // namespace strictbounds
