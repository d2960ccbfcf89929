#include "strictbounds/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "strictbounds/error.hpp"
#include "strictbounds/parallel.hpp"
#include "strictbounds/rng.hpp"
#include "strictbounds/stats.hpp"
#include "strictbounds/study.hpp"

namespace strictbounds {

namespace {

void check_alpha(double a, const char* what) {
    if (!(a > 0.0 && a < 1.0)) throw Error(ErrorKind::InvalidInput, std::string(what) + " must lie in (0, 1)");
}

void check_options(const SweepOptions& o) {
    check_alpha(o.alpha, "alpha");
    if (o.n_noise < 1) throw Error(ErrorKind::InvalidInput, "n_noise must be positive");
}

void check_state(const Vector& x, Index p, const char* what) {
    if (x.size() != p)
        throw Error(ErrorKind::InvalidInput, std::string(what) + " has length " + std::to_string(x.size()) +
                                                 ", expected " + std::to_string(p));
    if (!x.allFinite()) throw Error(ErrorKind::InvalidInput, std::string(what) + " contains non-finite values");
}

struct Draw {
    bool ok = false;
    bool covered = false;
    double length = 0.0;
};

LengthStats summarize(const std::vector<Draw>& draws) {
    LengthStats s;
    double sum = 0.0;
    Index hits = 0;
    for (const Draw& d : draws) {
        if (!d.ok) {
            ++s.failures;
            continue;
        }
        ++s.n;
        sum += d.length;
        hits += d.covered;
    }
    if (s.n == 0) {
        s.mean_length = s.length_sd = s.coverage = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    s.mean_length = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (const Draw& d : draws)
        if (d.ok) ss += (d.length - s.mean_length) * (d.length - s.mean_length);
    s.length_sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    s.coverage = static_cast<double>(hits) / static_cast<double>(s.n);
    return s;
}

Vector noisy_observation(const WhitenedProblem& W, const Vector& y_mean, std::uint64_t seed, Index j) {
    Rng rng(seed, {stream::noise, static_cast<std::uint64_t>(j)});
    return y_mean + rng.normal_vector(W.n());
}

SolverOptions sweep_solver_options() {
    SolverOptions o;
    o.certify = false;
    return o;
}

} // namespace

void ProbabilisticConstraint::validate(Index p) const {
    if (index < 0 || index >= p)
        throw Error(ErrorKind::InvalidInput, "probabilistic constraint index " + std::to_string(index) +
                                                 " outside [0, " + std::to_string(p) + ")");
    if (!std::isfinite(center)) throw Error(ErrorKind::InvalidInput, "probabilistic constraint center is not finite");
    if (!(standard_error > 0.0) || !std::isfinite(standard_error))
        throw Error(ErrorKind::InvalidInput, "probabilistic constraint standard_error must be positive");
    check_alpha(level_alpha, "probabilistic constraint level_alpha");
}

double ProbabilisticConstraint::half_width() const { return z_two_sided(level_alpha) * standard_error; }

CalibrationPlan make_plan(double total_alpha, const std::vector<double>& alphas, double gamma) {
    check_alpha(total_alpha, "total_alpha");
    check_alpha(gamma, "gamma");
    for (double a : alphas) check_alpha(a, "constraint alpha");
    const double sum = gamma + std::accumulate(alphas.begin(), alphas.end(), 0.0);
    if (std::abs(sum - total_alpha) > 1e-12)
        throw Error(ErrorKind::BudgetMismatch, "gamma + sum(alphas) = " + std::to_string(sum) +
                                                   " differs from total_alpha = " + std::to_string(total_alpha));
    return CalibrationPlan{gamma, alphas, total_alpha};
}

CalibrationPlan plan_for_alphas(double total_alpha, const std::vector<double>& alphas) {
    const double gamma = total_alpha - std::accumulate(alphas.begin(), alphas.end(), 0.0);
    if (!(gamma > 0.0))
        throw Error(ErrorKind::BudgetMismatch, "constraint alphas exhaust the total budget");
    return make_plan(total_alpha, alphas, gamma);
}

LengthStats interval_lengths(const WhitenedProblem& W, const ConstraintSet& constraints, const Vector& x_true,
                             const SweepOptions& options, std::uint64_t seed) {
    check_options(options);
    check_state(x_true, W.p(), "x_true");
    const IntervalSolver solver(W, constraints, options.reduce, sweep_solver_options());
    const Vector y_mean = W.K_w * x_true;
    const double theta = W.h.dot(x_true);
    std::vector<Draw> draws(static_cast<std::size_t>(options.n_noise));
    parallel_for(draws.size(), options.workers, [&](std::size_t j) {
        try {
            const IntervalResult r =
                solver.interval(noisy_observation(W, y_mean, seed, static_cast<Index>(j)), options.alpha, options.mode);
            draws[j] = Draw{true, interval_indicator(r, theta) != 0, r.length()};
        } catch (const Error&) {
            draws[j] = Draw{};
        }
    });
    return summarize(draws);
}

std::vector<ImportanceRow> variable_importance(const LinearProblem& problem, const ConstraintSet& constraints,
                                               const Vector& x_true, const std::vector<Index>& indices,
                                               const SweepOptions& options, std::uint64_t seed) {
    problem.validate();
    check_state(x_true, problem.p(), "x_true");
    const WhitenedProblem W = whiten(problem);
    std::vector<ImportanceRow> rows;
    rows.push_back(ImportanceRow{-1, "baseline", interval_lengths(W, constraints, x_true, options, seed)});
    for (Index i : indices) {
        if (i < 0 || i >= problem.p())
            throw Error(ErrorKind::InvalidInput, "importance index " + std::to_string(i) + " out of range");
        ConstraintSet pinned = constraints;
        pinned.add_fix(i, x_true(i));
        const std::string label =
            static_cast<std::size_t>(i) < problem.labels.size() ? problem.labels[static_cast<std::size_t>(i)]
                                                                : std::to_string(i);
        rows.push_back(ImportanceRow{i, label, interval_lengths(W, pinned, x_true, options, seed)});
    }
    return rows;
}

std::vector<BoxSweepRow> box_sweep(const LinearProblem& problem, const ConstraintSet& constraints,
                                   const Vector& x_true, Index index, double center,
                                   const std::vector<double>& deltas, const SweepOptions& options,
                                   std::uint64_t seed) {
    problem.validate();
    if (index < 0 || index >= problem.p())
        throw Error(ErrorKind::InvalidInput, "box index " + std::to_string(index) + " out of range");
    if (!std::isfinite(center)) throw Error(ErrorKind::InvalidInput, "box center is not finite");
    const WhitenedProblem W = whiten(problem);
    std::vector<BoxSweepRow> rows;
    for (double delta : deltas) {
        if (std::isnan(delta) || delta < 0.0)
            throw Error(ErrorKind::InvalidInput, "box half-widths must be nonnegative");
        ConstraintSet c = constraints;
        if (std::isfinite(delta)) c.add_box(index, center - delta, center + delta);
        rows.push_back(BoxSweepRow{delta, interval_lengths(W, c, x_true, options, seed)});
    }
    return rows;
}

std::vector<double> default_gamma_grid(double total_alpha, Index points) {
    check_alpha(total_alpha, "total_alpha");
    if (points < 2) throw Error(ErrorKind::InvalidInput, "gamma grid needs at least two points");
    const double lo = std::log(total_alpha / 100.0), hi = std::log(0.99 * total_alpha);
    std::vector<double> g;
    for (Index k = 0; k < points; ++k)
        g.push_back(std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1)));
    return g;
}

OptimizeResult optimize_plan(const LinearProblem& problem, const ConstraintSet& base_constraints,
                             const Vector& ansatz, const ProbabilisticConstraint& constraint_template,
                             double total_alpha, const std::vector<double>& gammas, const SweepOptions& options,
                             std::uint64_t seed) {
    problem.validate();
    check_alpha(total_alpha, "total_alpha");
    check_state(ansatz, problem.p(), "ansatz");
    if (gammas.empty()) throw Error(ErrorKind::InvalidInput, "gamma grid is empty");
    const WhitenedProblem W = whiten(problem);

    OptimizeResult out;
    std::optional<std::size_t> best;
    for (double gamma : gammas) {
        if (!(gamma > 0.0 && gamma < total_alpha))
            throw Error(ErrorKind::InvalidInput, "gamma values must lie in (0, total_alpha)");
        ProbabilisticConstraint pc = constraint_template;
        pc.center = ansatz(pc.index);
        pc.level_alpha = total_alpha - gamma;
        pc.validate(problem.p());
        double lo = pc.center - pc.half_width(), hi = pc.center + pc.half_width();
        clip_to_bounds(base_constraints, pc.index, lo, hi);
        ConstraintSet c = base_constraints;
        c.add_box(pc.index, lo, hi);
        SweepOptions o = options;
        o.alpha = gamma;
        out.rows.push_back(GammaRow{gamma, pc.level_alpha, interval_lengths(W, c, ansatz, o, seed)});

        const double len = out.rows.back().stats.mean_length;
        if (!std::isfinite(len)) continue;
        if (!best) {
            best = out.rows.size() - 1;
            continue;
        }
        const GammaRow& b = out.rows[*best];
        const double tol = 1e-12 * std::max(1.0, std::abs(b.stats.mean_length));
        if (len < b.stats.mean_length - tol || (std::abs(len - b.stats.mean_length) <= tol && gamma > b.gamma))
            best = out.rows.size() - 1;
    }
    if (!best) throw Error(ErrorKind::SolverStall, "no gamma produced a finite mean length");
    const GammaRow& b = out.rows[*best];
    out.plan = make_plan(total_alpha, {b.alpha_i}, total_alpha - b.alpha_i);
    return out;
}

bool clip_to_bounds(const ConstraintSet& base, Index index, double& lo, double& hi) {
    double L = -std::numeric_limits<double>::infinity(), U = std::numeric_limits<double>::infinity();
    for (const ConstraintDescriptor& d : base.descriptors()) {
        if (const auto* nn = std::get_if<NonNegative>(&d)) {
            if (nn->index == index) L = std::max(L, 0.0);
        } else if (const auto* bx = std::get_if<Box>(&d)) {
            if (bx->index == index) {
                L = std::max(L, bx->lo);
                U = std::min(U, bx->hi);
            }
        } else if (const auto* fx = std::get_if<FixEqual>(&d)) {
            if (fx->index == index) {
                L = std::max(L, fx->value);
                U = std::min(U, fx->value);
            }
        }
    }
    if (L > U) return false; // base set already infeasible; leave it to the solver
    const double lo0 = lo, hi0 = hi;
    lo = std::max(lo, L);
    hi = std::min(hi, U);
    if (lo > hi) {
        // Box entirely outside the base range: collapse onto the nearer bound.
        const double v = hi0 < L ? L : U;
        lo = hi = v;
    }
    return lo != lo0 || hi != hi0;
}

CalibratedInterval calibrated_interval(const WhitenedProblem& W, const ConstraintSet& base_constraints,
                                       const CalibrationPlan& plan,
                                       const std::vector<ProbabilisticConstraint>& realized, const Vector& y_w,
                                       const SweepOptions& options) {
    make_plan(plan.total_alpha, plan.alphas, plan.gamma);
    if (realized.size() != plan.alphas.size())
        throw Error(ErrorKind::InvalidInput, "plan has " + std::to_string(plan.alphas.size()) +
                                                 " constraint levels but " + std::to_string(realized.size()) +
                                                 " constraints were supplied");
    CalibratedInterval out;
    ConstraintSet c = base_constraints;
    for (std::size_t k = 0; k < realized.size(); ++k) {
        ProbabilisticConstraint pc = realized[k];
        pc.level_alpha = plan.alphas[k];
        pc.validate(W.p());
        double lo = pc.center - pc.half_width(), hi = pc.center + pc.half_width();
        out.clipped = clip_to_bounds(base_constraints, pc.index, lo, hi) || out.clipped;
        c.add_box(pc.index, lo, hi);
    }
    SolverOptions so;
    so.certify = false;
    const IntervalSolver solver(W, c, options.reduce, so);
    out.interval = solver.interval(y_w, plan.gamma, options.mode);
    out.interval.method = "calibrated";
    out.final_level = 1.0 - plan.total_alpha;
    return out;
}

CalibrationRow evaluate_calibration(const LinearProblem& problem, const ConstraintSet& base_constraints,
                                    const CalibrationPlan& plan,
                                    const std::vector<ProbabilisticConstraint>& templates, const Vector& x_true,
                                    Index replicates, const SweepOptions& options, std::uint64_t seed) {
    problem.validate();
    check_state(x_true, problem.p(), "x_true");
    if (replicates < 1) throw Error(ErrorKind::InvalidInput, "replicates must be positive");
    make_plan(plan.total_alpha, plan.alphas, plan.gamma);
    if (templates.size() != plan.alphas.size())
        throw Error(ErrorKind::InvalidInput, "one template per planned constraint is required");
    for (const ProbabilisticConstraint& t : templates) t.validate(problem.p());

    const WhitenedProblem W = whiten(problem);
    const Vector y_mean = W.K_w * x_true;
    const double theta = W.h.dot(x_true);
    std::optional<IntervalSolver> fixed;
    if (templates.empty()) {
        SolverOptions so;
        so.certify = false;
        fixed.emplace(W, base_constraints, options.reduce, so);
    }

    std::vector<Draw> draws(static_cast<std::size_t>(replicates));
    std::vector<char> clipped(draws.size(), 0);
    parallel_for(draws.size(), options.workers, [&](std::size_t r) {
        const Vector y = noisy_observation(W, y_mean, seed, static_cast<Index>(r));
        try {
            if (fixed) {
                const IntervalResult res = fixed->interval(y, plan.gamma, options.mode);
                draws[r] = Draw{true, interval_indicator(res, theta) != 0, res.length()};
                return;
            }
            Rng ext(seed, {stream::external, static_cast<std::uint64_t>(r)});
            std::vector<ProbabilisticConstraint> realized = templates;
            for (ProbabilisticConstraint& pc : realized)
                pc.center = x_true(pc.index) + pc.standard_error * ext.normal();
            const CalibratedInterval ci = calibrated_interval(W, base_constraints, plan, realized, y, options);
            clipped[r] = ci.clipped;
            draws[r] = Draw{true, interval_indicator(ci.interval, theta) != 0, ci.interval.length()};
        } catch (const Error&) {
            draws[r] = Draw{};
        }
    });

    const LengthStats s = summarize(draws);
    CalibrationRow row;
    row.standard_error = templates.empty() ? std::numeric_limits<double>::quiet_NaN() : templates.front().standard_error;
    row.internal_level = 1.0 - plan.gamma;
    row.constraint_level = plan.alphas.empty() ? 1.0 : 1.0 - plan.alphas.front();
    row.empirical_coverage = s.coverage;
    row.mean_length = s.mean_length;
    row.length_sd = s.length_sd;
    row.n = s.n;
    row.failures = s.failures;
    row.clipped = std::count(clipped.begin(), clipped.end(), 1);
    return row;
}

} // namespace strictbounds
