#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "strictbounds/calibration.hpp"
#include "strictbounds/error.hpp"
#include "strictbounds/simulation.hpp"
#include "strictbounds/stats.hpp"

using namespace strictbounds;

namespace {

SyntheticInstance paper_like(std::uint64_t seed) { return gen_problem(SyntheticSpec::paper_like(), seed); }

} // namespace

TEST_CASE("plans satisfy the budget identity or are rejected") {
    const CalibrationPlan p = make_plan(0.05, {0.01, 0.015}, 0.025);
    CHECK(p.gamma + p.alphas[0] + p.alphas[1] == doctest::Approx(0.05).epsilon(1e-15));
    try {
        make_plan(0.05, {0.02}, 0.04);
        FAIL("expected BudgetMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BudgetMismatch);
    }
    const CalibrationPlan q = plan_for_alphas(0.05, {0.02});
    CHECK(q.gamma == doctest::Approx(0.03));
    CHECK_THROWS_AS(plan_for_alphas(0.05, {0.06}), Error);
}

TEST_CASE("probabilistic constraint half-width uses the two-sided normal quantile") {
    ProbabilisticConstraint c;
    c.standard_error = 2.0;
    c.level_alpha = 0.05;
    CHECK(c.half_width() == doctest::Approx(2.0 * z_two_sided(0.05)));
}

TEST_CASE("a plan without probabilistic constraints reproduces the plain interval") {
    const SyntheticInstance inst = paper_like(1);
    const WhitenedProblem W = whiten(inst.problem);
    Rng rng(1, {stream::noise, 0});
    const Vector y_w = W.K_w * inst.generative.mu_x + rng.normal_vector(W.n());
    const CalibratedInterval c = calibrated_interval(W, inst.constraints, plan_for_alphas(0.05, {}), {}, y_w);
    const IntervalResult r = solve_interval_reduced(W, y_w, inst.constraints, 0.05);
    CHECK(c.interval.lower == r.lower);
    CHECK(c.interval.upper == r.upper);
    CHECK(c.final_level == doctest::Approx(0.95));
    CHECK_FALSE(c.clipped);
}

TEST_CASE("boxes are clipped to the simple bounds already present") {
    ConstraintSet base(3);
    base.add_nonnegative(1);
    base.add_box(2, -1.0, 1.0);
    double lo = -2.0, hi = 3.0;
    CHECK(clip_to_bounds(base, 1, lo, hi));
    CHECK(lo == 0.0);
    CHECK(hi == 3.0);
    lo = -5.0, hi = -4.0;
    CHECK(clip_to_bounds(base, 1, lo, hi));
    CHECK(lo == 0.0);
    CHECK(hi == 0.0);
    lo = -0.5, hi = 0.5;
    CHECK_FALSE(clip_to_bounds(base, 2, lo, hi));
    lo = -3.0, hi = 4.0;
    CHECK(clip_to_bounds(base, 2, lo, hi));
    CHECK(lo == -1.0);
    CHECK(hi == 1.0);
    lo = -3.0, hi = 4.0;
    CHECK_FALSE(clip_to_bounds(base, 0, lo, hi));
}

TEST_CASE("a realized box that contradicts a bound is clipped, not infeasible") {
    const SyntheticInstance inst = paper_like(2);
    const WhitenedProblem W = whiten(inst.problem);
    Rng rng(2, {stream::noise, 0});
    const Vector y_w = W.K_w * inst.generative.mu_x + rng.normal_vector(W.n());
    ProbabilisticConstraint c;
    c.index = StateBlocks{}.pressure_index();
    c.center = -50.0; // far below the non-negativity bound
    c.standard_error = 1.0;
    c.level_alpha = 0.01;
    const CalibratedInterval r = calibrated_interval(W, inst.constraints, plan_for_alphas(0.05, {0.01}), {c}, y_w);
    CHECK(r.clipped);
    CHECK(std::isfinite(r.interval.lower));
}

TEST_CASE("sweep baselines equal direct solves bit for bit") {
    const SyntheticInstance inst = paper_like(3);
    const WhitenedProblem W = whiten(inst.problem);
    const Vector x = inst.generative.mu_x;
    SweepOptions opt;
    opt.n_noise = 5;
    const std::vector<ImportanceRow> rows = variable_importance(inst.problem, inst.constraints, x, {20}, opt, 4);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].index == -1);
    const IntervalSolver solver(W, inst.constraints, true);
    double total = 0.0;
    for (Index j = 0; j < opt.n_noise; ++j) {
        Rng rng(4, {stream::noise, static_cast<std::uint64_t>(j)});
        const Vector y_w = W.K_w * x + rng.normal_vector(W.n());
        total += solver.interval(y_w, 0.05, RadiusMode::OneAtATime).length();
    }
    CHECK(rows[0].stats.mean_length == doctest::Approx(total / opt.n_noise).epsilon(1e-14));
    // Pinning pressure shortens the interval.
    CHECK(rows[1].stats.mean_length < rows[0].stats.mean_length);

    const std::vector<BoxSweepRow> sweep =
        box_sweep(inst.problem, inst.constraints, x, 20, x(20), {0.0, 1.0, INFINITY}, opt, 4);
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[2].stats.mean_length == rows[0].stats.mean_length);
    CHECK(sweep[0].stats.mean_length < sweep[1].stats.mean_length);
    CHECK(sweep[1].stats.mean_length < sweep[2].stats.mean_length);
}

TEST_CASE("gamma grid is log-spaced inside the budget") {
    const std::vector<double> g = default_gamma_grid(0.05);
    REQUIRE(g.size() == 40);
    CHECK(g.front() == doctest::Approx(0.0005));
    CHECK(g.back() == doctest::Approx(0.0495));
    for (std::size_t i = 2; i < g.size(); ++i)
        CHECK(g[i] / g[i - 1] == doctest::Approx(g[1] / g[0]).epsilon(1e-10));
}

TEST_CASE("optimized plans honour the budget and pick long internal levels at the extremes") {
    const SyntheticInstance inst = paper_like(5);
    SweepOptions opt;
    opt.n_noise = 20;
    ProbabilisticConstraint t;
    t.index = StateBlocks{}.pressure_index();
    const std::vector<double> grid = default_gamma_grid(0.05, 12);
    for (double sigma : {1e-3, 1.0}) {
        t.standard_error = sigma;
        const OptimizeResult r =
            optimize_plan(inst.problem, inst.constraints, inst.prior.mu_a, t, 0.05, grid, opt, 6);
        CHECK(r.rows.size() == grid.size());
        CHECK(r.plan.gamma + r.plan.alphas[0] == doctest::Approx(0.05).epsilon(1e-14));
        if (sigma < 0.01) CHECK(r.plan.gamma == doctest::Approx(grid.back()));
        else CHECK(r.plan.gamma < grid.back());
    }
}

TEST_CASE("final coverage respects the union bound") {
    const SyntheticInstance inst = paper_like(7);
    SweepOptions opt;
    ProbabilisticConstraint t;
    t.index = StateBlocks{}.pressure_index();
    t.standard_error = 1.0;
    const CalibrationPlan plan = make_plan(0.05, {0.02}, 0.03);
    const Index reps = 400;
    const CalibrationRow row =
        evaluate_calibration(inst.problem, inst.constraints, plan, {t}, inst.generative.mu_x, reps, opt, 8);
    CHECK(row.n + row.failures == reps);
    const double miss = 1.0 - row.empirical_coverage;
    CHECK(miss <= 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / reps));
    CHECK(row.internal_level == doctest::Approx(0.97));
    CHECK(row.constraint_level == doctest::Approx(0.98));
}
