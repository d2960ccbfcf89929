#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "strictbounds/error.hpp"
#include "strictbounds/stats.hpp"
#include "strictbounds/study.hpp"

using namespace strictbounds;

namespace {

struct Small {
    LinearProblem problem;
    PriorModel prior;
    GenerativeModel generative;
    ConstraintSet constraints{0};
};

Small small_problem(std::uint64_t seed) {
    SyntheticSpec s;
    s.n = 40;
    s.p = 6;
    s.decay = 0.5;
    s.functional_end = 4;
    s.nonnegative = {};
    const SyntheticInstance inst = gen_problem(s, seed);
    return {inst.problem, inst.prior, inst.generative, inst.constraints};
}

} // namespace

TEST_CASE("interval indicator treats the interval as closed") {
    CHECK(interval_indicator(0.0, 1.0, 0.5) == 1);
    CHECK(interval_indicator(0.0, 1.0, 0.0) == 1);
    CHECK(interval_indicator(0.0, 1.0, 1.0) == 1);
    CHECK(interval_indicator(0.0, 1.0, 1.0 + 1e-15) == 0);
    CHECK(interval_indicator(0.0, 1.0, -1e-300) == 0);
}

TEST_CASE("histogram bins cover [0, 1] with the last bin closed") {
    const Histogram h = coverage_histogram("bayes", {0.0, 0.004999, 0.005, 0.951, 1.0, std::nan("")}, 0.005);
    CHECK(h.counts.size() == 200);
    CHECK(h.counts[0] == 2);
    CHECK(h.counts[1] == 1);
    CHECK(h.counts[190] == 1);
    CHECK(h.counts[199] == 1);
    CHECK_THROWS_AS(coverage_histogram("x", {}, 0.0), Error);
}

TEST_CASE("Bayes empirical coverage passes the self-consistency gate on every row") {
    const Small s = small_problem(3);
    StudyOptions opt;
    opt.n_states = 12;
    opt.n_noise = 4000;
    opt.run_frequentist = false;
    const StudyReport r = run_single_sounding_study(s.problem, s.prior, s.generative, s.constraints, opt, 99);
    CHECK(r.per_x.size() == 12);
    for (const StudyRecord& rec : r.per_x) {
        const double c = rec.analytic_coverage;
        const double gate = 3.0 * std::sqrt(c * (1.0 - c) / static_cast<double>(rec.n_noise_draws)) + 0.005;
        CHECK(std::fabs(rec.empirical_coverage - c) <= gate);
        CHECK(rec.empirical_coverage >= 0.0);
        CHECK(rec.empirical_coverage <= 1.0);
    }
}

TEST_CASE("point-mass truth at the prior mean gives zero bias and overcoverage") {
    Small s = small_problem(4);
    s.generative = {s.prior.mu_a, Matrix::Zero(6, 6)};
    StudyOptions opt;
    opt.n_states = 5;
    opt.n_noise = 500;
    opt.n_noise_freq = 20;
    const StudyReport r = run_single_sounding_study(s.problem, s.prior, s.generative, s.constraints, opt, 1);
    for (const StudyRecord& rec : r.per_x)
        if (rec.method == "bayes") {
            CHECK(rec.bias == 0.0);
            CHECK(rec.analytic_coverage > 0.95);
        }
    CHECK(r.undercoverage_fraction.at("bayes") == 0.0);
}

TEST_CASE("reports do not depend on the worker count") {
    const Small s = small_problem(5);
    StudyOptions opt;
    opt.n_states = 6;
    opt.n_noise = 300;
    opt.n_noise_freq = 40;
    opt.workers = 1;
    const StudyReport a = run_single_sounding_study(s.problem, s.prior, s.generative, s.constraints, opt, 7);
    opt.workers = 4;
    const StudyReport b = run_single_sounding_study(s.problem, s.prior, s.generative, s.constraints, opt, 7);
    REQUIRE(a.per_x.size() == b.per_x.size());
    for (std::size_t i = 0; i < a.per_x.size(); ++i) {
        CHECK(a.per_x[i].method == b.per_x[i].method);
        CHECK(a.per_x[i].empirical_coverage == b.per_x[i].empirical_coverage);
        CHECK(a.per_x[i].mean_length == b.per_x[i].mean_length);
        CHECK(a.per_x[i].theta == b.per_x[i].theta);
    }
}

TEST_CASE("frequentist rows carry no Bayes-only fields and lengths are stable across states") {
    const Small s = small_problem(6);
    StudyOptions opt;
    opt.n_states = 5;
    opt.n_noise = 10;
    opt.n_noise_freq = 100;
    opt.run_bayes = false;
    const StudyReport r = run_single_sounding_study(s.problem, s.prior, s.generative, s.constraints, opt, 8);
    for (const StudyRecord& rec : r.per_x) {
        CHECK(rec.method == "frequentist");
        CHECK(std::isnan(rec.bias));
        CHECK(std::isnan(rec.analytic_coverage));
        CHECK(rec.n_noise_draws + rec.failures == 100);
        // No constraints: every interval has the same length.
        CHECK(rec.length_sd <= 1e-8 * rec.mean_length);
    }
}

TEST_CASE("invalid study options are rejected") {
    const Small s = small_problem(7);
    StudyOptions opt;
    opt.alpha = 1.0;
    CHECK_THROWS_AS(run_single_sounding_study(s.problem, s.prior, s.generative, s.constraints, opt, 1), Error);
    opt = StudyOptions();
    opt.n_states = 0;
    CHECK_THROWS_AS(run_single_sounding_study(s.problem, s.prior, s.generative, s.constraints, opt, 1), Error);
}

TEST_CASE("grid study: infinite range gives one state everywhere") {
    const Small s = small_problem(8);
    const SpatialModel sp = uniform_spatial_model(s.generative, grid_locations(4, 4, 1.0, 1.0), 0.5, 1e12);
    const GridReport r = run_grid_study(s.problem, s.prior, sp, 0.05, 3);
    REQUIRE(r.per_location.size() == 16);
    // The factorization jitter (<= 1e-8 of the diagonal) leaves ~1e-4 relative spread.
    CHECK(r.jitter <= 1e-8 * s.generative.sigma_x.diagonal().maxCoeff());
    for (const GridRecord& g : r.per_location) {
        CHECK(g.bias == doctest::Approx(r.per_location[0].bias).epsilon(1e-3).scale(1.0));
        CHECK(g.delta_from_nominal == g.analytic_coverage - 0.95);
    }
}

TEST_CASE("grid study: moderate ranges are smooth, tiny ranges are not") {
    const Small s = small_problem(9);
    double smooth = 0.0, rough = 0.0;
    const int seeds = 10;
    const SpatialModel a = uniform_spatial_model(s.generative, grid_locations(8, 8, 1.0, 1.0), 1.5, 8.0);
    const SpatialModel b = uniform_spatial_model(s.generative, grid_locations(8, 8, 1.0, 1.0), 1.5, 1e-6);
    const SpatialFactor fa = factor_spatial(a), fb = factor_spatial(b);
    for (int k = 0; k < seeds; ++k) {
        smooth += run_grid_study(s.problem, s.prior, a, fa, 0.05, k).bias_autocorrelation / seeds;
        rough += run_grid_study(s.problem, s.prior, b, fb, 0.05, k).bias_autocorrelation / seeds;
    }
    CHECK(smooth > 0.5);
    CHECK(std::fabs(rough) < 0.1);
}

TEST_CASE("lag-1 autocorrelation of a linear ramp is high and of a checkerboard is -1") {
    const Matrix loc = grid_locations(5, 5, 1.0, 1.0);
    Vector ramp(25), checker(25);
    for (Index i = 0; i < 25; ++i) {
        ramp(i) = loc(i, 0) + loc(i, 1);
        checker(i) = (static_cast<int>(loc(i, 0) + loc(i, 1)) % 2 == 0) ? 1.0 : -1.0;
    }
    CHECK(lag1_autocorrelation(loc, ramp) > 0.7);
    CHECK(lag1_autocorrelation(loc, checker) == doctest::Approx(-1.0).epsilon(0.1));
}
