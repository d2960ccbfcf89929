#include <cmath>

#include "doctest.h"
#include "generators.hpp"
#include "strictbounds/error.hpp"
#include "strictbounds/simulation.hpp"

using namespace strictbounds;

TEST_CASE("flat spectrum without null directions has condition number one") {
    SyntheticSpec s;
    s.n = 30;
    s.p = 6;
    s.decay = 1.0;
    s.rank_deficiency = 0;
    s.functional_end = 4;
    const SyntheticInstance inst = gen_problem(s, 5);
    const WhitenedProblem W = whiten(inst.problem);
    const SpectralSummary sum = spectral_summary(W);
    CHECK(sum.numeric_rank == 6);
    CHECK(sum.condition_number == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("paper-like problem at full observation count has rank p - 1") {
    SyntheticSpec s = SyntheticSpec::paper_like();
    s.n = 3048;
    const SyntheticInstance inst = gen_problem(s, 17);
    const SpectralSummary sum = spectral_summary(whiten(inst.problem));
    CHECK(sum.numeric_rank == 38);
    CHECK(sum.condition_number == doctest::Approx(1e7).epsilon(1e-6));
    CHECK(std::fabs(inst.problem.h.sum() - 1.0) <= 1e-12);
    CHECK((inst.problem.h.head(20).array() > 0.0).all());
    CHECK(inst.problem.labels.size() == 39);
    CHECK(inst.constraints.q() == 21);
}

TEST_CASE("the functional sees no null direction and hits the target standard error") {
    SyntheticSpec s = SyntheticSpec::paper_like();
    const SyntheticInstance inst = gen_problem(s, 3);
    const WhitenedProblem W = whiten(inst.problem);
    const SpectralSummary sum = spectral_summary(W);
    const Matrix Vn = sum.V.rightCols(39 - sum.numeric_rank);
    CHECK((Vn.transpose() * W.h).norm() <= 1e-10);
    const Vector c = sum.V.leftCols(sum.numeric_rank).transpose() * W.h;
    const double se = c.cwiseQuotient(sum.singular_values.head(sum.numeric_rank)).norm();
    CHECK(se == doctest::Approx(s.target_standard_error).epsilon(1e-6));
}

TEST_CASE("noise model matches the problem covariance") {
    SyntheticSpec s = SyntheticSpec::paper_like();
    const SyntheticInstance inst = gen_problem(s, 9);
    inst.noise.validate();
    const Vector v = inst.noise.variances();
    CHECK((v - inst.problem.noise_cov.variances()).cwiseAbs().maxCoeff() <= 1e-12 * v.maxCoeff());
    CHECK(v.minCoeff() > 0.0);
    // Three contiguous bands of near-equal size.
    CHECK(inst.noise.band_of.front() == 0);
    CHECK(inst.noise.band_of.back() == 2);
    for (std::size_t j = 1; j < inst.noise.band_of.size(); ++j)
        CHECK(inst.noise.band_of[j] >= inst.noise.band_of[j - 1]);
}

TEST_CASE("sampled noise has the modelled variances") {
    SyntheticSpec s;
    s.n = 12;
    s.p = 3;
    s.functional_end = 2;
    const SyntheticInstance inst = gen_problem(s, 4);
    const Vector v = inst.noise.variances();
    Rng rng(4, {stream::noise, 0});
    Vector acc = Vector::Zero(12);
    const int draws = 20000;
    for (int j = 0; j < draws; ++j) acc += sample_noise(inst.noise, rng).cwiseAbs2();
    for (Index i = 0; i < 12; ++i)
        CHECK(std::fabs(acc(i) / draws / v(i) - 1.0) <= 5.0 * std::sqrt(2.0 / draws));
}

TEST_CASE("state sampling: point mass and reproducibility") {
    GenerativeModel g{Vector::LinSpaced(4, 1.0, 4.0), Matrix::Zero(4, 4)};
    CHECK(sample_state(g, 123) == g.mu_x);
    Rng rng(5, {stream::instance, 400});
    g.sigma_x = gen::spd(rng, 4);
    CHECK(sample_state(g, 77) == sample_state(g, 77));
    CHECK(sample_state(g, 77) != sample_state(g, 78));
}

TEST_CASE("sample covariance of states matches Sigma_x") {
    Rng rng(5, {stream::instance, 401});
    const GenerativeModel g{rng.normal_vector(3), gen::spd(rng, 3)};
    Rng draw(5, {stream::state, 0});
    const int draws = 40000;
    Matrix acc = Matrix::Zero(3, 3);
    for (int j = 0; j < draws; ++j) {
        const Vector d = sample_state(g, draw) - g.mu_x;
        acc += d * d.transpose();
    }
    acc /= draws;
    for (Index i = 0; i < 3; ++i)
        for (Index k = 0; k < 3; ++k) {
            const double sd = std::sqrt((g.sigma_x(i, i) * g.sigma_x(k, k) + g.sigma_x(i, k) * g.sigma_x(i, k)) / draws);
            CHECK(std::fabs(acc(i, k) - g.sigma_x(i, k)) <= 5.0 * sd);
        }
}

TEST_CASE("Matern closed forms") {
    CHECK(matern(0.5, 2.0, 4.0) == doctest::Approx(std::exp(-0.5)));
    CHECK(matern(1.5, 1.0, 1.0) == doctest::Approx((1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0))));
    CHECK(matern(2.5, 1.0, 1.0) == doctest::Approx((1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0))));
    for (double nu : {0.5, 1.5, 2.5}) {
        CHECK(matern(nu, 0.0, 3.0) == 1.0);
        double prev = 1.0;
        for (double d = 0.1; d < 20.0; d += 0.1) {
            const double m = matern(nu, d, 3.0);
            CHECK(m < prev);
            CHECK(m > 0.0);
            prev = m;
        }
    }
    CHECK_THROWS_AS(matern(1.0, 1.0, 1.0), Error);
    CHECK_THROWS_AS(matern(0.5, 1.0, 0.0), Error);
}

TEST_CASE("spatial covariance reduces to Sigma_x at zero distance and is PSD") {
    Rng rng(5, {stream::instance, 402});
    const GenerativeModel g{rng.normal_vector(3), gen::spd(rng, 3)};
    SpatialModel sp = uniform_spatial_model(g, grid_locations(3, 2, 1.0, 2.0), 1.5, 4.0);
    sp.nu(0, 1) = sp.nu(1, 0) = 0.5;
    const Matrix C = assemble_spatial_covariance(sp);
    for (Index i = 0; i < sp.sites(); ++i) CHECK((C.block(i * 3, i * 3, 3, 3) - g.sigma_x).norm() <= 1e-14 * g.sigma_x.norm());
    CHECK((C - C.transpose()).norm() == 0.0);
    const SpatialFactor f = factor_spatial(sp);
    CHECK(f.jitter >= 0.0);
    CHECK((f.L * f.L.transpose() - C).norm() <= 1e-8 * C.norm() + f.jitter * std::sqrt(C.rows()));
}

TEST_CASE("invalid spatial parameters are rejected") {
    const GenerativeModel g{Vector::Zero(2), Matrix::Identity(2, 2)};
    SpatialModel sp = uniform_spatial_model(g, grid_locations(2, 2, 1.0, 1.0), 1.5, 1.0);
    sp.rho(0, 1) = 2.0;
    CHECK_THROWS_AS(sp.validate(), Error);
    sp = uniform_spatial_model(g, grid_locations(2, 2, 1.0, 1.0), 1.0, 1.0);
    CHECK_THROWS_AS(sp.validate(), Error);
}

TEST_CASE("spec validation rejects inconsistent knobs") {
    SyntheticSpec s;
    s.rank_deficiency = s.p;
    CHECK_THROWS_AS(gen_problem(s, 1), Error);
    s = SyntheticSpec::paper_like();
    s.p = 40;
    CHECK_THROWS_AS(gen_problem(s, 1), Error);
    s = SyntheticSpec();
    s.band_constants = {};
    CHECK_THROWS_AS(gen_problem(s, 1), Error);
}

TEST_CASE("generation is deterministic in the seed") {
    const SyntheticSpec s = SyntheticSpec::paper_like();
    const SyntheticInstance a = gen_problem(s, 11), b = gen_problem(s, 11), c = gen_problem(s, 12);
    CHECK(a.problem.K == b.problem.K);
    CHECK(a.prior.mu_a == b.prior.mu_a);
    CHECK(a.problem.K != c.problem.K);
}
