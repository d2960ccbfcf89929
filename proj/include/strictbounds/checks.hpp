#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strictbounds/interval.hpp"
#include "strictbounds/rng.hpp"

namespace strictbounds {

// Random test instances with a known feasible state.
struct InstanceShape {
    Index p_min = 1, p_max = 8;
    Index n_extra_max = 16; // n - p drawn from [1, n_extra_max]
    bool constrained = true;
    bool allow_rank_deficient = false;
    bool box_every_coordinate = false; // bounded feasible set, needed by the grid oracle
    double noise_scale = 1.0;
};

struct RandomInstance {
    WhitenedProblem problem;
    ConstraintSet constraints;
    Vector x_true;
    Vector y_w;
    Vector lo, hi; // per-coordinate simple bounds (infinite when absent)
};

RandomInstance random_instance(Rng& rng, const InstanceShape& shape);

// Endpoints by exhaustive search: the first p - 1 coordinates walk a grid of
// `steps` cells per side of the box and the last coordinate is optimized in
// closed form on each grid line. Slack is found the same way.
struct OracleInterval {
    double lower = 0.0;
    double upper = 0.0;
    double slack_sq = 0.0;
    double grid_step = 0.0; // sum_i |h_i| * cell width_i over gridded coordinates
};
OracleInterval grid_oracle_interval(const WhitenedProblem& problem_w, const Vector& y_w, const Vector& lo,
                                    const Vector& hi, double alpha, Index steps = 1000);

struct CheckResult {
    std::string name;
    bool passed = true;
    Index instances = 0;
    Index failures = 0;
    double worst = 0.0;     // worst normalized discrepancy seen
    double tolerance = 0.0; // the bound it was compared with
    std::string detail;
};

// Unconstrained full-rank instances: solver vs closed-form LS interval, 1e-6 (1 + |endpoint|).
CheckResult check_closed_form(Index count, std::uint64_t seed, double tol = 1e-6);
// Reduced vs full path: endpoints to tol (1 + |endpoint|), s^2 = reduced + tail to slack_tol (1 + s^2).
CheckResult check_reduction(Index count, std::uint64_t seed, double tol = 1e-6, double slack_tol = 1e-8);
// Certified share of endpoints must reach min_share; every certified endpoint is
// re-verified from (w, c) alone.
CheckResult check_certificates(Index count, std::uint64_t seed, double tol = 1e-6, double min_share = 0.99);
// Solver vs grid oracle for p <= 3 with box and non-negativity constraints.
CheckResult check_grid_oracle(Index count, std::uint64_t seed, Index steps = 1000);

// The validate battery. With a problem (and optional constraints) the checks
// also run against it; without one only random instances are used. Stops after
// the first failed check.
std::vector<CheckResult> self_check(const LinearProblem* problem, const ConstraintSet* constraints,
                                    std::uint64_t seed, Index count);

} // namespace strictbounds
