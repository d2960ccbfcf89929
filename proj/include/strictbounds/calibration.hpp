#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strictbounds/interval.hpp"

namespace strictbounds {

// External estimate of one state element: expands to
// [center - z_{1 - level_alpha/2} sigma, center + z_{1 - level_alpha/2} sigma].
struct ProbabilisticConstraint {
    Index index = 0;
    double center = 0.0;
    double standard_error = 1.0;
    double level_alpha = 0.05;

    void validate(Index p) const;
    double half_width() const;
};

// gamma + sum(alphas) = total_alpha; gamma is the internal miscoverage of the
// interval that sees the realized boxes.
struct CalibrationPlan {
    double gamma = 0.05;
    std::vector<double> alphas;
    double total_alpha = 0.05;
};

// Throws BudgetMismatch unless gamma + sum(alphas) equals total_alpha to 1e-12.
CalibrationPlan make_plan(double total_alpha, const std::vector<double>& alphas, double gamma);
// gamma = total_alpha - sum(alphas).
CalibrationPlan plan_for_alphas(double total_alpha, const std::vector<double>& alphas);

struct SweepOptions {
    double alpha = 0.05;
    Index n_noise = 100;
    RadiusMode mode = RadiusMode::OneAtATime;
    bool reduce = true;
    unsigned workers = 1;
};

struct LengthStats {
    double mean_length = 0.0;
    double length_sd = 0.0;
    double coverage = 0.0; // share of intervals containing h^T x_true
    Index n = 0;           // successful draws
    Index failures = 0;
};

// Intervals for y_w = K_w x_true + eps_j, j < n_noise, with eps_j from stream
// (noise, j). Every sweep row reuses the same draws.
LengthStats interval_lengths(const WhitenedProblem& problem_w, const ConstraintSet& constraints,
                             const Vector& x_true, const SweepOptions& options, std::uint64_t seed);

struct ImportanceRow {
    Index index = -1; // -1 for the baseline
    std::string label;
    LengthStats stats;
};

// Baseline first, then one row per index with x_i pinned at x_true[i].
std::vector<ImportanceRow> variable_importance(const LinearProblem& problem, const ConstraintSet& constraints,
                                               const Vector& x_true, const std::vector<Index>& indices,
                                               const SweepOptions& options, std::uint64_t seed);

struct BoxSweepRow {
    double delta = 0.0; // infinity for the baseline
    LengthStats stats;
};

// One row per delta with x_index in [center - delta, center + delta]; a
// non-finite delta adds no row.
std::vector<BoxSweepRow> box_sweep(const LinearProblem& problem, const ConstraintSet& constraints,
                                   const Vector& x_true, Index index, double center,
                                   const std::vector<double>& deltas, const SweepOptions& options,
                                   std::uint64_t seed);

// 40 points log-spaced in [total_alpha / 100, 0.99 total_alpha] by default.
std::vector<double> default_gamma_grid(double total_alpha, Index points = 40);

struct GammaRow {
    double gamma = 0.0;
    double alpha_i = 0.0;
    LengthStats stats;
};

struct OptimizeResult {
    CalibrationPlan plan;
    std::vector<GammaRow> rows;
};

// Length-optimal split of total_alpha between the interval and one
// probabilistic constraint, judged on noise drawn around the ansatz state with
// the box centred at ansatz[index]. Observed data never enter. Ties go to the
// larger gamma.
OptimizeResult optimize_plan(const LinearProblem& problem, const ConstraintSet& base_constraints,
                             const Vector& ansatz, const ProbabilisticConstraint& constraint_template,
                             double total_alpha, const std::vector<double>& gammas, const SweepOptions& options,
                             std::uint64_t seed);

struct CalibratedInterval {
    IntervalResult interval;
    bool clipped = false;
    double final_level = 0.95; // 1 - total_alpha
};

// Appends the realized boxes (levels from the plan, clipped to the simple
// bounds already in base_constraints) and solves at internal level 1 - gamma.
CalibratedInterval calibrated_interval(const WhitenedProblem& problem_w, const ConstraintSet& base_constraints,
                                       const CalibrationPlan& plan,
                                       const std::vector<ProbabilisticConstraint>& realized, const Vector& y_w,
                                       const SweepOptions& options = {});

// Box for one realized constraint after clipping; returns true when clipped.
bool clip_to_bounds(const ConstraintSet& base, Index index, double& lo, double& hi);

struct CalibrationRow {
    double standard_error = 0.0;
    double internal_level = 0.95;   // 1 - gamma
    double constraint_level = 1.0;  // 1 - alpha_i
    double empirical_coverage = 0.0;
    double mean_length = 0.0;
    double length_sd = 0.0;
    Index n = 0;
    Index failures = 0;
    Index clipped = 0;
};

// Final coverage over joint draws of noise (stream noise) and external centres
// x_hat_i ~ N(x_true_i, sigma_i^2) (stream external). With no templates the row
// is the unconstrained baseline at level 1 - gamma.
CalibrationRow evaluate_calibration(const LinearProblem& problem, const ConstraintSet& base_constraints,
                                    const CalibrationPlan& plan,
                                    const std::vector<ProbabilisticConstraint>& templates, const Vector& x_true,
                                    Index replicates, const SweepOptions& options, std::uint64_t seed);

} // namespace strictbounds
