#pragma once

#include <optional>
#include <string>

#include "strictbounds/constraints.hpp"
#include "strictbounds/ipm.hpp"
#include "strictbounds/model.hpp"

namespace strictbounds {

enum class RadiusMode { OneAtATime, Simultaneous };
enum class Endpoint { Lower, Upper };

const char* to_string(RadiusMode mode);
RadiusMode parse_radius_mode(const std::string& text);

struct SolverOptions {
    ipm::Options ipm;
    double rank_tol = kDefaultRankTol;
    // Certificate acceptance, relative to 1 + ||h|| and 1 + |primal|.
    double certificate_tol = 1e-6;
    bool certify = true;
};

struct DualCertificate {
    Vector w; // length n
    Vector c; // length q, one entry per expanded row
    double objective = 0.0;
    double gap = 0.0;
    double stationarity = 0.0;
    bool certified = false;
};

struct SolverStats {
    bool reduced = false;
    int slack_iterations = 0;
    int lower_iterations = 0;
    int upper_iterations = 0;
    double slack_residual = 0.0;
    double lower_residual = 0.0;
    double upper_residual = 0.0;
    double reduced_slack_sq = 0.0;
    double tail_sq = 0.0;
    bool slack_attained = true;
    bool inaccurate = false;
};

struct IntervalResult {
    std::string method;
    double lower = 0.0;
    double upper = 0.0;
    double slack_sq = 0.0;
    double radius_sq = 0.0;
    Vector x_at_lower;
    Vector x_at_upper;
    DualCertificate dual_lower;
    DualCertificate dual_upper;
    SolverStats stats;

    double length() const { return upper - lower; }
    bool certified() const { return dual_lower.certified && dual_upper.certified; }
};

struct SlackResult {
    double s_sq = 0.0;
    Vector x_feas;
    double reduced_s_sq = 0.0;
    double tail_sq = 0.0;
    int iterations = 0;
    double kkt_residual = 0.0;
    bool attained = true;
};

// p-variate form: ||y_w - K_w x||^2 = ||y_top - R x||^2 + tail_sq with R = D V^T.
struct ReducedProblem {
    Matrix R;
    Vector y_top;
    double tail_sq = 0.0;
};

struct CertificateCheck {
    double stationarity = 0.0;
    double min_c = 0.0;
    double objective = 0.0;
};

// Everything that depends on (K_w, h, constraints) but not on y: the SVD or Gram
// matrix, feasibility of the affine rows and boundedness of h^T x along null(K_w).
class IntervalSolver {
public:
    IntervalSolver(const WhitenedProblem& problem, const ConstraintSet& constraints, bool reduce = true,
                   SolverOptions options = {});

    SlackResult slack(const Vector& y_w) const;
    IntervalResult interval(const Vector& y_w, double alpha, RadiusMode mode) const;
    // Endpoints of {||y_w - K_w x||^2 <= radius_sq, Ax <= b}; slack must come from this solver.
    IntervalResult interval_at_radius(const Vector& y_w, double radius_sq, const SlackResult& slack) const;
    ReducedProblem reduce(const Vector& y_w) const;

    bool reduced() const { return reduce_; }
    bool bounded_below() const { return bounded_below_; }
    bool bounded_above() const { return bounded_above_; }
    const WhitenedProblem& problem() const { return problem_; }
    const ConstraintSet& constraints() const { return constraints_; }
    const SolverOptions& options() const { return options_; }

private:
    struct Endpoint_ {
        double value = 0.0;
        Vector x;
        DualCertificate cert;
        int iterations = 0;
        double residual = 0.0;
        bool inaccurate = false;
    };
    Endpoint_ solve_endpoint(const Vector& y_w, const Vector& d, double ball_rhs, double radius_sq,
                             const Vector& x0, Endpoint which) const;
    Vector least_squares(const Vector& y_top) const;
    Vector to_xi(const Vector& x) const;
    Vector to_x(const Vector& xi) const;

    WhitenedProblem problem_;
    ConstraintSet constraints_;
    bool reduce_;
    SolverOptions options_;
    Matrix U_; // leading left singular vectors
    Vector sv_;
    Matrix V_;
    Matrix Vfull_;
    Index rank_ = 0;
    Matrix R_; // D V^T when reducing
    // Solver coordinates: x = T_ xi with T_ = V diag(1 / col_scale_).
    Matrix T_;
    Vector col_scale_;
    Matrix Rt_;   // operator in xi: D diag(1 / col_scale_) or K_w T_
    Matrix gram_; // Rt_^T Rt_
    Vector ht_;   // T_^T h
    ipm::Rows rows_; // A T_ x <= b
    double h_gram_norm_ = 0.0; // ||h|| in the G^+ metric, for the starting multiplier
    bool bounded_below_ = true;
    bool bounded_above_ = true;
};

SlackResult solve_slack(const WhitenedProblem& problem_w, const Vector& y_w, const ConstraintSet& constraints);
IntervalResult solve_interval(const WhitenedProblem& problem_w, const Vector& y_w,
                              const ConstraintSet& constraints, double alpha = 0.05,
                              RadiusMode mode = RadiusMode::OneAtATime, const SolverOptions& options = {});
ReducedProblem svd_reduce(const WhitenedProblem& problem_w, const Vector& y_w);
IntervalResult solve_interval_reduced(const WhitenedProblem& problem_w, const Vector& y_w,
                                      const ConstraintSet& constraints, double alpha = 0.05,
                                      RadiusMode mode = RadiusMode::OneAtATime,
                                      const SolverOptions& options = {});
DualCertificate dual_solve(const WhitenedProblem& problem_w, const Vector& y_w, const ConstraintSet& constraints,
                           double radius_sq, Endpoint endpoint);
IntervalResult closed_form_fullrank(const WhitenedProblem& problem_w, const Vector& y_w, double alpha = 0.05,
                                    double rank_tol = kDefaultRankTol);

// Re-evaluates a certificate from (w, c) alone against the unrelaxed constraint rows.
CertificateCheck verify_certificate(const WhitenedProblem& problem_w, const Vector& y_w,
                                    const ConstraintSet& constraints, double radius_sq, Endpoint endpoint,
                                    const DualCertificate& cert);

double radius_sq_for(RadiusMode mode, double alpha, Index n, double slack_sq);

} // namespace strictbounds
