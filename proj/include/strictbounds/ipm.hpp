#pragma once

#include <vector>

#include "strictbounds/types.hpp"

namespace strictbounds::ipm {

// Affine rows A x <= b with the column of each single-entry row cached, so
// bound rows enter the Newton matrix as diagonal updates.
class Rows {
public:
    Rows() = default;
    Rows(Matrix A, Vector b);

    Index count() const { return A_.rows(); }
    const Matrix& A() const { return A_; }
    const Vector& b() const { return b_; }
    // M += sum_i w_i a_i a_i^T (lower triangle only for dense rows).
    void add_weighted_gram(const Vector& w, Matrix& M) const;

private:
    Matrix A_;
    Vector b_;
    std::vector<Index> single_;
};

struct Options {
    int max_iterations = 200;
    double tolerance = 1e-9;
    // Runs that stop early with all residuals below this are kept and flagged.
    double accept_tolerance = 1e-6;
};

enum class Status { Converged, Inaccurate, Failed };

// minimize   ||d - R x||^2      (quadratic = true)
//         or cost^T x           (quadratic = false)
// subject to A x <= b  and, if has_ball, ||d - R x|| <= sqrt(ball_rhs).
//
// Solved as a cone program  G x + s = h_c, s in R^q_+ x Q^{k+1}  with
// G = [A; 0; R], h_c = [b; sqrt(ball_rhs); d], by an infeasible-start
// primal-dual method with Nesterov-Todd scaling and Mehrotra correction.
struct Program {
    const Matrix* R = nullptr;
    const Vector* d = nullptr;
    const Matrix* gram = nullptr; // R^T R
    bool quadratic = false;
    Vector cost;
    bool has_ball = false;
    double ball_rhs = 0.0;
    const Rows* rows = nullptr;
};

struct Start {
    double ball_dual = 0.0; // guess for the leading entry of the cone multiplier
};

struct Result {
    Vector x;
    Vector lambda;    // affine-row multipliers
    Vector ball_dual; // (z0, z1), length k + 1; stationarity reads cost + A^T lambda + R^T z1 = 0
    double objective = 0.0;
    int iterations = 0;
    double dual_residual = 0.0;   // relative
    double primal_residual = 0.0; // relative
    double gap = 0.0;             // relative
    Status status = Status::Failed;
};

Result solve(const Program& program, const Vector& x0, const Start& start = {}, const Options& options = {});

} // namespace strictbounds::ipm
