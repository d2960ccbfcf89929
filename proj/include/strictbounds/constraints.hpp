#pragma once

#include <string>
#include <variant>
#include <vector>

#include "strictbounds/types.hpp"

namespace strictbounds {

struct NonNegative {
    Index index;
};
struct Box {
    Index index;
    double lo;
    double hi;
};
struct FixEqual {
    Index index;
    double value;
};
struct General {
    Vector row;
    double rhs;
};
using ConstraintDescriptor = std::variant<NonNegative, Box, FixEqual, General>;

// Gap opened on each side of a pinned value so the solver keeps a strict interior.
inline constexpr double kEqualityRelaxation = 1e-9;

// Affine constraints A x <= b assembled from typed descriptors.
class ConstraintSet {
public:
    explicit ConstraintSet(Index p = 0) : p_(p), A_(0, p), b_(0) {}

    ConstraintSet& add(const ConstraintDescriptor& d);
    ConstraintSet& add_nonnegative(Index i) { return add(NonNegative{i}); }
    ConstraintSet& add_box(Index i, double lo, double hi) { return add(Box{i, lo, hi}); }
    ConstraintSet& add_fix(Index i, double v) { return add(FixEqual{i, v}); }
    ConstraintSet& add_general(Vector row, double rhs) { return add(General{std::move(row), rhs}); }
    ConstraintSet& append(const ConstraintSet& other);

    Index p() const { return p_; }
    Index q() const { return A_.rows(); }
    bool empty() const { return q() == 0; }
    const Matrix& A() const { return A_; }
    const Vector& b() const { return b_; }
    const std::vector<ConstraintDescriptor>& descriptors() const { return descriptors_; }

    // Right-hand side handed to the interior-point solver: pinned pairs are
    // opened by kEqualityRelaxation on each side.
    const Vector& solver_b() const { return solver_b_; }

    double max_violation(const Vector& x) const;

private:
    void push_row(const Vector& row, double rhs, double relax);

    Index p_;
    Matrix A_;
    Vector b_;
    Vector solver_b_;
    std::vector<ConstraintDescriptor> descriptors_;
};

std::string describe(const ConstraintDescriptor& d);

} // namespace strictbounds
