#include "strictbounds/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "strictbounds/error.hpp"

namespace strictbounds {

namespace {

void check_index(Index i, Index p) {
    if (i < 0 || i >= p)
        throw Error(ErrorKind::InvalidInput,
                    "constraint index " + std::to_string(i) + " outside [0, " + std::to_string(p) + ")");
}

Vector unit(Index p, Index i, double sign) {
    Vector e = Vector::Zero(p);
    e(i) = sign;
    return e;
}

double pin_relaxation(double) { return kEqualityRelaxation; }

} // namespace

void ConstraintSet::push_row(const Vector& row, double rhs, double relax) {
    const Index q0 = A_.rows();
    A_.conservativeResize(q0 + 1, p_);
    A_.row(q0) = row.transpose();
    b_.conservativeResize(q0 + 1);
    b_(q0) = rhs;
    solver_b_.conservativeResize(q0 + 1);
    solver_b_(q0) = rhs + relax;
}

ConstraintSet& ConstraintSet::add(const ConstraintDescriptor& d) {
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, NonNegative>) {
                check_index(c.index, p_);
                push_row(unit(p_, c.index, -1.0), 0.0, 0.0);
            } else if constexpr (std::is_same_v<T, Box>) {
                check_index(c.index, p_);
                if (!std::isfinite(c.lo) && !std::isfinite(c.hi)) return;
                if (c.lo > c.hi)
                    throw Error(ErrorKind::InvalidInput, "box on element " + std::to_string(c.index) +
                                                             " has lo > hi");
                const double relax = c.lo == c.hi ? pin_relaxation(c.hi) : 0.0;
                if (std::isfinite(c.hi)) push_row(unit(p_, c.index, 1.0), c.hi, relax);
                if (std::isfinite(c.lo)) push_row(unit(p_, c.index, -1.0), -c.lo, relax);
            } else if constexpr (std::is_same_v<T, FixEqual>) {
                check_index(c.index, p_);
                if (!std::isfinite(c.value))
                    throw Error(ErrorKind::InvalidInput, "fixed value for element " + std::to_string(c.index) +
                                                             " is not finite");
                const double relax = pin_relaxation(c.value);
                push_row(unit(p_, c.index, 1.0), c.value, relax);
                push_row(unit(p_, c.index, -1.0), -c.value, relax);
            } else {
                if (c.row.size() != p_)
                    throw Error(ErrorKind::InvalidInput, "general constraint row has length " +
                                                             std::to_string(c.row.size()) + ", expected " +
                                                             std::to_string(p_));
                if (!c.row.allFinite() || !std::isfinite(c.rhs))
                    throw Error(ErrorKind::InvalidInput, "general constraint has non-finite entries");
                push_row(c.row, c.rhs, 0.0);
            }
        },
        d);
    descriptors_.push_back(d);
    return *this;
}

ConstraintSet& ConstraintSet::append(const ConstraintSet& other) {
    if (other.p_ != p_) throw Error(ErrorKind::InvalidInput, "constraint sets have different state dimensions");
    for (const auto& d : other.descriptors_) add(d);
    return *this;
}

double ConstraintSet::max_violation(const Vector& x) const {
    if (q() == 0) return 0.0;
    return std::max(0.0, (A_ * x - b_).maxCoeff());
}

std::string describe(const ConstraintDescriptor& d) {
    std::ostringstream os;
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, NonNegative>) os << "x[" << c.index << "] >= 0";
            else if constexpr (std::is_same_v<T, Box>) os << c.lo << " <= x[" << c.index << "] <= " << c.hi;
            else if constexpr (std::is_same_v<T, FixEqual>) os << "x[" << c.index << "] == " << c.value;
            else os << "general row <= " << c.rhs;
        },
        d);
    return os.str();
}

} // namespace strictbounds
