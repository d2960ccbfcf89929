#pragma once

#include "strictbounds/types.hpp"

namespace strictbounds {

struct NnlsResult {
    Vector x;
    double residual_norm = 0.0;
    int iterations = 0;
};

// Lawson-Hanson active set: minimize ||E x - f|| subject to x >= 0.
NnlsResult nnls(const Matrix& E, const Vector& f, int max_iterations = 0);

} // namespace strictbounds
