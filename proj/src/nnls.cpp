#include "strictbounds/nnls.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace strictbounds {

namespace {

Vector solve_passive(const Matrix& E, const Vector& f, const std::vector<bool>& passive) {
    std::vector<Index> cols;
    for (Index j = 0; j < static_cast<Index>(passive.size()); ++j)
        if (passive[j]) cols.push_back(j);
    Matrix Ep(E.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) Ep.col(static_cast<Index>(k)) = E.col(cols[k]);
    const Vector sp = Ep.colPivHouseholderQr().solve(f);
    Vector s = Vector::Zero(E.cols());
    for (std::size_t k = 0; k < cols.size(); ++k) s(cols[k]) = sp(static_cast<Index>(k));
    return s;
}

} // namespace

NnlsResult nnls(const Matrix& E, const Vector& f, int max_iterations) {
    const Index n = E.cols();
    if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 10);
    NnlsResult out;
    out.x = Vector::Zero(n);
    if (n == 0) {
        out.residual_norm = f.norm();
        return out;
    }
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * E.norm() * std::max(1.0, f.norm()) *
                       static_cast<double>(std::max(E.rows(), n));
    Vector& x = out.x;
    Vector w = E.transpose() * (f - E * x);

    while (out.iterations < max_iterations) {
        Index t = -1;
        double best = tol;
        for (Index j = 0; j < n; ++j)
            if (!passive[j] && w(j) > best) {
                best = w(j);
                t = j;
            }
        if (t < 0) break;
        passive[t] = true;
        ++out.iterations;

        Vector s = solve_passive(E, f, passive);
        for (int inner = 0; inner < 3 * n; ++inner) {
            double alpha = 1.0;
            bool blocked = false;
            for (Index j = 0; j < n; ++j)
                if (passive[j] && s(j) <= 0.0) {
                    blocked = true;
                    const double denom = x(j) - s(j);
                    if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
                }
            if (!blocked) break;
            x += alpha * (s - x);
            for (Index j = 0; j < n; ++j)
                if (passive[j] && x(j) <= tol) {
                    passive[j] = false;
                    x(j) = 0.0;
                }
            s = solve_passive(E, f, passive);
        }
        x = s;
        for (Index j = 0; j < n; ++j)
            if (!passive[j]) x(j) = 0.0;
        w = E.transpose() * (f - E * x);
    }
    out.residual_norm = (E * x - f).norm();
    return out;
}

} // namespace strictbounds
