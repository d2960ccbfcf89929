#pragma once

#include <Eigen/Dense>

namespace strictbounds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

} // namespace strictbounds
