#pragma once

#include <Eigen/Dense>

namespace lmspde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point of the spatial domain; its size is the dimension d.
using Point = Eigen::VectorXd;

}  // namespace lmspde
