#pragma once

#include <Eigen/Dense>

namespace gwgen {

// Column-major is Eigen's default; point clouds are stored one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace gwgen
