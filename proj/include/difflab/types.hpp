#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace difflab {

// Filter-space vectors (weights, regressors, gradients) are short; a bounded
// inline capacity keeps the per-link hot path free of heap traffic.
inline constexpr int kMaxFilterLength = 32;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxFilterLength, 1>;

using Matrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

using NodeId = std::size_t;

}  // namespace difflab
