#pragma once

#include <Eigen/Dense>

namespace bdpm {

/// Feature maps are (channels x height*width) row-major matrices, so each
/// channel is one contiguous row and convolutions become a single GEMM.
template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MapMatrixR = Eigen::Map<MatrixR<Scalar>>;

template <typename Scalar>
using ConstMapMatrixR = Eigen::Map<const MatrixR<Scalar>>;

}  // namespace bdpm
