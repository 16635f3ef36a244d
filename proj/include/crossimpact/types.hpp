#pragma once

#include <type_traits>

#include <Eigen/Dense>

namespace crossimpact {

using Index = Eigen::Index;

/// Blocks template deduction on a parameter, so Scalar is pinned by the
/// model argument and vector arguments may be any convertible expression.
template <typename T>
using NonDeduced = std::type_identity_t<T>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorRef = Eigen::Ref<const VectorX<Scalar>>;

template <typename Scalar>
using MatrixRef = Eigen::Ref<const MatrixX<Scalar>>;

}  // namespace crossimpact
