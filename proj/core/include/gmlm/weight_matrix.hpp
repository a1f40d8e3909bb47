#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace gmlm {

// Symmetric positive semidefinite R x R weighting matrix for the L-moment
// discrepancy vector.
class WeightMatrix {
 public:
  WeightMatrix() = default;

  static WeightMatrix identity(std::size_t order);

  // Validates symmetry (to 1e-12, relative to the largest entry) and repairs
  // eigenvalues in [-1e-10, 0) to zero. Larger negative eigenvalues are an
  // invalid-argument error.
  static WeightMatrix from_matrix(const Eigen::MatrixXd& m);

  // Moore-Penrose inverse of a covariance matrix via its eigendecomposition.
  // Eigenvalues below 1e-10 times the largest one are treated as zero and
  // excluded from the rank.
  static WeightMatrix pseudo_inverse_of(const Eigen::MatrixXd& covariance);

  const Eigen::MatrixXd& matrix() const noexcept { return m_; }
  std::size_t order() const noexcept {
    return static_cast<std::size_t>(m_.rows());
  }
  std::size_t rank() const noexcept { return rank_; }
  bool empty() const noexcept { return m_.size() == 0; }

 private:
  Eigen::MatrixXd m_;
  std::size_t rank_ = 0;
};

// Moore-Penrose inverse of a symmetric matrix, with the numerical rank.
Eigen::MatrixXd symmetric_pseudo_inverse(const Eigen::MatrixXd& a,
                                         std::size_t* rank = nullptr);

}  // namespace gmlm
