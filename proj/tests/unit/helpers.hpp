#pragma once

#include <random>

#include "pinem/tensor_core.hpp"

namespace testing_helpers {

using pinem::cplx;
using pinem::Matrix;
using pinem::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

inline pinem::DensityMatrix random_density(const pinem::HilbertLayout& layout, std::mt19937& rng) {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  const Matrix x = random_matrix(d, d, rng);
  Matrix rho = x * x.adjoint();
  rho /= rho.trace().real();
  return pinem::DensityMatrix(layout, rho);
}

inline pinem::PureState random_pure(const pinem::HilbertLayout& layout, std::mt19937& rng) {
  const auto d = static_cast<Eigen::Index>(layout.total_dim());
  return pinem::PureState::normalized(layout, random_matrix(d, 1, rng).col(0));
}

inline pinem::Matrix random_hermitian(Eigen::Index d, std::mt19937& rng) {
  const Matrix x = random_matrix(d, d, rng);
  return 0.5 * (x + x.adjoint());
}

}  // namespace testing_helpers
