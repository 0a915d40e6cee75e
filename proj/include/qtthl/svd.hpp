#pragma once

#include <cmath>

#include "qtthl/types.hpp"

namespace qtthl {

template <Scalar T>
struct ThinSvd {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> U;
  Eigen::VectorXd s;
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> V;
};

// Divide-and-conquer SVD with a reconstruction check; Eigen 3.4.0's BDCSVD can return a wrong
// factorization after deflation, in which case the one-sided Jacobi SVD is used instead.
template <Scalar T>
ThinSvd<T> thin_svd(const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& m) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  ThinSvd<T> r;
  {
    Eigen::BDCSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    r.U = svd.matrixU();
    r.s = svd.singularValues();
    r.V = svd.matrixV();
  }
  const double scale = m.norm();
  const double residual = (r.U * r.s.asDiagonal() * r.V.adjoint() - m).norm();
  if (residual <= 1e-12 * scale + 1e-300 && std::isfinite(residual)) return r;
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  r.U = svd.matrixU();
  r.s = svd.singularValues();
  r.V = svd.matrixV();
  return r;
}

}  // namespace qtthl
