// SPDX-License-Identifier: Apache-2.0
#include <stdexcept>

#include "chden/kernels.hpp"

namespace chden::kernels::reference {

void dense_forward(const Matrix& W, const Vector& b, const Matrix& X, Matrix& Z) {
  if (W.cols() != X.rows() || W.rows() != b.size()) throw std::invalid_argument("dense_forward: shape mismatch");
  Z.resize(W.rows(), X.cols());
  for (Eigen::Index n = 0; n < X.cols(); ++n) {
    for (Eigen::Index o = 0; o < W.rows(); ++o) {
      double acc = b[o];
      for (Eigen::Index i = 0; i < W.cols(); ++i) acc += static_cast<double>(W(o, i)) * X(i, n);
      Z(o, n) = static_cast<float>(acc);
    }
  }
}

void dense_backward_params(const Matrix& delta, const Matrix& X, Matrix& dW, Vector& db) {
  if (delta.cols() != X.cols()) throw std::invalid_argument("dense_backward_params: batch mismatch");
  dW.resize(delta.rows(), X.rows());
  db.resize(delta.rows());
  for (Eigen::Index o = 0; o < delta.rows(); ++o) {
    double bacc = 0.0;
    for (Eigen::Index n = 0; n < delta.cols(); ++n) bacc += delta(o, n);
    db[o] = static_cast<float>(bacc);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < delta.cols(); ++n) acc += static_cast<double>(delta(o, n)) * X(i, n);
      dW(o, i) = static_cast<float>(acc);
    }
  }
}

void dense_backward_input(const Matrix& W, const Matrix& delta, Matrix& dX) {
  if (W.rows() != delta.rows()) throw std::invalid_argument("dense_backward_input: shape mismatch");
  dX.resize(W.cols(), delta.cols());
  for (Eigen::Index n = 0; n < delta.cols(); ++n) {
    for (Eigen::Index i = 0; i < W.cols(); ++i) {
      double acc = 0.0;
      for (Eigen::Index o = 0; o < W.rows(); ++o) acc += static_cast<double>(W(o, i)) * delta(o, n);
      dX(i, n) = static_cast<float>(acc);
    }
  }
}

}  // namespace chden::kernels::reference
