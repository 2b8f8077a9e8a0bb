// SPDX-License-Identifier: Apache-2.0
//
// Dense-layer kernels on column-per-sample batches.
//
// chden::kernels holds the OpenMP versions used by training and evaluation.
// Work is cut into fixed-size blocks (kBlock columns or rows) whose boundaries
// do not depend on the thread count, and no reduction ever crosses a block
// boundary, so results are bit-identical for any OMP_NUM_THREADS.
//
// chden::kernels::reference holds plain serial loops with double
// accumulation. Tests compare the two; the benchmark times them.
#pragma once

#include <Eigen/Dense>

namespace chden::kernels {

inline constexpr Eigen::Index kBlock = 64;

using Matrix = Eigen::MatrixXf;
using Vector = Eigen::VectorXf;

/// Z = W X + b (b broadcast over columns). W: out x in, X: in x n.
void dense_forward(const Matrix& W, const Vector& b, const Matrix& X, Matrix& Z);
/// dW = delta X^T, db = row sums of delta. delta: out x n.
void dense_backward_params(const Matrix& delta, const Matrix& X, Matrix& dW, Vector& db);
/// dX = W^T delta.
void dense_backward_input(const Matrix& W, const Matrix& delta, Matrix& dX);

/// A = tanh(Z) / relu(Z), elementwise.
void tanh_forward(const Matrix& Z, Matrix& A);
void relu_forward(const Matrix& Z, Matrix& A);
/// delta *= activation'(Z), elementwise, given the forward output A.
void tanh_backward(const Matrix& A, Matrix& delta);
void relu_backward(const Matrix& Z, Matrix& delta);

namespace reference {

void dense_forward(const Matrix& W, const Vector& b, const Matrix& X, Matrix& Z);
void dense_backward_params(const Matrix& delta, const Matrix& X, Matrix& dW, Vector& db);
void dense_backward_input(const Matrix& W, const Matrix& delta, Matrix& dX);

}  // namespace reference

}  // namespace chden::kernels
