// SPDX-License-Identifier: Apache-2.0
#include "chden/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chden::kernels {

namespace {

Eigen::Index num_blocks(Eigen::Index n) { return (n + kBlock - 1) / kBlock; }

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

namespace {

// Z(:, j) = b + sum_k W(:, k) X(k, j), accumulated with one fused multiply-add
// per k in increasing k for every output element. The order never depends on
// the tiling, so a column of W that is entirely zero changes nothing.
using Lane = float __attribute__((vector_size(64), aligned(4)));
constexpr int kLane = 16;
constexpr Eigen::Index kRows = 2 * kLane;

inline Lane load_lane(const float* p) { return *reinterpret_cast<const Lane*>(p); }
inline void store_lane(float* p, Lane v) { *reinterpret_cast<Lane*>(p) = v; }

// 32 rows x 6 columns held in twelve named registers; GCC spills arrays of
// vectors back to the stack on every iteration.
void forward_tile_6(const Matrix& W, const Vector& b, const Matrix& X, Matrix& Z, Eigen::Index j0, Eigen::Index i0) {
  const Eigen::Index K = W.cols();
  const Eigen::Index ldw = W.outerStride();
  const Eigen::Index ldx = X.outerStride();
  const float* w = W.data() + i0;
  const float* x = X.data() + j0 * ldx;
  const Lane b0 = load_lane(b.data() + i0), b1 = load_lane(b.data() + i0 + kLane);
  Lane a00 = b0, a01 = b1, a10 = b0, a11 = b1, a20 = b0, a21 = b1;
  Lane a30 = b0, a31 = b1, a40 = b0, a41 = b1, a50 = b0, a51 = b1;
  for (Eigen::Index k = 0; k < K; ++k, w += ldw, ++x) {
    const Lane w0 = load_lane(w), w1 = load_lane(w + kLane);
    float xc = x[0];
    a00 = w0 * xc + a00, a01 = w1 * xc + a01;
    xc = x[ldx];
    a10 = w0 * xc + a10, a11 = w1 * xc + a11;
    xc = x[2 * ldx];
    a20 = w0 * xc + a20, a21 = w1 * xc + a21;
    xc = x[3 * ldx];
    a30 = w0 * xc + a30, a31 = w1 * xc + a31;
    xc = x[4 * ldx];
    a40 = w0 * xc + a40, a41 = w1 * xc + a41;
    xc = x[5 * ldx];
    a50 = w0 * xc + a50, a51 = w1 * xc + a51;
  }
  const auto put = [&](int c, Lane lo, Lane hi) {
    float* z = &Z(i0, j0 + c);
    store_lane(z, lo);
    store_lane(z + kLane, hi);
  };
  put(0, a00, a01);
  put(1, a10, a11);
  put(2, a20, a21);
  put(3, a30, a31);
  put(4, a40, a41);
  put(5, a50, a51);
}

void forward_tile_1(const Matrix& W, const Vector& b, const Matrix& X, Matrix& Z, Eigen::Index j, Eigen::Index i0) {
  const Eigen::Index K = W.cols();
  const Eigen::Index ldw = W.outerStride();
  const float* w = W.data() + i0;
  const float* x = X.data() + j * X.outerStride();
  Lane a0 = load_lane(b.data() + i0), a1 = load_lane(b.data() + i0 + kLane);
  for (Eigen::Index k = 0; k < K; ++k, w += ldw) {
    const float xc = x[k];
    a0 = load_lane(w) * xc + a0;
    a1 = load_lane(w + kLane) * xc + a1;
  }
  store_lane(&Z(i0, j), a0);
  store_lane(&Z(i0, j) + kLane, a1);
}

void forward_partial_tile(const Matrix& W, const Vector& b, const Matrix& X, Matrix& Z, Eigen::Index j0,
                          Eigen::Index j1, Eigen::Index i0, Eigen::Index i1) {
  const Eigen::Index K = W.cols();
  for (Eigen::Index j = j0; j < j1; ++j)
    for (Eigen::Index i = i0; i < i1; ++i) {
      float acc = b[i];
      for (Eigen::Index k = 0; k < K; ++k) acc = W(i, k) * X(k, j) + acc;
      Z(i, j) = acc;
    }
}

}  // namespace

void dense_forward(const Matrix& W, const Vector& b, const Matrix& X, Matrix& Z) {
  check(W.cols() == X.rows() && W.rows() == b.size(), "dense_forward: shape mismatch");
  const Eigen::Index n = X.cols();
  const Eigen::Index out = W.rows();
  Z.resize(out, n);
  const Eigen::Index nb = num_blocks(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < nb; ++blk) {
    const Eigen::Index c0 = blk * kBlock;
    const Eigen::Index c1 = std::min(n, c0 + kBlock);
    Eigen::Index i0 = 0;
    for (; i0 + kRows <= out; i0 += kRows) {
      Eigen::Index j = c0;
      for (; j + 6 <= c1; j += 6) forward_tile_6(W, b, X, Z, j, i0);
      for (; j < c1; ++j) forward_tile_1(W, b, X, Z, j, i0);
    }
    if (i0 < out) forward_partial_tile(W, b, X, Z, c0, c1, i0, out);
  }
}

void dense_backward_params(const Matrix& delta, const Matrix& X, Matrix& dW, Vector& db) {
  check(delta.cols() == X.cols(), "dense_backward_params: batch mismatch");
  const Eigen::Index out = delta.rows();
  dW.resize(out, X.rows());
  db.resize(out);
  const Eigen::Index nb = num_blocks(out);
  // Blocks over output units: each row of dW reduces over the whole batch
  // inside one block, in column order.
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < nb; ++blk) {
    const Eigen::Index r0 = blk * kBlock;
    const Eigen::Index nr = std::min(kBlock, out - r0);
    dW.middleRows(r0, nr).noalias() = delta.middleRows(r0, nr) * X.transpose();
    db.segment(r0, nr) = delta.middleRows(r0, nr).rowwise().sum();
  }
}

void dense_backward_input(const Matrix& W, const Matrix& delta, Matrix& dX) {
  check(W.rows() == delta.rows(), "dense_backward_input: shape mismatch");
  const Eigen::Index n = delta.cols();
  dX.resize(W.cols(), n);
  const Eigen::Index nb = num_blocks(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < nb; ++blk) {
    const Eigen::Index c0 = blk * kBlock;
    const Eigen::Index nc = std::min(kBlock, n - c0);
    dX.middleCols(c0, nc).noalias() = W.transpose() * delta.middleCols(c0, nc);
  }
}

void tanh_forward(const Matrix& Z, Matrix& A) {
  A.resize(Z.rows(), Z.cols());
  const Eigen::Index size = Z.size();
  const float* z = Z.data();
  float* a = A.data();
#pragma omp parallel for simd schedule(static)
  for (Eigen::Index i = 0; i < size; ++i) a[i] = std::tanh(z[i]);
}

void relu_forward(const Matrix& Z, Matrix& A) {
  A.resize(Z.rows(), Z.cols());
  const Eigen::Index size = Z.size();
  const float* z = Z.data();
  float* a = A.data();
#pragma omp parallel for simd schedule(static)
  for (Eigen::Index i = 0; i < size; ++i) a[i] = z[i] > 0.0f ? z[i] : 0.0f;
}

void tanh_backward(const Matrix& A, Matrix& delta) {
  check(A.size() == delta.size(), "tanh_backward: shape mismatch");
  const Eigen::Index size = A.size();
  const float* a = A.data();
  float* d = delta.data();
#pragma omp parallel for simd schedule(static)
  for (Eigen::Index i = 0; i < size; ++i) d[i] *= 1.0f - a[i] * a[i];
}

void relu_backward(const Matrix& Z, Matrix& delta) {
  check(Z.size() == delta.size(), "relu_backward: shape mismatch");
  const Eigen::Index size = Z.size();
  const float* z = Z.data();
  float* d = delta.data();
#pragma omp parallel for simd schedule(static)
  for (Eigen::Index i = 0; i < size; ++i) d[i] = z[i] > 0.0f ? d[i] : 0.0f;
}

}  // namespace chden::kernels
