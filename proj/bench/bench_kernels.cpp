// SPDX-License-Identifier: Apache-2.0
//
// Parallel vs. serial reference dense kernels on training-sized batches.
// Arguments: {out, in, batch}.
#include <benchmark/benchmark.h>

#include "chden/kernels.hpp"
#include "chden/rng.hpp"

namespace {

using chden::kernels::Matrix;
using chden::kernels::Vector;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  chden::Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = static_cast<float>(rng.uniform(-1.0, 1.0));
  return m;
}

template <bool Parallel>
void BM_Forward(benchmark::State& st) {
  const auto out = st.range(0), in = st.range(1), n = st.range(2);
  const Matrix W = random_matrix(out, in, 1), X = random_matrix(in, n, 2);
  const Vector b = random_matrix(out, 1, 3).col(0);
  Matrix Z;
  for (auto _ : st) {
    if constexpr (Parallel) chden::kernels::dense_forward(W, b, X, Z);
    else chden::kernels::reference::dense_forward(W, b, X, Z);
    benchmark::DoNotOptimize(Z.data());
  }
  st.SetItemsProcessed(st.iterations() * n);
  st.counters["MAC/s"] = benchmark::Counter(static_cast<double>(st.iterations() * out * (in + 1) * n),
                                            benchmark::Counter::kIsRate);
}

template <bool Parallel>
void BM_BackwardParams(benchmark::State& st) {
  const auto out = st.range(0), in = st.range(1), n = st.range(2);
  const Matrix D = random_matrix(out, n, 4), X = random_matrix(in, n, 5);
  Matrix dW;
  Vector db;
  for (auto _ : st) {
    if constexpr (Parallel) chden::kernels::dense_backward_params(D, X, dW, db);
    else chden::kernels::reference::dense_backward_params(D, X, dW, db);
    benchmark::DoNotOptimize(dW.data());
  }
  st.SetItemsProcessed(st.iterations() * n);
}

template <bool Parallel>
void BM_BackwardInput(benchmark::State& st) {
  const auto out = st.range(0), in = st.range(1), n = st.range(2);
  const Matrix W = random_matrix(out, in, 6), D = random_matrix(out, n, 7);
  Matrix dX;
  for (auto _ : st) {
    if constexpr (Parallel) chden::kernels::dense_backward_input(W, D, dX);
    else chden::kernels::reference::dense_backward_input(W, D, dX);
    benchmark::DoNotOptimize(dX.data());
  }
  st.SetItemsProcessed(st.iterations() * n);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 48, 256})->Args({128, 128, 256})->Args({64, 64, 256})->Args({128, 128, 8192});
}

}  // namespace

BENCHMARK(BM_Forward<true>)->Name("forward/parallel")->Apply(shapes);
BENCHMARK(BM_Forward<false>)->Name("forward/reference")->Apply(shapes);
BENCHMARK(BM_BackwardParams<true>)->Name("backward_params/parallel")->Apply(shapes);
BENCHMARK(BM_BackwardParams<false>)->Name("backward_params/reference")->Apply(shapes);
BENCHMARK(BM_BackwardInput<true>)->Name("backward_input/parallel")->Apply(shapes);
BENCHMARK(BM_BackwardInput<false>)->Name("backward_input/reference")->Apply(shapes);

BENCHMARK_MAIN();
