// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <omp.h>

#include "doctest.h"

#include "chden/channel.hpp"

using namespace chden;

namespace {

// Dense Gaussian elimination with partial pivoting: solves A X = B.
Eigen::MatrixXcd gauss_solve(Eigen::MatrixXcd A, Eigen::MatrixXcd B) {
  const Eigen::Index n = A.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i < n; ++i)
      if (std::abs(A(i, k)) > std::abs(A(p, k))) p = i;
    A.row(k).swap(A.row(p));
    B.row(k).swap(B.row(p));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const cplx f = A(i, k) / A(k, k);
      for (Eigen::Index j = k; j < n; ++j) A(i, j) -= f * A(k, j);
      for (Eigen::Index j = 0; j < B.cols(); ++j) B(i, j) -= f * B(k, j);
    }
  }
  Eigen::MatrixXcd X(n, B.cols());
  for (Eigen::Index i = n - 1; i >= 0; --i)
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
      cplx s = B(i, j);
      for (Eigen::Index k = i + 1; k < n; ++k) s -= A(i, k) * X(k, j);
      X(i, j) = s / A(i, i);
    }
  return X;
}

}  // namespace

TEST_CASE("default pilot comb") {
  const ChannelConfig cfg;
  REQUIRE(cfg.num_pilots() == 24);
  for (int p = 0; p < 24; ++p) CHECK(cfg.pilot_indices[static_cast<std::size_t>(p)] == 4 * p);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config validation") {
  ChannelConfig cfg;
  cfg.pilot_indices = {0, 8, 4};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ChannelConfig{};
  cfg.pilot_indices = {96};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ChannelConfig{};
  cfg.max_paths = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("realizations are power-normalized") {
  const ChannelConfig cfg;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto ch = generate_channel(cfg, rng);
    CHECK(ch.h.size() == 96);
    CHECK(ch.h.squaredNorm() / 96.0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ch.n_paths >= 1);
    CHECK(ch.n_paths <= 30);
    CHECK(ch.delay_spread_ns >= 10.0);
    CHECK(ch.delay_spread_ns <= 1000.0);
    for (double d : ch.delays_s) CHECK(d <= ch.delay_spread_ns * 1e-9);
  }
}

TEST_CASE("single path channel response") {
  const ChannelConfig cfg;
  const std::vector<double> delay{100e-9};
  const std::vector<cplx> gain{cplx(0.5, 0.0)};
  const auto ch = channel_from_paths(cfg, delay, gain, false);
  for (int f = 0; f < 96; ++f) {
    const cplx expect = 0.5 * std::polar(1.0, -2.0 * std::numbers::pi * 15e3 * 100e-9 * f);
    CHECK(std::abs(ch.h[f] - expect) < 1e-12);
  }
  const auto flat = channel_from_paths(cfg, std::vector<double>{0.0}, gain, true);
  for (int f = 0; f < 96; ++f) CHECK(std::abs(flat.h[f] - cplx(1.0, 0.0)) < 1e-12);
}

TEST_CASE("path count is uniform on 1..30") {
  const ChannelConfig cfg;
  Rng rng(11);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += generate_channel(cfg, rng).n_paths;
  // mean 15.5, sd of the mean = sqrt((30^2 - 1) / 12 / n)
  CHECK(std::abs(sum / n - 15.5) < 5.0 * std::sqrt((900.0 - 1.0) / 12.0 / n));
}

TEST_CASE("noiseless LS estimate is exact") {
  const ChannelConfig cfg;
  Rng rng(5);
  const auto ch = generate_channel(cfg, rng);
  const Sample s = make_sample_with_noise_var(ch, cfg, 0.0, rng);
  CHECK(std::isinf(s.snr));
  CHECK((s.ls_estimate - s.truth).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("LS error variance matches the noise variance") {
  const ChannelConfig cfg;
  Rng rng(6);
  const double nv = db_to_noise_var(10.0);
  double acc = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const auto ch = generate_channel(cfg, rng);
    const Sample s = make_sample(ch, cfg, 10.0, rng);
    acc += (s.ls_estimate - s.truth).squaredNorm();
  }
  const double per_pilot = acc / (n * 24.0);
  // Exponential(nv) per pilot: relative sd of the mean is 1/sqrt(count).
  CHECK(std::abs(per_pilot / nv - 1.0) < 5.0 / std::sqrt(n * 24.0));
}

TEST_CASE("make_sample rejects non-finite SNR") {
  const ChannelConfig cfg;
  Rng rng(1);
  const auto ch = generate_channel(cfg, rng);
  CHECK_THROWS_AS(make_sample(ch, cfg, std::nan(""), rng), std::invalid_argument);
}

TEST_CASE("covariance estimate") {
  CHECK_THROWS_AS(estimate_covariance(std::span<const Eigen::VectorXcd>{}), std::invalid_argument);
  const ChannelConfig cfg;
  Rng rng(8);
  std::vector<ChannelRealization> rs;
  for (int i = 0; i < 100; ++i) rs.push_back(generate_channel(cfg, rng));
  const auto cov = estimate_covariance(rs, cfg);
  REQUIRE(cov.n_samples_used == 100u);
  CHECK((cov.C - cov.C.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  // Unit average power on the pilots: trace / P is the mean pilot power.
  double tr = cov.C.trace().real() / 24.0;
  CHECK(tr == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("ensemble covariance does not depend on the thread count") {
  const ChannelConfig cfg;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = ensemble_covariance(cfg, 3000, 42);
  omp_set_num_threads(4);
  const auto b = ensemble_covariance(cfg, 3000, 42);
  omp_set_num_threads(saved);
  CHECK(a.C == b.C);
  CHECK_FALSE(a.n_samples_used.has_value());
}

TEST_CASE("MMSE filter matches a dense Gaussian-elimination oracle") {
  const ChannelConfig cfg;
  Rng rng(9);
  std::vector<ChannelRealization> rs;
  for (int i = 0; i < 200; ++i) rs.push_back(generate_channel(cfg, rng));
  const auto cov = estimate_covariance(rs, cfg);
  for (double snr_db : {0.0, 10.0, 30.0}) {
    const double nv = db_to_noise_var(snr_db);
    const Sample s = make_sample(rs.front(), cfg, snr_db, rng);
    const Eigen::MatrixXcd A = cov.C + nv * Eigen::MatrixXcd::Identity(24, 24);
    const Eigen::MatrixXcd ls = s.ls_estimate;
    const Eigen::VectorXcd oracle = cov.C * gauss_solve(A, ls);
    const Eigen::VectorXcd got = mmse_estimate(s.ls_estimate, cov, nv);
    CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::VectorXcd pinv = mmse_estimate(s.ls_estimate, cov, nv, SolveMode::pseudo_inverse);
    CHECK((pinv - oracle).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("MMSE with zero noise on a full-rank covariance returns the observation") {
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Identity(4, 4);
  C(0, 1) = cplx(0.2, 0.1);
  C(1, 0) = std::conj(C(0, 1));
  const CovarianceModel cov{C, std::nullopt};
  Eigen::VectorXcd ls(4);
  ls << cplx(1, 2), cplx(-1, 0.5), cplx(0.3, 0), cplx(0, -2);
  CHECK((mmse_estimate(ls, cov, 0.0) - ls).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("singular system") {
  const CovarianceModel cov{Eigen::MatrixXcd::Zero(4, 4), std::nullopt};
  Eigen::VectorXcd ls = Eigen::VectorXcd::Ones(4);
  CHECK_THROWS_AS(mmse_estimate(ls, cov, 0.0), std::domain_error);
  const Eigen::VectorXcd est = mmse_estimate(ls, cov, 0.0, SolveMode::pseudo_inverse);
  CHECK(est.allFinite());
  CHECK_THROWS_AS(WienerFilter(cov, -1.0), std::invalid_argument);
}
