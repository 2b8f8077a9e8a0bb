// SPDX-License-Identifier: Apache-2.0
#include "chden/channel.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <omp.h>

namespace chden {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Unit-modulus QPSK constellation.
cplx qpsk_symbol(int k) {
  static const std::array<cplx, 4> points = {
      std::polar(1.0, std::numbers::pi / 4.0), std::polar(1.0, 3.0 * std::numbers::pi / 4.0),
      std::polar(1.0, 5.0 * std::numbers::pi / 4.0), std::polar(1.0, 7.0 * std::numbers::pi / 4.0)};
  return points[static_cast<std::size_t>(k & 3)];
}

void synthesize(const ChannelConfig& cfg, ChannelRealization& ch, bool normalize) {
  const int F = cfg.num_subcarriers;
  ch.h = Eigen::VectorXcd::Zero(F);
  for (std::size_t l = 0; l < ch.delays_s.size(); ++l) {
    const double w = -kTwoPi * cfg.subcarrier_spacing_hz * ch.delays_s[l];
    for (int f = 0; f < F; ++f) {
      ch.h[f] += ch.gains[l] * std::polar(1.0, w * f);
    }
  }
  if (!normalize) return;
  const double power = ch.h.squaredNorm() / F;
  if (power <= 0.0) return;
  const double s = 1.0 / std::sqrt(power);
  ch.h *= s;
  for (auto& g : ch.gains) g *= s;
}

}  // namespace

std::vector<int> ChannelConfig::comb(int num_subcarriers, int spacing) {
  std::vector<int> idx;
  for (int f = 0; f < num_subcarriers; f += spacing) idx.push_back(f);
  return idx;
}

void ChannelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("ChannelConfig: " + msg); };
  if (num_subcarriers < 1) fail("num_subcarriers must be >= 1");
  if (pilot_indices.empty()) fail("no pilots");
  if (num_pilots() > num_subcarriers) fail("more pilots than subcarriers");
  for (std::size_t i = 0; i < pilot_indices.size(); ++i) {
    if (pilot_indices[i] < 0 || pilot_indices[i] >= num_subcarriers) fail("pilot index out of range");
    if (i > 0 && pilot_indices[i] <= pilot_indices[i - 1]) fail("pilot indices not strictly increasing");
  }
  if (max_paths < 1) fail("max_paths must be >= 1");
  if (!(subcarrier_spacing_hz > 0.0) || !std::isfinite(subcarrier_spacing_hz)) fail("bad subcarrier spacing");
  if (!std::isfinite(gain_min_db) || !std::isfinite(gain_max_db) || gain_min_db > gain_max_db)
    fail("bad gain range");
  if (!std::isfinite(delay_spread_min_ns) || !std::isfinite(delay_spread_max_ns) ||
      delay_spread_min_ns < 0.0 || delay_spread_min_ns > delay_spread_max_ns)
    fail("bad delay-spread range");
}

Eigen::VectorXcd ChannelRealization::at_pilots(const ChannelConfig& cfg) const {
  Eigen::VectorXcd out(cfg.num_pilots());
  for (int p = 0; p < cfg.num_pilots(); ++p) out[p] = h[cfg.pilot_indices[static_cast<std::size_t>(p)]];
  return out;
}

ChannelRealization generate_channel(const ChannelConfig& cfg, Rng& rng) {
  ChannelRealization ch;
  ch.n_paths = rng.uniform_int(1, cfg.max_paths);
  ch.delay_spread_ns = rng.uniform(cfg.delay_spread_min_ns, cfg.delay_spread_max_ns);
  ch.delays_s.resize(static_cast<std::size_t>(ch.n_paths));
  ch.gains.resize(static_cast<std::size_t>(ch.n_paths));
  for (int l = 0; l < ch.n_paths; ++l) {
    const double u = rng.uniform();
    const double gain_db = rng.uniform(cfg.gain_min_db, cfg.gain_max_db);
    const double phase = rng.uniform(0.0, kTwoPi);
    ch.delays_s[static_cast<std::size_t>(l)] = u * ch.delay_spread_ns * 1e-9;
    ch.gains[static_cast<std::size_t>(l)] = std::polar(std::pow(10.0, gain_db / 20.0), phase);
  }
  synthesize(cfg, ch, true);
  return ch;
}

ChannelRealization channel_from_paths(const ChannelConfig& cfg, std::span<const double> delays_s,
                                      std::span<const cplx> gains, bool normalize) {
  if (delays_s.size() != gains.size() || delays_s.empty())
    throw std::invalid_argument("channel_from_paths: delays and gains must be nonempty and equal length");
  ChannelRealization ch;
  ch.n_paths = static_cast<int>(delays_s.size());
  ch.delays_s.assign(delays_s.begin(), delays_s.end());
  ch.gains.assign(gains.begin(), gains.end());
  double max_delay = 0.0;
  for (double d : delays_s) max_delay = std::max(max_delay, d);
  ch.delay_spread_ns = max_delay * 1e9;
  synthesize(cfg, ch, normalize);
  return ch;
}

ChannelRealization generate_tdl_channel(const ChannelConfig& cfg, double delay_spread_ns, Rng& rng) {
  // Stylized NLOS profile: (normalized delay, relative power dB).
  static constexpr std::array<std::pair<double, double>, 12> taps = {{
      {0.0000, -13.4}, {0.3819, 0.0},   {0.4025, -2.2},  {0.5868, -4.0},
      {0.4610, -6.0},  {0.5375, -8.2},  {0.6708, -9.9},  {0.5750, -10.5},
      {0.7618, -7.5},  {1.5375, -15.9}, {1.8978, -6.6},  {2.2242, -16.7},
  }};
  ChannelRealization ch;
  ch.n_paths = static_cast<int>(taps.size());
  ch.delay_spread_ns = delay_spread_ns;
  for (const auto& [delay, power_db] : taps) {
    ch.delays_s.push_back(delay * delay_spread_ns * 1e-9);
    ch.gains.push_back(rng.complex_normal(std::pow(10.0, power_db / 10.0)));
  }
  synthesize(cfg, ch, true);
  return ch;
}

Sample make_sample_with_noise_var(const ChannelRealization& ch, const ChannelConfig& cfg, double noise_var,
                                  Rng& rng) {
  const int P = cfg.num_pilots();
  Sample s;
  s.noise_var = noise_var;
  s.snr = noise_var > 0.0 ? 1.0 / noise_var : std::numeric_limits<double>::infinity();
  s.truth = ch.at_pilots(cfg);
  s.ls_estimate.resize(P);
  for (int p = 0; p < P; ++p) {
    const cplx x = qpsk_symbol(rng.uniform_int(0, 3));
    const cplx w = noise_var > 0.0 ? rng.complex_normal(noise_var) : cplx{};
    const cplx y = s.truth[p] * x + w;
    s.ls_estimate[p] = y / x;
  }
  return s;
}

Sample make_sample(const ChannelRealization& ch, const ChannelConfig& cfg, double snr_db, Rng& rng) {
  if (!std::isfinite(snr_db)) throw std::invalid_argument("make_sample: snr_db must be finite");
  return make_sample_with_noise_var(ch, cfg, db_to_noise_var(snr_db), rng);
}

CovarianceModel estimate_covariance(std::span<const Eigen::VectorXcd> pilot_vectors) {
  if (pilot_vectors.empty()) throw std::invalid_argument("estimate_covariance: empty snapshot list");
  const Eigen::Index P = pilot_vectors.front().size();
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(P, P);
  for (const auto& v : pilot_vectors) {
    if (v.size() != P) throw std::invalid_argument("estimate_covariance: inconsistent vector lengths");
    C.noalias() += v * v.adjoint();
  }
  C /= static_cast<double>(pilot_vectors.size());
  Eigen::MatrixXcd herm = 0.5 * (C + C.adjoint());
  return {std::move(herm), pilot_vectors.size()};
}

CovarianceModel estimate_covariance(std::span<const ChannelRealization> realizations,
                                    const ChannelConfig& cfg) {
  std::vector<Eigen::VectorXcd> snaps;
  snaps.reserve(realizations.size());
  for (const auto& r : realizations) snaps.push_back(r.at_pilots(cfg));
  return estimate_covariance(snaps);
}

CovarianceModel ensemble_covariance(const ChannelConfig& cfg, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("ensemble_covariance: count must be > 0");
  constexpr std::size_t kBlock = 1024;
  const std::size_t n_blocks = (count + kBlock - 1) / kBlock;
  const int P = cfg.num_pilots();
  std::vector<Eigen::MatrixXcd> partial(n_blocks, Eigen::MatrixXcd::Zero(P, P));

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    const std::size_t end = std::min(count, begin + kBlock);
    auto& acc = partial[static_cast<std::size_t>(b)];
    for (std::size_t i = begin; i < end; ++i) {
      const Eigen::VectorXcd hp = generate_channel(cfg, rng).at_pilots(cfg);
      acc.noalias() += hp * hp.adjoint();
    }
  }
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(P, P);
  for (const auto& m : partial) C += m;  // block order, independent of thread count
  C /= static_cast<double>(count);
  Eigen::MatrixXcd herm = 0.5 * (C + C.adjoint());
  return {std::move(herm), std::nullopt};
}

WienerFilter::WienerFilter(const CovarianceModel& cov, double noise_var, SolveMode mode) {
  const Eigen::Index P = cov.C.rows();
  if (cov.C.cols() != P) throw std::invalid_argument("WienerFilter: covariance must be square");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("WienerFilter: noise_var must be >= 0");
  const Eigen::MatrixXcd A = cov.C + noise_var * Eigen::MatrixXcd::Identity(P, P);
  // C and A are Hermitian, so C A^-1 = (A^-1 C)^H.
  if (mode == SolveMode::strict) {
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(A);
    if (!lu.isInvertible())
      throw std::domain_error("WienerFilter: C + sigma^2 I is singular (use pseudo-inverse mode)");
    matrix_ = lu.solve(cov.C).adjoint();
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(A);
    matrix_ = cod.solve(cov.C).adjoint();
  }
}

Eigen::VectorXcd mmse_estimate(const Eigen::VectorXcd& ls, const CovarianceModel& cov, double noise_var,
                               SolveMode mode) {
  if (ls.size() != cov.C.rows()) throw std::invalid_argument("mmse_estimate: dimension mismatch");
  return WienerFilter(cov, noise_var, mode).apply(ls);
}

}  // namespace chden
