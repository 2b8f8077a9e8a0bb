// SPDX-License-Identifier: Apache-2.0
//
// Random multipath OFDM channels, pilot observations with AWGN, and the
// LS / MMSE pilot-channel estimators.
#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chden/rng.hpp"

namespace chden {

using cplx = std::complex<double>;

struct ChannelConfig {
  int num_subcarriers = 96;
  /// Strictly increasing, all < num_subcarriers. Default: comb of every 4th
  /// subcarrier (24 pilots for 96 subcarriers).
  std::vector<int> pilot_indices = comb(96, 4);
  double subcarrier_spacing_hz = 15e3;
  int max_paths = 30;
  double gain_min_db = -50.0;
  double gain_max_db = 0.0;
  double delay_spread_min_ns = 10.0;
  double delay_spread_max_ns = 1000.0;
  std::uint64_t seed = 1;

  int num_pilots() const { return static_cast<int>(pilot_indices.size()); }

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;

  static std::vector<int> comb(int num_subcarriers, int spacing);
};

struct ChannelRealization {
  Eigen::VectorXcd h;  // frequency response, length F
  int n_paths = 0;
  std::vector<double> delays_s;
  std::vector<cplx> gains;  // already scaled by the power normalization
  double delay_spread_ns = 0.0;

  Eigen::VectorXcd at_pilots(const ChannelConfig& cfg) const;
};

/// One pilot observation: LS estimate and ground truth on the pilot grid.
struct Sample {
  Eigen::VectorXcd ls_estimate;
  Eigen::VectorXcd truth;
  double noise_var = 0.0;
  double snr = 0.0;  // linear, 1 / noise_var
};

struct CovarianceModel {
  Eigen::MatrixXcd C;
  /// Number of snapshots used; empty for an ensemble ("ideal") estimate.
  std::optional<std::size_t> n_samples_used;
};

/// Random multipath channel: 1..max_paths paths, normalized delays uniform on
/// [0,1] scaled by a delay spread uniform on the configured range, path gains
/// uniform in dB with uniform phase, normalized to unit mean |h[f]|^2.
ChannelRealization generate_channel(const ChannelConfig& cfg, Rng& rng);

/// Builds h[f] = sum_l g_l exp(-j 2 pi f df tau_l) for explicit paths.
ChannelRealization channel_from_paths(const ChannelConfig& cfg, std::span<const double> delays_s,
                                      std::span<const cplx> gains, bool normalize);

/// Non-normative stylized tapped-delay-line profile: fixed normalized tap delays
/// and powers, Rayleigh tap amplitudes, scaled by the given delay spread.
ChannelRealization generate_tdl_channel(const ChannelConfig& cfg, double delay_spread_ns, Rng& rng);

/// Transmits unit-modulus QPSK pilots over `ch` with CN(0, sigma^2) noise,
/// sigma^2 = 10^(-snr_db/10), and returns the elementwise LS estimate.
Sample make_sample(const ChannelRealization& ch, const ChannelConfig& cfg, double snr_db, Rng& rng);
Sample make_sample_with_noise_var(const ChannelRealization& ch, const ChannelConfig& cfg,
                                  double noise_var, Rng& rng);

/// Zero-mean sample covariance of pilot vectors (one per snapshot), Hermitian-symmetrized.
CovarianceModel estimate_covariance(std::span<const Eigen::VectorXcd> pilot_vectors);
CovarianceModel estimate_covariance(std::span<const ChannelRealization> realizations,
                                    const ChannelConfig& cfg);

/// Sample covariance of `count` fresh generator draws, restricted to the pilot
/// grid. Stands in for perfect covariance knowledge. Draws are split into
/// fixed blocks with derived seeds, so the result does not depend on the
/// number of threads.
CovarianceModel ensemble_covariance(const ChannelConfig& cfg, std::size_t count, std::uint64_t seed);

enum class SolveMode { strict, pseudo_inverse };

/// The linear Wiener filter C (C + sigma^2 I)^-1, computed by a linear solve.
/// With SolveMode::strict a singular (C + sigma^2 I) throws std::domain_error.
class WienerFilter {
 public:
  WienerFilter(const CovarianceModel& cov, double noise_var, SolveMode mode = SolveMode::strict);

  Eigen::VectorXcd apply(const Eigen::VectorXcd& ls) const { return matrix_ * ls; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }

 private:
  Eigen::MatrixXcd matrix_;
};

Eigen::VectorXcd mmse_estimate(const Eigen::VectorXcd& ls, const CovarianceModel& cov, double noise_var,
                               SolveMode mode = SolveMode::strict);

inline double db_to_noise_var(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace chden
