// SPDX-License-Identifier: Apache-2.0
//
// Gain evaluation over an SNR grid: per-grid-point mean of the per-sample gain
// in dB, then the unweighted mean over the grid points.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "chden/channel.hpp"
#include "chden/dataset.hpp"
#include "chden/metrics.hpp"
#include "chden/mlp.hpp"
#include "chden/snr_scheme.hpp"

namespace chden {

/// 0, 1, ..., 30 dB.
std::vector<double> default_snr_grid();

/// The same test channels observed at every grid SNR.
struct EvalSet {
  std::vector<double> grid_db;
  std::vector<Dataset> per_snr;

  /// Grid points whose SNR lies in [lo, hi) (hi inclusive when `include_hi`).
  EvalSet restrict_to(double lo, double hi, bool include_hi) const;
};

EvalSet make_eval_set(const ChannelConfig& cfg, std::size_t channels_per_point, std::vector<double> grid_db,
                      std::uint64_t seed);

struct GainCurve {
  std::vector<double> snr_db;
  std::vector<double> gain_db;
  double mean_db = 0.0;
  std::size_t saturated = 0;  // samples whose gain hit the saturation guard
};

/// Maps a batch of packed LS estimates observed at `snr_db` to estimates.
using BatchDenoiser = std::function<Eigen::MatrixXf(const Eigen::MatrixXf& ls, double snr_db)>;

GainCurve evaluate_gain(const EvalSet& eval, const BatchDenoiser& denoiser);

/// One network per sub-range of `scheme`, picked by the observation SNR.
BatchDenoiser nn_denoiser(const std::vector<MlpModel>& models, const SnrScheme& scheme);
BatchDenoiser single_nn_denoiser(const MlpModel& model);

/// Wiener filter with a fixed covariance and the true noise variance.
BatchDenoiser mmse_denoiser(const CovarianceModel& cov);

/// Wiener filter whose covariance is the sample covariance of `snapshots`
/// noisy LS estimates observed at the operating SNR (fresh channels per grid
/// point). This is the estimator a receiver can actually build.
BatchDenoiser mmse_sample_denoiser(const ChannelConfig& cfg, std::size_t snapshots, std::uint64_t seed);

}  // namespace chden
