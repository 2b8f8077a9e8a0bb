// SPDX-License-Identifier: Apache-2.0
#include "chden/evaluate.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace chden {

void SnrScheme::validate() const {
  if (K < 1) throw std::invalid_argument("SnrScheme: K must be >= 1");
  if (!(snr_max_db > snr_min_db)) throw std::invalid_argument("SnrScheme: snr_max must exceed snr_min");
}

SnrScheme::Selection SnrScheme::select(double snr_db) const {
  Selection s;
  s.clamped = snr_db < snr_min_db || snr_db > snr_max_db;
  const double pos = std::floor((snr_db - snr_min_db) / step());
  s.index = static_cast<int>(std::clamp(pos, 0.0, static_cast<double>(K - 1)));
  return s;
}

std::vector<double> default_snr_grid() {
  std::vector<double> g;
  for (int s = 0; s <= 30; ++s) g.push_back(s);
  return g;
}

EvalSet EvalSet::restrict_to(double lo, double hi, bool include_hi) const {
  EvalSet out;
  for (std::size_t i = 0; i < grid_db.size(); ++i) {
    const double s = grid_db[i];
    if (s >= lo && (s < hi || (include_hi && s == hi))) {
      out.grid_db.push_back(s);
      out.per_snr.push_back(per_snr[i]);
    }
  }
  return out;
}

EvalSet make_eval_set(const ChannelConfig& cfg, std::size_t channels_per_point, std::vector<double> grid_db,
                      std::uint64_t seed) {
  EvalSet e;
  e.per_snr = generate_grid_datasets(cfg, channels_per_point, grid_db, seed);
  e.grid_db = std::move(grid_db);
  return e;
}

GainCurve evaluate_gain(const EvalSet& eval, const BatchDenoiser& denoiser) {
  if (eval.grid_db.empty()) throw std::invalid_argument("evaluate_gain: empty SNR grid");
  GainCurve curve;
  curve.snr_db = eval.grid_db;
  double sum = 0.0;
  for (std::size_t g = 0; g < eval.grid_db.size(); ++g) {
    const Dataset& ds = eval.per_snr[g];
    if (ds.empty()) throw std::invalid_argument("evaluate_gain: empty grid point");
    const Eigen::MatrixXf est = denoiser(ds.ls, eval.grid_db[g]);
    double acc = 0.0;
    for (Eigen::Index n = 0; n < ds.ls.cols(); ++n) {
      const Gain gn = denoising_gain_db_packed(est.col(n), ds.ls.col(n), ds.truth.col(n));
      if (gn.saturated) ++curve.saturated;
      acc += gn.db;
    }
    const double mean = acc / static_cast<double>(ds.size());
    curve.gain_db.push_back(mean);
    sum += mean;
  }
  curve.mean_db = sum / static_cast<double>(eval.grid_db.size());
  return curve;
}

BatchDenoiser single_nn_denoiser(const MlpModel& model) {
  return [model](const Eigen::MatrixXf& ls, double) { return forward_batch(model, ls); };
}

BatchDenoiser nn_denoiser(const std::vector<MlpModel>& models, const SnrScheme& scheme) {
  if (static_cast<int>(models.size()) != scheme.K)
    throw std::invalid_argument("nn_denoiser: need one model per SNR sub-range");
  return [models, scheme](const Eigen::MatrixXf& ls, double snr_db) {
    return forward_batch(models[static_cast<std::size_t>(scheme.select(snr_db).index)], ls);
  };
}

namespace {

Eigen::MatrixXf apply_wiener(const WienerFilter& wf, const Eigen::MatrixXf& ls) {
  Eigen::MatrixXf out(ls.rows(), ls.cols());
  for (Eigen::Index n = 0; n < ls.cols(); ++n) out.col(n) = pack_complex(wf.apply(unpack_complex(ls.col(n))));
  return out;
}

}  // namespace

BatchDenoiser mmse_denoiser(const CovarianceModel& cov) {
  return [cov](const Eigen::MatrixXf& ls, double snr_db) {
    return apply_wiener(WienerFilter(cov, db_to_noise_var(snr_db)), ls);
  };
}

BatchDenoiser mmse_sample_denoiser(const ChannelConfig& cfg, std::size_t snapshots, std::uint64_t seed) {
  if (snapshots == 0) throw std::invalid_argument("mmse_sample_denoiser: need at least one snapshot");
  return [cfg, snapshots, seed](const Eigen::MatrixXf& ls, double snr_db) {
    // Seed per SNR so each grid point sees its own independent snapshot set.
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(std::llround(snr_db * 1000.0))));
    std::vector<Eigen::VectorXcd> snaps;
    snaps.reserve(snapshots);
    for (std::size_t i = 0; i < snapshots; ++i)
      snaps.push_back(make_sample(generate_channel(cfg, rng), cfg, snr_db, rng).ls_estimate);
    const CovarianceModel cov = estimate_covariance(snaps);
    return apply_wiener(WienerFilter(cov, db_to_noise_var(snr_db), SolveMode::pseudo_inverse), ls);
  };
}

}  // namespace chden
