// SPDX-License-Identifier: Apache-2.0
//
// SNR-weighted MSE, reverse-mode gradients, and the Adam training loop.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "chden/dataset.hpp"
#include "chden/mlp.hpp"

namespace chden {

/// How the per-sample linear SNR enters the loss.
///  verbatim: the error vector is multiplied by SNR before the squared norm
///            (effective weight SNR^2).
///  linear:   effective weight SNR.
///  none:     plain MSE.
enum class LossWeighting : std::uint8_t { verbatim, linear, none };

std::string_view to_string(LossWeighting w);
LossWeighting parse_loss_weighting(std::string_view name);

/// Multiplier applied to the error vector (before squaring) for a sample of linear SNR `snr`.
double error_multiplier(double snr, LossWeighting w);

/// (1/N) sum_n || (out_n - tgt_n) * m(snr_n) ||^2, columns are samples.
double loss_weighted_mse(const Eigen::MatrixXf& outputs, const Eigen::MatrixXf& targets, const Eigen::VectorXf& snrs,
                         LossWeighting weighting = LossWeighting::verbatim);

struct Gradients {
  std::vector<Eigen::MatrixXf> weight;
  std::vector<Eigen::VectorXf> bias;
};

/// Exact gradients of loss_weighted_mse over the batch (X inputs, T targets)
/// with respect to every weight and bias. For quantized models the activation
/// quantizers pass gradients straight through inside their representable range
/// and block them outside. Returns the loss.
double backward(const MlpModel& model, const Eigen::MatrixXf& X, const Eigen::MatrixXf& T, const Eigen::VectorXf& snr,
                LossWeighting weighting, Gradients& grads, ForwardTrace* trace_out = nullptr);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 256;
  int max_epochs = 200;
  int patience = 20;
  /// Multiplicative learning-rate decay applied after every epoch.
  double lr_decay = 1.0;
  LossWeighting weighting = LossWeighting::verbatim;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  MlpModel model;  // parameters at the best validation loss
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(int epoch)
      : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Customization points used by quantization-aware training.
struct TrainHooks {
  /// Builds the network evaluated in forward/backward from the trainable
  /// parameters. `training` is false for validation and the returned model.
  std::function<MlpModel(const MlpModel& params, bool training)> materialize;
  /// Sees the forward trace of every training batch.
  std::function<void(const ForwardTrace&)> observe;
};

/// Mini-batch Adam. Batch order comes from `tc.seed` and the epoch index, so
/// identical inputs give bit-identical parameters. Gradient reductions follow
/// the fixed block order of chden::kernels. Stops after `patience` epochs
/// without validation improvement and returns the best checkpoint.
TrainResult train(const MlpModel& init, const Dataset& train_set, const Dataset& val_set, const TrainConfig& tc,
                  const TrainHooks* hooks = nullptr);

/// Validation loss of `model` over a whole dataset, evaluated in chunks.
double dataset_loss(const MlpModel& model, const Dataset& ds, LossWeighting weighting);

}  // namespace chden
