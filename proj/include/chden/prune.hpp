// SPDX-License-Identifier: Apache-2.0
//
// Structured neuron pruning driven by the average percentage of zeros (APoZ)
// of each hidden neuron's output.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "chden/dataset.hpp"
#include "chden/mlp.hpp"
#include "chden/quant.hpp"
#include "chden/train.hpp"

namespace chden {

struct ApozReport {
  /// apoz[l][c] for hidden layer l (0-based over hidden layers) and neuron c.
  std::vector<std::vector<double>> apoz;
  std::vector<std::vector<std::size_t>> zero_counts;
  std::size_t n_samples = 0;
  double epsilon = 0.0;
};

/// Exact zeros for ReLU; tanh outputs are essentially never exactly zero.
double default_zero_tolerance(Activation a);

/// Fraction of samples for which |output| <= epsilon, per hidden neuron.
/// Outputs are taken after activation fake-quantization for quantized models.
ApozReport compute_apoz(const MlpModel& model, const Dataset& data, double epsilon);

/// Per hidden layer, the neuron indices to remove.
using PruneSelection = std::vector<std::vector<int>>;

/// Neurons with apoz >= threshold.
PruneSelection select_by_apoz(const ApozReport& report, double threshold);

struct RemovedNeuron {
  int hidden_layer = 0;
  int neuron = 0;  // index in the model passed to prune_neurons
};

struct PruneResult {
  MlpModel model;
  std::vector<RemovedNeuron> removed;
};

/// Deletes row c of W_l and b_l and column c of W_{l+1} for every selected
/// neuron. Throws std::invalid_argument if a layer would lose all neurons or
/// an index is out of range.
PruneResult prune_neurons(const MlpModel& model, const PruneSelection& selection);

/// Share of hidden neurons removed relative to the nominal configuration, in percent.
double pruned_percent(const MlpModel& model);
int hidden_neuron_count(const MlpModel& model);

struct SweepPoint {
  double pruned_pct = 0.0;
  double threshold = 1.0;
  double gain_db = 0.0;
  std::size_t macs = 0;
  std::size_t size_bytes = 0;
  std::uint64_t seed = 0;
};

struct PruneSweepConfig {
  /// Negative selects default_zero_tolerance for the model's activation.
  double zero_tolerance = -1.0;
  /// Threshold decrement per step (1%).
  double step = 0.01;
  /// The sweep stops once this share of hidden neurons is gone.
  double max_pruned_pct = 70.0;
  /// Samples of the training set used for APoZ statistics.
  std::size_t apoz_samples = 10000;
  /// Retraining after every step that removes neurons. Quantized models are
  /// retrained with QAT at their current bit-widths.
  TrainConfig retrain;
};

struct PruneSweepResult {
  std::vector<SweepPoint> curve;  // starts at the unpruned model
  std::vector<MlpModel> models;   // one per curve point
};

using GainFunction = std::function<double(const MlpModel&)>;

/// Lowers the APoZ threshold from 100% in `step` decrements; whenever the
/// threshold admits new neurons they are pruned, the model is retrained and
/// evaluated. Each recorded point has strictly more pruning than the last.
PruneSweepResult prune_sweep(const MlpModel& model, const Dataset& train_set, const Dataset& val_set,
                             const GainFunction& gain_of, const PruneSweepConfig& cfg);

/// Storage of a (possibly quantized) model: quantized payload + scales, or float32.
std::size_t model_size_bytes(const MlpModel& model);

}  // namespace chden
