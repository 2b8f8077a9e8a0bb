// SPDX-License-Identifier: Apache-2.0
//
// Per-layer, per-type calibration, quantization-aware retraining with a
// straight-through estimator, and quantized model-size accounting.
#pragma once

#include <cstddef>
#include <vector>

#include "chden/dataset.hpp"
#include "chden/mlp.hpp"
#include "chden/quantizer.hpp"
#include "chden/train.hpp"

namespace chden {

struct QuantBits {
  int weights = 10;
  int biases = 10;
  int activations = 10;

  static QuantBits uniform(int q) { return {q, q, q}; }
};

/// Bit-widths for every layer; `per_layer` overrides the uniform default when non-empty.
struct QuantPlan {
  QuantBits uniform = QuantBits::uniform(10);
  std::vector<QuantBits> per_layer;

  const QuantBits& for_layer(std::size_t l) const { return per_layer.empty() ? uniform : per_layer.at(l); }
};

inline constexpr double kActivationRangeMomentum = 0.99;

/// Weight and bias ranges from the parameter min/max; activation ranges from
/// an exponential moving average of per-batch min/max over `data`.
QuantSpec calibrate(const MlpModel& model, const Dataset& data, const QuantPlan& plan,
                    double momentum = kActivationRangeMomentum, int batch_size = 256);

/// Replaces weights and biases by their quantize-dequantize values under
/// `spec` and attaches the spec (activations are fake-quantized on forward).
MlpModel apply_quantization(const MlpModel& float_model, const QuantSpec& spec);

struct QatConfig {
  QuantPlan plan;
  double momentum = kActivationRangeMomentum;
  TrainConfig train;
};

struct QatResult {
  MlpModel model;  // dequantized parameters + final spec
  TrainResult history;
};

/// Retrains a float (or already quantized) model with fake quantization of
/// weights, biases and layer outputs in the forward pass. Gradients reach the
/// float shadow parameters through the quantizers unchanged inside their
/// range. Activation ranges follow the moving average during training and are
/// frozen for validation and for the returned model.
QatResult qat_retrain(const MlpModel& model, const Dataset& train_set, const Dataset& val_set, const QatConfig& cfg);

struct ModelSize {
  std::size_t payload_bytes = 0;        // sum of parameters * Q / 8
  std::size_t scale_overhead_bytes = 0; // one float32 scale per layer and type
  std::size_t full_overhead_bytes = 0;  // scale f32 + zero point i32 + bit-width u8 per layer and type

  std::size_t with_scales() const { return payload_bytes + scale_overhead_bytes; }
  std::size_t with_full_metadata() const { return payload_bytes + full_overhead_bytes; }
};

ModelSize quantized_model_size(const MlpModel& model, const QuantSpec& spec);
/// Same accounting for a uniform bit-width without a spec.
ModelSize quantized_model_size(const MlpModel& model, int bits);

}  // namespace chden
