// SPDX-License-Identifier: Apache-2.0
//
// Residual fully-connected denoiser: D dense layers
// (input -> W) (W -> W) x (D - 2) (W -> input), activation on every hidden
// layer, linear output, and one additive skip from input to output.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "chden/quantizer.hpp"
#include "chden/rng.hpp"

namespace chden {

enum class Activation : std::uint8_t { tanh = 0, relu = 1 };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct MlpConfig {
  int input_dim = 48;
  int width = 64;
  int depth = 3;  // number of weight layers
  Activation activation = Activation::relu;
  bool residual = true;

  /// [input, W, ..., W, input], depth + 1 entries.
  std::vector<int> layer_dims() const;
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXf weight;  // out x in
  Eigen::VectorXf bias;    // out

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

struct Provenance {
  std::uint64_t seed = 0;
  int epochs = 0;
  double snr_min_db = 0.0;
  double snr_max_db = 0.0;
};

struct MlpModel {
  MlpConfig config;
  std::vector<DenseLayer> layers;
  /// When set, weights/biases hold dequantized values and forward passes
  /// fake-quantize every layer output with the activation parameters.
  std::optional<QuantSpec> quant;
  Provenance provenance;

  int depth() const { return static_cast<int>(layers.size()); }
  /// Actual layer dims [in, h1, ..., out]; hidden widths shrink after pruning.
  std::vector<int> dims() const;
  std::size_t parameter_count() const;
  /// Shapes chain, residual dims match, parameters finite. Throws std::invalid_argument.
  void validate() const;
};

/// Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpModel init_glorot(const MlpConfig& cfg, Rng& rng);
/// All-zero weights and biases.
MlpModel zero_model(const MlpConfig& cfg);

inline double glorot_bound(int fan_in, int fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

/// Intermediate values kept for backpropagation and activation statistics.
/// For layer l: pre[l] = W_l a_{l-1} + b_l, post[l] = layer output after the
/// activation (identity on the last layer) and after activation fake-quantization
/// when the model is quantized. raw[l] holds the pre-quantization output and is
/// only filled for quantized models.
struct ForwardTrace {
  std::vector<Eigen::MatrixXf> pre;
  std::vector<Eigen::MatrixXf> post;
  std::vector<Eigen::MatrixXf> raw;
};

/// X: input_dim x n, one sample per column.
Eigen::MatrixXf forward_batch(const MlpModel& model, const Eigen::MatrixXf& X, ForwardTrace* trace = nullptr);
Eigen::VectorXf forward(const MlpModel& model, const Eigen::VectorXf& x);

}  // namespace chden
