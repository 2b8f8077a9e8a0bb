// SPDX-License-Identifier: Apache-2.0
//
// Uniform affine quantizer: code = clamp(round(x / scale) + zero_point, 0, 2^Q - 1),
// value = (code - zero_point) * scale.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace chden {

struct QuantParams {
  int bits = 32;
  double scale = 1.0;
  std::int64_t zero_point = 0;
  double observed_min = 0.0;
  double observed_max = 0.0;

  std::int64_t max_code() const { return (std::int64_t{1} << bits) - 1; }
  /// Smallest / largest representable value.
  double lowest() const { return static_cast<double>(-zero_point) * scale; }
  double highest() const { return static_cast<double>(max_code() - zero_point) * scale; }
};

/// Range -> parameters. scale = (max - min) / (2^Q - 1) and
/// zero_point = clamp(round(-min / scale), 0, 2^Q - 1). A constant range
/// (min == max) is represented exactly: scale 1e-8 for zero, |v| otherwise.
QuantParams make_quant_params(double min, double max, int bits);

std::int64_t quantize(double x, const QuantParams& q);
double dequantize(std::int64_t code, const QuantParams& q);
inline double fake_quantize(double x, const QuantParams& q) { return dequantize(quantize(x, q), q); }

enum class TensorKind : std::uint8_t { weights = 0, biases = 1, activations = 2 };

struct LayerQuant {
  QuantParams weights;
  QuantParams biases;
  QuantParams activations;

  const QuantParams& operator[](TensorKind k) const;
  QuantParams& operator[](TensorKind k);
};

struct QuantSpec {
  std::vector<LayerQuant> layers;

  /// Largest bit-width across layers and types, the figure reported for a model.
  int worst_case_bits() const;
};

/// Packs codes at `bits` bits each, LSB-first, padded to a whole byte.
std::vector<std::uint8_t> pack_codes(const std::vector<std::int64_t>& codes, int bits);
std::vector<std::int64_t> unpack_codes(const std::vector<std::uint8_t>& bytes, std::size_t count, int bits);

}  // namespace chden
