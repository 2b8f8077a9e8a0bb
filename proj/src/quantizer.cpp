// SPDX-License-Identifier: Apache-2.0
#include "chden/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chden {

QuantParams make_quant_params(double min, double max, int bits) {
  if (bits < 1 || bits > 32) throw std::invalid_argument("quantizer: bit-width must be in [1, 32]");
  if (!std::isfinite(min) || !std::isfinite(max) || min > max)
    throw std::invalid_argument("quantizer: invalid range");
  QuantParams q;
  q.bits = bits;
  q.observed_min = min;
  q.observed_max = max;
  if (max == min) {
    // Constant set: pick a grid that contains the value exactly.
    if (min == 0.0) {
      q.scale = 1e-8;
      q.zero_point = 0;
    } else {
      q.scale = std::abs(min);
      q.zero_point = min > 0.0 ? 0 : 1;
    }
    return q;
  }
  // The grid always spans zero so the zero point never clamps and every value
  // in [min, max] lands within half a step of its code.
  const double lo = std::min(min, 0.0);
  const double hi = std::max(max, 0.0);
  q.scale = (hi - lo) / static_cast<double>(q.max_code());
  q.zero_point = std::clamp<std::int64_t>(std::llround(-lo / q.scale), 0, q.max_code());
  return q;
}

std::int64_t quantize(double x, const QuantParams& q) {
  const double r = std::round(x / q.scale);
  // Saturate before converting; |x / scale| may exceed the int64 range.
  const double lo = static_cast<double>(-q.zero_point);
  const double hi = static_cast<double>(q.max_code() - q.zero_point);
  return static_cast<std::int64_t>(std::clamp(r, lo, hi)) + q.zero_point;
}

double dequantize(std::int64_t code, const QuantParams& q) {
  return static_cast<double>(code - q.zero_point) * q.scale;
}

const QuantParams& LayerQuant::operator[](TensorKind k) const {
  switch (k) {
    case TensorKind::weights: return weights;
    case TensorKind::biases: return biases;
    case TensorKind::activations: return activations;
  }
  throw std::invalid_argument("LayerQuant: bad tensor kind");
}

QuantParams& LayerQuant::operator[](TensorKind k) {
  return const_cast<QuantParams&>(static_cast<const LayerQuant&>(*this)[k]);
}

int QuantSpec::worst_case_bits() const {
  int worst = 0;
  for (const auto& l : layers) worst = std::max({worst, l.weights.bits, l.biases.bits, l.activations.bits});
  return worst;
}

std::vector<std::uint8_t> pack_codes(const std::vector<std::int64_t>& codes, int bits) {
  std::vector<std::uint8_t> out((codes.size() * static_cast<std::size_t>(bits) + 7) / 8, 0);
  std::size_t bit = 0;
  for (const auto c : codes) {
    const auto u = static_cast<std::uint64_t>(c);
    for (int b = 0; b < bits; ++b, ++bit)
      if ((u >> b) & 1u) out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
  }
  return out;
}

std::vector<std::int64_t> unpack_codes(const std::vector<std::uint8_t>& bytes, std::size_t count, int bits) {
  if (bytes.size() != (count * static_cast<std::size_t>(bits) + 7) / 8)
    throw std::invalid_argument("unpack_codes: byte count does not match");
  std::vector<std::int64_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& c : out) {
    std::uint64_t u = 0;
    for (int b = 0; b < bits; ++b, ++bit)
      if ((bytes[bit / 8] >> (bit % 8)) & 1u) u |= std::uint64_t{1} << b;
    c = static_cast<std::int64_t>(u);
  }
  return out;
}

}  // namespace chden
