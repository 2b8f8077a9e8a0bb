// SPDX-License-Identifier: Apache-2.0
#include "chden/model_io.hpp"

#include <array>
#include <string>

#include "chden/binary_io.hpp"

namespace chden {

namespace {

constexpr std::array<TensorKind, 3> kKinds = {TensorKind::weights, TensorKind::biases, TensorKind::activations};

template <typename M>
std::vector<std::int64_t> codes_of(const M& values, const QuantParams& q) {
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(values.size()));
  if constexpr (M::ColsAtCompileTime == 1) {
    for (Eigen::Index i = 0; i < values.size(); ++i) out.push_back(quantize(values[i], q));
  } else {
    for (Eigen::Index r = 0; r < values.rows(); ++r)
      for (Eigen::Index c = 0; c < values.cols(); ++c) out.push_back(quantize(values(r, c), q));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const MlpModel& model) {
  model.validate();
  io::ByteWriter w;
  w.bytes("OCNN");
  w.u16(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model.config.activation));
  w.u8(model.config.residual ? 1 : 0);
  w.u16(static_cast<std::uint16_t>(model.depth()));
  for (int d : model.dims()) {
    if (d > 0xFFFF) throw std::invalid_argument("encode_model: layer too wide for the format");
    w.u16(static_cast<std::uint16_t>(d));
  }
  for (const auto& L : model.layers) {
    for (Eigen::Index r = 0; r < L.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < L.weight.cols(); ++c) w.f32(L.weight(r, c));
    for (Eigen::Index r = 0; r < L.bias.size(); ++r) w.f32(L.bias[r]);
  }
  w.u8(model.quant ? 1 : 0);
  if (model.quant) {
    for (const auto& lq : model.quant->layers) {
      for (auto k : kKinds) {
        const auto& q = lq[k];
        w.u8(static_cast<std::uint8_t>(q.bits));
        w.f32(static_cast<float>(q.scale));
        w.i32(static_cast<std::int32_t>(q.zero_point));
        w.f32(static_cast<float>(q.observed_min));
        w.f32(static_cast<float>(q.observed_max));
      }
    }
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const auto& lq = model.quant->layers[l];
      w.raw(pack_codes(codes_of(model.layers[l].weight, lq.weights), lq.weights.bits));
      w.raw(pack_codes(codes_of(model.layers[l].bias, lq.biases), lq.biases.bits));
    }
  }
  w.u8(1);
  w.u64(model.provenance.seed);
  w.u32(static_cast<std::uint32_t>(model.provenance.epochs));
  w.f32(static_cast<float>(model.provenance.snr_min_db));
  w.f32(static_cast<float>(model.provenance.snr_max_db));
  w.u16(static_cast<std::uint16_t>(model.config.width));
  return w.take();
}

MlpModel decode_model(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("OCNN");
  const auto version = r.u16();
  if (version != kModelVersion) throw io::FormatError("unsupported model version " + std::to_string(version));
  MlpModel m;
  const auto act = r.u8();
  if (act > 1) throw io::FormatError("unknown activation code " + std::to_string(act));
  m.config.activation = static_cast<Activation>(act);
  m.config.residual = r.u8() != 0;
  const int D = r.u16();
  if (D < 2) throw io::FormatError("model depth must be >= 2");
  std::vector<int> dims(static_cast<std::size_t>(D) + 1);
  for (auto& d : dims) d = r.u16();
  m.config.depth = D;
  m.config.input_dim = dims.front();
  m.config.width = dims[1];
  for (int l = 0; l < D; ++l) {
    const int in = dims[static_cast<std::size_t>(l)];
    const int out = dims[static_cast<std::size_t>(l) + 1];
    DenseLayer L{Eigen::MatrixXf(out, in), Eigen::VectorXf(out)};
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) L.weight(i, j) = r.f32();
    for (int i = 0; i < out; ++i) L.bias[i] = r.f32();
    m.layers.push_back(std::move(L));
  }
  if (r.u8() != 0) {
    QuantSpec spec;
    spec.layers.resize(static_cast<std::size_t>(D));
    for (auto& lq : spec.layers) {
      for (auto k : kKinds) {
        auto& q = lq[k];
        q.bits = r.u8();
        if (q.bits < 1 || q.bits > 32) throw io::FormatError("bad bit-width in quant section");
        q.scale = r.f32();
        q.zero_point = r.i32();
        q.observed_min = r.f32();
        q.observed_max = r.f32();
      }
    }
    // Codes are redundant with the float section for this reader; validate and skip.
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      const auto& lq = spec.layers[l];
      const auto nw = static_cast<std::size_t>(m.layers[l].weight.size());
      const auto nb = static_cast<std::size_t>(m.layers[l].bias.size());
      r.raw((nw * static_cast<std::size_t>(lq.weights.bits) + 7) / 8);
      r.raw((nb * static_cast<std::size_t>(lq.biases.bits) + 7) / 8);
    }
    m.quant = std::move(spec);
  }
  if (r.u8() != 0) {
    m.provenance.seed = r.u64();
    m.provenance.epochs = static_cast<int>(r.u32());
    m.provenance.snr_min_db = r.f32();
    m.provenance.snr_max_db = r.f32();
    m.config.width = r.u16();
  }
  if (!r.at_end()) throw io::FormatError("trailing bytes after model");
  m.validate();
  return m;
}

void write_model(const MlpModel& model, const std::filesystem::path& path) {
  io::write_file(path, encode_model(model));
}

MlpModel read_model(const std::filesystem::path& path) { return decode_model(io::read_file(path)); }

}  // namespace chden
