// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"

#include "chden/dataset.hpp"
#include "chden/metrics.hpp"
#include "chden/quant.hpp"
#include "chden/quantizer.hpp"
#include "chden/train.hpp"

using namespace chden;

TEST_CASE("quantizer parameters") {
  const QuantParams a = make_quant_params(-1.0, 1.0, 8);
  CHECK(a.scale == doctest::Approx(2.0 / 255.0));
  CHECK(a.zero_point == 128);
  CHECK(a.max_code() == 255);

  const QuantParams b = make_quant_params(-0.3, 0.5, 10);
  CHECK(b.scale == doctest::Approx(0.8 / 1023.0));
  CHECK(b.zero_point == std::llround(0.3 / (0.8 / 1023.0)));

  const QuantParams pos = make_quant_params(0.2, 0.9, 4);
  CHECK(pos.zero_point == 0);
  const QuantParams neg = make_quant_params(-0.9, -0.2, 4);
  CHECK(neg.zero_point == 15);

  CHECK_THROWS_AS(make_quant_params(1.0, 0.0, 8), std::invalid_argument);
  CHECK_THROWS_AS(make_quant_params(0.0, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_quant_params(0.0, 1.0, 33), std::invalid_argument);
  CHECK_THROWS_AS(make_quant_params(0.0, INFINITY, 8), std::invalid_argument);
}

TEST_CASE("constant ranges are represented exactly") {
  const QuantParams z = make_quant_params(0.0, 0.0, 8);
  CHECK(z.scale == 1e-8);
  CHECK(fake_quantize(0.0, z) == 0.0);
  for (double v : {0.37, -0.37, 5.0}) {
    const QuantParams q = make_quant_params(v, v, 10);
    CHECK(fake_quantize(v, q) == v);
  }
}

TEST_CASE("round trip error is at most half a step inside the range") {
  Rng rng(1);
  for (int bits : {2, 4, 8, 10, 12, 16, 24, 32}) {
    CAPTURE(bits);
    for (int trial = 0; trial < 20; ++trial) {
      double lo = rng.uniform(-5.0, 1.0), hi = lo + rng.uniform(1e-3, 6.0);
      if (trial == 0) {
        lo = 0.0;
        hi = 1.0;
      }
      const QuantParams q = make_quant_params(lo, hi, bits);
      for (int i = 0; i < 200; ++i) {
        const double x = rng.uniform(lo, hi);
        const std::int64_t c = quantize(x, q);
        REQUIRE(c >= 0);
        REQUIRE(c <= q.max_code());
        CHECK(std::abs(x - dequantize(c, q)) <= q.scale / 2 * (1 + 1e-9) + 1e-15);
      }
    }
  }
}

TEST_CASE("quantization is monotone and saturates") {
  const QuantParams q = make_quant_params(-0.7, 1.3, 6);
  std::int64_t prev = quantize(-10.0, q);
  CHECK(prev == 0);
  for (double x = -10.0; x <= 10.0; x += 0.001) {
    const std::int64_t c = quantize(x, q);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(prev == q.max_code());
  CHECK(quantize(1e300, q) == q.max_code());
  CHECK(quantize(-1e300, q) == 0);
}

TEST_CASE("code packing round trip") {
  Rng rng(3);
  for (int bits = 1; bits <= 32; ++bits) {
    std::vector<std::int64_t> codes(37);
    const std::int64_t max = (std::int64_t{1} << bits) - 1;
    for (auto& c : codes) c = static_cast<std::int64_t>(rng.uniform(0.0, 1.0) * static_cast<double>(max + 1)) & max;
    codes[0] = max;
    const auto bytes = pack_codes(codes, bits);
    CHECK(bytes.size() == (37u * static_cast<unsigned>(bits) + 7) / 8);
    CHECK(unpack_codes(bytes, codes.size(), bits) == codes);
  }
  CHECK(pack_codes({1, 0, 1}, 1) == std::vector<std::uint8_t>{0b101});
}

namespace {

MlpModel small_model(Activation act, std::uint64_t seed) {
  MlpConfig cfg;
  cfg.width = 16;
  cfg.depth = 3;
  cfg.activation = act;
  Rng rng(seed);
  return init_glorot(cfg, rng);
}

}  // namespace

TEST_CASE("calibration produces three specs per layer") {
  const MlpModel m = small_model(Activation::relu, 1);
  const Dataset ds = generate_dataset(ChannelConfig{}, 500, 0.0, 30.0, 1);
  QuantPlan plan;
  plan.uniform = {10, 12, 8};
  const QuantSpec spec = calibrate(m, ds, plan);
  REQUIRE(spec.layers.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(spec.layers[l].weights.bits == 10);
    CHECK(spec.layers[l].biases.bits == 12);
    CHECK(spec.layers[l].activations.bits == 8);
    CHECK(spec.layers[l].weights.observed_min == doctest::Approx(m.layers[l].weight.minCoeff()));
    CHECK(spec.layers[l].weights.observed_max == doctest::Approx(m.layers[l].weight.maxCoeff()));
  }
  // ReLU outputs are non-negative, so hidden activation ranges start at 0.
  CHECK(spec.layers[0].activations.observed_min >= 0.0);
  CHECK(spec.worst_case_bits() == 12);
}

TEST_CASE("quantized weights lie on the grid") {
  const MlpModel m = small_model(Activation::tanh, 2);
  const Dataset ds = generate_dataset(ChannelConfig{}, 200, 0.0, 30.0, 2);
  const QuantSpec spec = calibrate(m, ds, QuantPlan{});
  const MlpModel q = apply_quantization(m, spec);
  for (std::size_t l = 0; l < 3; ++l) {
    const QuantParams& p = spec.layers[l].weights;
    for (Eigen::Index i = 0; i < q.layers[l].weight.size(); ++i) {
      const double v = q.layers[l].weight.data()[i];
      const double code = v / p.scale + static_cast<double>(p.zero_point);
      CHECK(std::abs(code - std::round(code)) < 1e-3);
      CHECK(std::abs(v - m.layers[l].weight.data()[i]) <= p.scale / 2 * 1.0001);
    }
  }
}

TEST_CASE("straight-through gradients equal float gradients of the dequantized network") {
  const MlpModel m = small_model(Activation::tanh, 3);
  const Dataset ds = generate_dataset(ChannelConfig{}, 64, 0.0, 30.0, 3);
  QuantPlan plan;
  plan.uniform = {10, 10, 32};
  QuantSpec spec = calibrate(m, ds, plan);
  for (auto& lq : spec.layers) lq.activations = make_quant_params(-50.0, 50.0, 32);
  const MlpModel q = apply_quantization(m, spec);
  MlpModel deq = q;
  deq.quant.reset();
  Gradients gq, gf;
  const Eigen::VectorXf snr = ds.snr();
  backward(q, ds.ls, ds.truth, snr, LossWeighting::verbatim, gq);
  backward(deq, ds.ls, ds.truth, snr, LossWeighting::verbatim, gf);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK((gq.weight[l] - gf.weight[l]).norm() <= 1e-4 * gf.weight[l].norm());
    CHECK((gq.bias[l] - gf.bias[l]).norm() <= 1e-4 * gf.bias[l].norm());
  }
}

TEST_CASE("gradients are blocked outside the activation range") {
  const MlpModel m = small_model(Activation::relu, 4);
  const Dataset ds = generate_dataset(ChannelConfig{}, 32, 0.0, 30.0, 4);
  QuantSpec spec = calibrate(m, ds, QuantPlan{});
  // Output-layer range far narrower than the outputs: everything saturates.
  spec.layers[2].activations = make_quant_params(0.0, 1e-9, 10);
  const MlpModel q = apply_quantization(m, spec);
  Gradients g;
  backward(q, ds.ls, ds.truth, ds.snr(), LossWeighting::none, g);
  for (const auto& w : g.weight) CHECK(w.isZero());
}

TEST_CASE("QAT at 32 bits stays close to float and QAT recovers at 10 bits") {
  const Dataset tr = generate_dataset(ChannelConfig{}, 3000, 0.0, 30.0, 5);
  const Dataset va = generate_dataset(ChannelConfig{}, 500, 0.0, 30.0, 6);
  MlpConfig cfg;
  cfg.width = 32;
  cfg.depth = 3;
  cfg.activation = Activation::tanh;
  Rng rng(5);
  TrainConfig tc;
  tc.max_epochs = 8;
  tc.learning_rate = 1e-3;
  tc.weighting = LossWeighting::linear;
  const MlpModel f = train(init_glorot(cfg, rng), tr, va, tc).model;
  const double lf = dataset_loss(f, va, tc.weighting);

  QatConfig qc;
  qc.plan.uniform = QuantBits::uniform(32);
  qc.train = tc;
  qc.train.max_epochs = 1;
  qc.train.learning_rate = 1e-5;
  const QatResult q32 = qat_retrain(f, tr, va, qc);
  REQUIRE(q32.model.quant.has_value());
  CHECK(dataset_loss(q32.model, va, tc.weighting) <= lf * 1.01);

  qc.plan.uniform = QuantBits::uniform(6);
  const MlpModel naive = apply_quantization(f, calibrate(f, tr, qc.plan));
  qc.train.max_epochs = 4;
  qc.train.learning_rate = 1e-4;
  const QatResult q6 = qat_retrain(f, tr, va, qc);
  CHECK(dataset_loss(q6.model, va, tc.weighting) <= dataset_loss(naive, va, tc.weighting));
  CHECK(q6.model.quant->layers[1].weights.bits == 6);
}

TEST_CASE("quantized size accounting") {
  MlpConfig big;
  big.width = 128;
  big.depth = 5;
  const MlpModel m = zero_model(big);
  const ModelSize s10 = quantized_model_size(m, 10);
  CHECK(s10.payload_bytes == 77500u);
  CHECK(s10.scale_overhead_bytes == 5u * 3u * 4u);
  CHECK(s10.full_overhead_bytes == 5u * 3u * 9u);
  CHECK(quantized_model_size(m, 32).payload_bytes == 248000u);
  CHECK(float_model_size_bytes(m) == 248000u);
  MlpConfig split;
  split.width = 64;
  split.depth = 3;
  const ModelSize s = quantized_model_size(zero_model(split), 10);
  CHECK(3 * s.payload_bytes == 39060u);
}
