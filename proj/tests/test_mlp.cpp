// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"

#include "chden/binary_io.hpp"
#include "chden/model_io.hpp"
#include "chden/mlp.hpp"
#include "chden/quant.hpp"

using namespace chden;

TEST_CASE("layer dims and validation") {
  MlpConfig cfg;
  cfg.width = 128;
  cfg.depth = 5;
  CHECK(cfg.layer_dims() == std::vector<int>{48, 128, 128, 128, 128, 48});
  cfg.depth = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.depth = 2;
  cfg.width = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK(to_string(Activation::tanh) == "tanh");
  CHECK(parse_activation("relu") == Activation::relu);
  CHECK_THROWS_AS(parse_activation("gelu"), std::invalid_argument);
}

TEST_CASE("Glorot initialization") {
  CHECK(glorot_bound(48, 128) == doctest::Approx(std::sqrt(6.0 / 176.0)));
  CHECK(glorot_bound(48, 128) == doctest::Approx(0.18464).epsilon(1e-4));
  MlpConfig cfg;
  cfg.width = 128;
  cfg.depth = 5;
  Rng rng(1);
  const MlpModel m = init_glorot(cfg, rng);
  REQUIRE(m.depth() == 5);
  const auto& W0 = m.layers[0].weight;
  CHECK(W0.rows() == 128);
  CHECK(W0.cols() == 48);
  CHECK(W0.cwiseAbs().maxCoeff() <= glorot_bound(48, 128));
  CHECK(m.layers[0].bias.isZero());
  // Uniform(-a, a) has variance a^2 / 3.
  const double a = glorot_bound(48, 128);
  const double var = W0.squaredNorm() / W0.size();
  CHECK(var == doctest::Approx(a * a / 3.0).epsilon(0.05));
  CHECK(m.parameter_count() == 62000u);
  Rng rng2(1);
  const MlpModel m2 = init_glorot(cfg, rng2);
  CHECK(m2.layers[3].weight == m.layers[3].weight);
}

TEST_CASE("hand-computed forward pass") {
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.width = 2;
  cfg.depth = 2;
  cfg.activation = Activation::relu;
  MlpModel m = zero_model(cfg);
  m.layers[0].weight << 1.0f, -1.0f, 0.5f, 2.0f;
  m.layers[0].bias << 0.0f, -1.0f;
  m.layers[1].weight << 1.0f, 1.0f, -2.0f, 0.0f;
  m.layers[1].bias << 0.5f, 0.25f;
  Eigen::VectorXf x(2);
  x << 3.0f, 1.0f;
  // hidden: relu([3 - 1, 1.5 + 2 - 1]) = [2, 2.5]
  // out: [2 + 2.5 + 0.5, -4 + 0.25] = [5, -3.75]; residual adds x.
  Eigen::VectorXf y = forward(m, x);
  CHECK(y[0] == doctest::Approx(8.0));
  CHECK(y[1] == doctest::Approx(-2.75));
  m.config.residual = false;
  y = forward(m, x);
  CHECK(y[0] == doctest::Approx(5.0));
  CHECK(y[1] == doctest::Approx(-3.75));

  m.config.activation = Activation::tanh;
  y = forward(m, x);
  const double h0 = std::tanh(2.0), h1 = std::tanh(2.5);
  CHECK(y[0] == doctest::Approx(h0 + h1 + 0.5));
  CHECK(y[1] == doctest::Approx(-2.0 * h0 + 0.25));
}

TEST_CASE("zero network with residual is the identity") {
  MlpConfig cfg;
  const MlpModel m = zero_model(cfg);
  Rng rng(2);
  Eigen::MatrixXf X(48, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = static_cast<float>(rng.normal());
  CHECK(forward_batch(m, X) == X);
}

TEST_CASE("input dimension mismatch") {
  const MlpModel m = zero_model(MlpConfig{});
  CHECK_THROWS_AS(forward(m, Eigen::VectorXf::Zero(47)), std::invalid_argument);
}

TEST_CASE("model file round trip") {
  MlpConfig cfg;
  cfg.width = 32;
  cfg.depth = 4;
  cfg.activation = Activation::tanh;
  Rng rng(3);
  MlpModel m = init_glorot(cfg, rng);
  for (auto& L : m.layers) L.bias.setConstant(0.125f);
  m.provenance = {99, 17, 3.75, 3.75};
  const auto bytes = encode_model(m);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "OCNN");
  const MlpModel r = decode_model(bytes);
  CHECK(r.config.activation == Activation::tanh);
  CHECK(r.config.width == 32);
  CHECK(r.depth() == 4);
  for (int l = 0; l < 4; ++l) {
    CHECK(r.layers[static_cast<std::size_t>(l)].weight == m.layers[static_cast<std::size_t>(l)].weight);
    CHECK(r.layers[static_cast<std::size_t>(l)].bias == m.layers[static_cast<std::size_t>(l)].bias);
  }
  CHECK(r.provenance.seed == 99u);
  CHECK(r.provenance.epochs == 17);
  CHECK(encode_model(r) == bytes);

  auto bad = bytes;
  bad[3] = '?';
  CHECK_THROWS_AS(decode_model(bad), io::FormatError);
  bad = bytes;
  bad.resize(bytes.size() / 2);
  CHECK_THROWS_AS(decode_model(bad), io::FormatError);
}

TEST_CASE("quantized model file round trip") {
  MlpConfig cfg;
  cfg.width = 16;
  cfg.depth = 3;
  Rng rng(4);
  const MlpModel f = init_glorot(cfg, rng);
  QuantSpec spec;
  for (const auto& L : f.layers) {
    LayerQuant lq;
    lq.weights = make_quant_params(L.weight.minCoeff(), L.weight.maxCoeff(), 10);
    lq.biases = make_quant_params(0.0, 0.0, 10);
    lq.activations = make_quant_params(-4.0, 4.0, 10);
    spec.layers.push_back(lq);
  }
  const MlpModel q = apply_quantization(f, spec);
  const MlpModel r = decode_model(encode_model(q));
  REQUIRE(r.quant.has_value());
  CHECK(r.quant->layers.size() == 3);
  CHECK(r.quant->layers[1].weights.bits == 10);
  CHECK(r.quant->layers[1].weights.zero_point == q.quant->layers[1].weights.zero_point);
  for (std::size_t l = 0; l < 3; ++l) CHECK(r.layers[l].weight == q.layers[l].weight);
  Eigen::VectorXf x = Eigen::VectorXf::LinSpaced(48, -1.0f, 1.0f);
  CHECK((forward(r, x) - forward(q, x)).cwiseAbs().maxCoeff() < 1e-5);
}
