// SPDX-License-Identifier: Apache-2.0
#include "chden/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "chden/kernels.hpp"

namespace chden {

std::string_view to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu" || name == "ReLU") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::vector<int> MlpConfig::layer_dims() const {
  std::vector<int> dims{input_dim};
  for (int l = 0; l < depth - 1; ++l) dims.push_back(width);
  dims.push_back(input_dim);
  return dims;
}

void MlpConfig::validate() const {
  if (depth < 2) throw std::invalid_argument("MlpConfig: depth must be >= 2");
  if (width < 1) throw std::invalid_argument("MlpConfig: width must be >= 1");
  if (input_dim < 1) throw std::invalid_argument("MlpConfig: input_dim must be >= 1");
}

std::vector<int> MlpModel::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().in_dim());
  for (const auto& l : layers) d.push_back(l.out_dim());
  return d;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void MlpModel::validate() const {
  if (layers.size() < 2) throw std::invalid_argument("MlpModel: need at least two layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    if (L.bias.size() != L.weight.rows()) throw std::invalid_argument("MlpModel: bias size mismatch");
    if (l > 0 && L.in_dim() != layers[l - 1].out_dim())
      throw std::invalid_argument("MlpModel: layer " + std::to_string(l) + " input does not match previous output");
    if (!L.weight.allFinite() || !L.bias.allFinite()) throw std::invalid_argument("MlpModel: non-finite parameter");
  }
  if (config.residual && layers.front().in_dim() != layers.back().out_dim())
    throw std::invalid_argument("MlpModel: residual requires output dim == input dim");
  if (quant && quant->layers.size() != layers.size())
    throw std::invalid_argument("MlpModel: quant spec does not cover every layer");
}

MlpModel zero_model(const MlpConfig& cfg) {
  cfg.validate();
  MlpModel m;
  m.config = cfg;
  const auto d = cfg.layer_dims();
  for (std::size_t l = 0; l + 1 < d.size(); ++l)
    m.layers.push_back({Eigen::MatrixXf::Zero(d[l + 1], d[l]), Eigen::VectorXf::Zero(d[l + 1])});
  return m;
}

MlpModel init_glorot(const MlpConfig& cfg, Rng& rng) {
  MlpModel m = zero_model(cfg);
  for (auto& L : m.layers) {
    const double bound = glorot_bound(L.in_dim(), L.out_dim());
    // Column-major fill order is part of the seeded-determinism contract.
    for (Eigen::Index j = 0; j < L.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < L.weight.rows(); ++i)
        L.weight(i, j) = static_cast<float>(rng.uniform(-bound, bound));
  }
  return m;
}

namespace {

void fake_quantize_inplace(Eigen::MatrixXf& M, const QuantParams& q) {
  float* p = M.data();
  const Eigen::Index n = M.size();
  for (Eigen::Index i = 0; i < n; ++i) p[i] = static_cast<float>(fake_quantize(p[i], q));
}

}  // namespace

Eigen::MatrixXf forward_batch(const MlpModel& model, const Eigen::MatrixXf& X, ForwardTrace* trace) {
  if (model.layers.empty()) throw std::invalid_argument("forward: empty model");
  if (X.rows() != model.layers.front().in_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(X.rows()) + " rows, model expects " +
                                std::to_string(model.layers.front().in_dim()));
  const std::size_t D = model.layers.size();
  const bool quantized = model.quant.has_value();
  if (trace) {
    trace->pre.resize(D);
    trace->post.resize(D);
    trace->raw.resize(quantized ? D : 0);
  }
  Eigen::MatrixXf cur = X;
  Eigen::MatrixXf z, a;
  for (std::size_t l = 0; l < D; ++l) {
    const auto& L = model.layers[l];
    kernels::dense_forward(L.weight, L.bias, cur, z);
    if (l + 1 < D) {
      if (model.config.activation == Activation::tanh)
        kernels::tanh_forward(z, a);
      else
        kernels::relu_forward(z, a);
    } else {
      a = z;
    }
    if (quantized) {
      if (trace) trace->raw[l] = a;
      fake_quantize_inplace(a, model.quant->layers[l].activations);
    }
    if (trace) {
      trace->pre[l] = z;
      trace->post[l] = a;
    }
    cur.swap(a);
  }
  if (model.config.residual) cur += X;
  return cur;
}

Eigen::VectorXf forward(const MlpModel& model, const Eigen::VectorXf& x) {
  Eigen::MatrixXf X = x;
  return forward_batch(model, X).col(0);
}

}  // namespace chden
