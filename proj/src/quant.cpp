// SPDX-License-Identifier: Apache-2.0
#include "chden/quant.hpp"

#include <algorithm>
#include <stdexcept>

namespace chden {

namespace {

template <typename M>
void fake_quantize_params(M& values, const QuantParams& q) {
  float* p = values.data();
  for (Eigen::Index i = 0; i < values.size(); ++i) p[i] = static_cast<float>(fake_quantize(p[i], q));
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Moving-average min/max of layer outputs.
class ActivationRanges {
 public:
  ActivationRanges(std::size_t layers, double momentum) : ranges_(layers), momentum_(momentum) {}

  void observe(const std::vector<Eigen::MatrixXf>& outputs) {
    for (std::size_t l = 0; l < ranges_.size(); ++l) {
      const double lo = outputs[l].minCoeff();
      const double hi = outputs[l].maxCoeff();
      if (!seen_) {
        ranges_[l] = {lo, hi};
      } else {
        ranges_[l].lo = momentum_ * ranges_[l].lo + (1.0 - momentum_) * lo;
        ranges_[l].hi = momentum_ * ranges_[l].hi + (1.0 - momentum_) * hi;
      }
    }
    seen_ = true;
  }

  void seed_from(const QuantSpec& spec) {
    for (std::size_t l = 0; l < ranges_.size(); ++l)
      ranges_[l] = {spec.layers[l].activations.observed_min, spec.layers[l].activations.observed_max};
    seen_ = true;
  }

  const Range& operator[](std::size_t l) const { return ranges_[l]; }

 private:
  std::vector<Range> ranges_;
  double momentum_;
  bool seen_ = false;
};

QuantSpec spec_for(const MlpModel& params, const ActivationRanges& act, const QuantPlan& plan) {
  QuantSpec spec;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& L = params.layers[l];
    const auto& b = plan.for_layer(l);
    LayerQuant lq;
    lq.weights = make_quant_params(L.weight.minCoeff(), L.weight.maxCoeff(), b.weights);
    lq.biases = make_quant_params(L.bias.minCoeff(), L.bias.maxCoeff(), b.biases);
    lq.activations = make_quant_params(std::min(act[l].lo, act[l].hi), std::max(act[l].lo, act[l].hi), b.activations);
    spec.layers.push_back(lq);
  }
  return spec;
}

}  // namespace

QuantSpec calibrate(const MlpModel& model, const Dataset& data, const QuantPlan& plan, double momentum,
                    int batch_size) {
  if (data.empty()) throw std::invalid_argument("calibrate: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("calibrate: batch_size must be >= 1");
  MlpModel float_model = model;
  float_model.quant.reset();
  ActivationRanges act(model.layers.size(), momentum);
  ForwardTrace tr;
  const auto B = static_cast<std::size_t>(batch_size);
  for (std::size_t b = 0; b < data.size(); b += B) {
    const auto n = static_cast<Eigen::Index>(std::min(B, data.size() - b));
    forward_batch(float_model, data.ls.middleCols(static_cast<Eigen::Index>(b), n), &tr);
    act.observe(tr.post);
  }
  return spec_for(float_model, act, plan);
}

MlpModel apply_quantization(const MlpModel& float_model, const QuantSpec& spec) {
  if (spec.layers.size() != float_model.layers.size())
    throw std::invalid_argument("apply_quantization: spec does not cover every layer");
  MlpModel m = float_model;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    fake_quantize_params(m.layers[l].weight, spec.layers[l].weights);
    fake_quantize_params(m.layers[l].bias, spec.layers[l].biases);
  }
  m.quant = spec;
  return m;
}

QatResult qat_retrain(const MlpModel& model, const Dataset& train_set, const Dataset& val_set, const QatConfig& cfg) {
  if (train_set.empty()) throw std::invalid_argument("qat_retrain: empty training set");
  MlpModel shadow = model;
  ActivationRanges act(model.layers.size(), cfg.momentum);
  if (model.quant) {
    act.seed_from(*model.quant);
  } else {
    act.seed_from(calibrate(model, train_set.slice(0, std::min<std::size_t>(train_set.size(), 8192)), cfg.plan,
                            cfg.momentum));
  }
  shadow.quant.reset();

  TrainHooks hooks;
  hooks.materialize = [&](const MlpModel& params, bool) { return apply_quantization(params, spec_for(params, act, cfg.plan)); };
  hooks.observe = [&](const ForwardTrace& tr) { act.observe(tr.raw); };

  QatResult out;
  out.history = train(shadow, train_set, val_set, cfg.train, &hooks);
  out.model = out.history.model;
  out.model.provenance = model.provenance;
  out.model.provenance.epochs += static_cast<int>(out.history.val_loss.size());
  return out;
}

ModelSize quantized_model_size(const MlpModel& model, const QuantSpec& spec) {
  if (spec.layers.size() != model.layers.size())
    throw std::invalid_argument("quantized_model_size: spec does not cover every layer");
  std::size_t bits = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    bits += static_cast<std::size_t>(model.layers[l].weight.size()) * static_cast<std::size_t>(spec.layers[l].weights.bits);
    bits += static_cast<std::size_t>(model.layers[l].bias.size()) * static_cast<std::size_t>(spec.layers[l].biases.bits);
  }
  ModelSize s;
  s.payload_bytes = (bits + 7) / 8;
  s.scale_overhead_bytes = model.layers.size() * 3 * 4;
  s.full_overhead_bytes = model.layers.size() * 3 * (4 + 4 + 1);
  return s;
}

ModelSize quantized_model_size(const MlpModel& model, int bits) {
  QuantSpec spec;
  const QuantParams q{bits, 1.0, 0, 0.0, 0.0};
  spec.layers.assign(model.layers.size(), LayerQuant{q, q, q});
  return quantized_model_size(model, spec);
}

}  // namespace chden
