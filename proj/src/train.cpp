// SPDX-License-Identifier: Apache-2.0
#include "chden/train.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "chden/kernels.hpp"

namespace chden {

std::string_view to_string(LossWeighting w) {
  switch (w) {
    case LossWeighting::verbatim: return "verbatim";
    case LossWeighting::linear: return "linear";
    case LossWeighting::none: return "none";
  }
  return "?";
}

LossWeighting parse_loss_weighting(std::string_view name) {
  if (name == "verbatim" || name == "snr_squared") return LossWeighting::verbatim;
  if (name == "linear" || name == "snr") return LossWeighting::linear;
  if (name == "none") return LossWeighting::none;
  throw std::invalid_argument("unknown loss weighting '" + std::string(name) + "'");
}

double error_multiplier(double snr, LossWeighting w) {
  switch (w) {
    case LossWeighting::verbatim: return snr;
    case LossWeighting::linear: return std::sqrt(snr);
    case LossWeighting::none: return 1.0;
  }
  return 1.0;
}

double loss_weighted_mse(const Eigen::MatrixXf& outputs, const Eigen::MatrixXf& targets, const Eigen::VectorXf& snrs,
                         LossWeighting weighting) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols() || snrs.size() != outputs.cols())
    throw std::invalid_argument("loss_weighted_mse: batch shape mismatch");
  const Eigen::Index N = outputs.cols();
  if (N == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    const double m = error_multiplier(snrs[n], weighting);
    double sq = 0.0;
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
      const double e = (static_cast<double>(outputs(i, n)) - targets(i, n)) * m;
      sq += e * e;
    }
    total += sq;
  }
  return total / static_cast<double>(N);
}

double backward(const MlpModel& model, const Eigen::MatrixXf& X, const Eigen::MatrixXf& T, const Eigen::VectorXf& snr,
                LossWeighting weighting, Gradients& grads, ForwardTrace* trace_out) {
  const Eigen::Index N = X.cols();
  if (N == 0) throw std::invalid_argument("backward: empty batch");
  ForwardTrace local;
  ForwardTrace& tr = trace_out ? *trace_out : local;
  const Eigen::MatrixXf out = forward_batch(model, X, &tr);
  const double loss = loss_weighted_mse(out, T, snr, weighting);

  // dL/d(out_n) = (2/N) m_n^2 (out_n - t_n)
  Eigen::MatrixXf delta = out - T;
  for (Eigen::Index n = 0; n < N; ++n) {
    const double m = error_multiplier(snr[n], weighting);
    delta.col(n) *= static_cast<float>(2.0 * m * m / static_cast<double>(N));
  }
  // The residual skip adds X to the output; its gradient path ends at the input.

  const std::size_t D = model.layers.size();
  grads.weight.resize(D);
  grads.bias.resize(D);
  Eigen::MatrixXf next;
  for (std::size_t li = D; li-- > 0;) {
    const auto& L = model.layers[li];
    if (model.quant) {
      // Straight-through estimator: identity inside the representable range.
      const auto& q = model.quant->layers[li].activations;
      const float lo = static_cast<float>(q.lowest() - 0.5 * q.scale);
      const float hi = static_cast<float>(q.highest() + 0.5 * q.scale);
      const Eigen::MatrixXf& raw = tr.raw[li];
      delta = (raw.array() >= lo && raw.array() <= hi).select(delta, 0.0f);
    }
    if (li + 1 < D) {
      if (model.config.activation == Activation::tanh) {
        // tanh' from the unquantized activation output.
        const Eigen::MatrixXf& a = model.quant ? tr.raw[li] : tr.post[li];
        kernels::tanh_backward(a, delta);
      } else {
        kernels::relu_backward(tr.pre[li], delta);
      }
    }
    const Eigen::MatrixXf& input = li == 0 ? X : tr.post[li - 1];
    kernels::dense_backward_params(delta, input, grads.weight[li], grads.bias[li]);
    if (li > 0) {
      kernels::dense_backward_input(L.weight, delta, next);
      delta.swap(next);
    }
  }
  return loss;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (max_epochs < 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
}

double dataset_loss(const MlpModel& model, const Dataset& ds, LossWeighting weighting) {
  if (ds.empty()) return 0.0;
  constexpr std::size_t kChunk = 8192;
  double total = 0.0;
  const Eigen::VectorXf snr = ds.snr();
  for (std::size_t b = 0; b < ds.size(); b += kChunk) {
    const auto n = static_cast<Eigen::Index>(std::min(kChunk, ds.size() - b));
    const auto c0 = static_cast<Eigen::Index>(b);
    const Eigen::MatrixXf out = forward_batch(model, ds.ls.middleCols(c0, n));
    total += loss_weighted_mse(out, ds.truth.middleCols(c0, n), snr.segment(c0, n), weighting) * static_cast<double>(n);
  }
  return total / static_cast<double>(ds.size());
}

namespace {

class Adam {
 public:
  Adam(const MlpModel& model, const TrainConfig& tc) : tc_(tc) {
    for (const auto& L : model.layers) {
      mw_.push_back(Eigen::MatrixXf::Zero(L.weight.rows(), L.weight.cols()));
      vw_.push_back(Eigen::MatrixXf::Zero(L.weight.rows(), L.weight.cols()));
      mb_.push_back(Eigen::VectorXf::Zero(L.bias.size()));
      vb_.push_back(Eigen::VectorXf::Zero(L.bias.size()));
    }
  }

  void step(MlpModel& model, const Gradients& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(tc_.beta1, t_);
    const double c2 = 1.0 - std::pow(tc_.beta2, t_);
    const float step = static_cast<float>(lr * std::sqrt(c2) / c1);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      update(model.layers[l].weight, g.weight[l], mw_[l], vw_[l], step, c2);
      update(model.layers[l].bias, g.bias[l], mb_[l], vb_[l], step, c2);
    }
  }

 private:
  template <typename P, typename G, typename S>
  void update(P& p, const G& g, S& m, S& v, float step, double c2) {
    const float b1 = static_cast<float>(tc_.beta1);
    const float b2 = static_cast<float>(tc_.beta2);
    // epsilon is specified against the bias-corrected second moment.
    const float eps = static_cast<float>(tc_.epsilon * std::sqrt(c2));
    m.array() = b1 * m.array() + (1.0f - b1) * g.array();
    v.array() = b2 * v.array() + (1.0f - b2) * g.array().square();
    p.array() -= step * m.array() / (v.array().sqrt() + eps);
  }

  TrainConfig tc_;
  int t_ = 0;
  std::vector<Eigen::MatrixXf> mw_, vw_;
  std::vector<Eigen::VectorXf> mb_, vb_;
};

}  // namespace

TrainResult train(const MlpModel& init, const Dataset& train_set, const Dataset& val_set, const TrainConfig& tc,
                  const TrainHooks* hooks) {
  tc.validate();
  init.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const Dataset& val = val_set.empty() ? train_set : val_set;

  auto materialize = [&](const MlpModel& p, bool training) {
    return hooks && hooks->materialize ? hooks->materialize(p, training) : p;
  };

  MlpModel params = init;
  params.quant.reset();
  Adam opt(params, tc);
  TrainResult result;
  result.model = materialize(params, false);
  result.best_epoch = 0;
  result.best_val_loss = dataset_loss(result.model, val, tc.weighting);
  if (!std::isfinite(result.best_val_loss)) throw TrainingDiverged(0);

  const Eigen::VectorXf snr_all = train_set.snr();
  const std::size_t N = train_set.size();
  const auto B = static_cast<std::size_t>(tc.batch_size);
  std::vector<std::size_t> order(N);
  Gradients grads;
  ForwardTrace trace;
  Eigen::MatrixXf Xb, Tb;
  Eigen::VectorXf Sb;
  double lr = tc.learning_rate;
  int since_best = 0;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < N; b0 += B) {
      const std::size_t nb = std::min(B, N - b0);
      const auto n = static_cast<Eigen::Index>(nb);
      Xb.resize(train_set.ls.rows(), n);
      Tb.resize(train_set.truth.rows(), n);
      Sb.resize(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto src = static_cast<Eigen::Index>(order[b0 + static_cast<std::size_t>(j)]);
        Xb.col(j) = train_set.ls.col(src);
        Tb.col(j) = train_set.truth.col(src);
        Sb[j] = snr_all[src];
      }
      const MlpModel net = materialize(params, true);
      const double loss = backward(net, Xb, Tb, Sb, tc.weighting, grads, &trace);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch);
      if (hooks && hooks->observe) hooks->observe(trace);
      opt.step(params, grads, lr);
      epoch_loss += loss * static_cast<double>(nb);
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(N));

    MlpModel current = materialize(params, false);
    const double vl = dataset_loss(current, val, tc.weighting);
    if (!std::isfinite(vl)) throw TrainingDiverged(epoch);
    result.val_loss.push_back(vl);
    if (vl < result.best_val_loss) {
      result.best_val_loss = vl;
      result.best_epoch = epoch;
      result.model = std::move(current);
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
    lr *= tc.lr_decay;
  }
  result.model.provenance.seed = tc.seed;
  result.model.provenance.epochs = static_cast<int>(result.val_loss.size());
  return result;
}

}  // namespace chden
