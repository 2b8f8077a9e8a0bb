// SPDX-License-Identifier: Apache-2.0
#include "chden/prune.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "chden/metrics.hpp"

namespace chden {

double default_zero_tolerance(Activation a) { return a == Activation::relu ? 0.0 : 1e-6; }

ApozReport compute_apoz(const MlpModel& model, const Dataset& data, double epsilon) {
  if (data.empty()) throw std::invalid_argument("compute_apoz: empty dataset");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("compute_apoz: epsilon must be >= 0");
  const std::size_t hidden = model.layers.size() - 1;
  ApozReport rep;
  rep.epsilon = epsilon;
  rep.n_samples = data.size();
  rep.zero_counts.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l)
    rep.zero_counts[l].assign(static_cast<std::size_t>(model.layers[l].out_dim()), 0);

  constexpr std::size_t kChunk = 4096;
  ForwardTrace tr;
  for (std::size_t b = 0; b < data.size(); b += kChunk) {
    const auto n = static_cast<Eigen::Index>(std::min(kChunk, data.size() - b));
    forward_batch(model, data.ls.middleCols(static_cast<Eigen::Index>(b), n), &tr);
    for (std::size_t l = 0; l < hidden; ++l) {
      const Eigen::MatrixXf& out = tr.post[l];
      auto& counts = rep.zero_counts[l];
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index c = 0; c < out.rows(); ++c)
          if (std::abs(out(c, j)) <= epsilon) ++counts[static_cast<std::size_t>(c)];
    }
  }
  rep.apoz.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l)
    for (auto cnt : rep.zero_counts[l])
      rep.apoz[l].push_back(static_cast<double>(cnt) / static_cast<double>(rep.n_samples));
  return rep;
}

PruneSelection select_by_apoz(const ApozReport& report, double threshold) {
  PruneSelection sel(report.apoz.size());
  for (std::size_t l = 0; l < report.apoz.size(); ++l)
    for (std::size_t c = 0; c < report.apoz[l].size(); ++c)
      if (report.apoz[l][c] >= threshold) sel[l].push_back(static_cast<int>(c));
  return sel;
}

namespace {

Eigen::MatrixXf drop_rows(const Eigen::MatrixXf& M, const std::vector<bool>& keep) {
  const auto n = static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
  Eigen::MatrixXf out(n, M.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    if (keep[static_cast<std::size_t>(i)]) out.row(r++) = M.row(i);
  return out;
}

Eigen::MatrixXf drop_cols(const Eigen::MatrixXf& M, const std::vector<bool>& keep) {
  const auto n = static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
  Eigen::MatrixXf out(M.rows(), n);
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    if (keep[static_cast<std::size_t>(j)]) out.col(c++) = M.col(j);
  return out;
}

Eigen::VectorXf drop_entries(const Eigen::VectorXf& v, const std::vector<bool>& keep) {
  Eigen::VectorXf out(static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true)));
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (keep[static_cast<std::size_t>(i)]) out[r++] = v[i];
  return out;
}

}  // namespace

PruneResult prune_neurons(const MlpModel& model, const PruneSelection& selection) {
  const std::size_t hidden = model.layers.size() - 1;
  if (selection.size() > hidden) throw std::invalid_argument("prune_neurons: selection names a non-hidden layer");
  PruneResult res;
  res.model = model;
  for (std::size_t l = 0; l < selection.size(); ++l) {
    if (selection[l].empty()) continue;
    const int width = model.layers[l].out_dim();
    std::vector<bool> keep(static_cast<std::size_t>(width), true);
    for (int c : selection[l]) {
      if (c < 0 || c >= width)
        throw std::invalid_argument("prune_neurons: neuron " + std::to_string(c) + " out of range in hidden layer " +
                                    std::to_string(l));
      keep[static_cast<std::size_t>(c)] = false;
    }
    if (std::none_of(keep.begin(), keep.end(), [](bool k) { return k; }))
      throw std::invalid_argument("prune_neurons: selection would remove every neuron of hidden layer " +
                                  std::to_string(l));
    for (int c = 0; c < width; ++c)
      if (!keep[static_cast<std::size_t>(c)]) res.removed.push_back({static_cast<int>(l), c});
    auto& cur = res.model.layers[l];
    auto& nxt = res.model.layers[l + 1];
    cur.weight = drop_rows(cur.weight, keep);
    cur.bias = drop_entries(cur.bias, keep);
    nxt.weight = drop_cols(nxt.weight, keep);
  }
  return res;
}

int hidden_neuron_count(const MlpModel& model) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) n += model.layers[l].out_dim();
  return n;
}

double pruned_percent(const MlpModel& model) {
  const int nominal = model.config.width * (model.depth() - 1);
  if (nominal <= 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(hidden_neuron_count(model)) / nominal);
}

std::size_t model_size_bytes(const MlpModel& model) {
  if (model.quant) return quantized_model_size(model, *model.quant).with_scales();
  return float_model_size_bytes(model);
}

namespace {

SweepPoint make_point(const MlpModel& m, double threshold, double gain, std::uint64_t seed) {
  return {pruned_percent(m), threshold, gain, mac_count(m), model_size_bytes(m), seed};
}

MlpModel retrain(const MlpModel& m, const Dataset& train_set, const Dataset& val_set, const TrainConfig& tc) {
  if (tc.max_epochs == 0) return m;
  if (m.quant) {
    QatConfig q;
    q.plan.per_layer.clear();
    for (const auto& lq : m.quant->layers)
      q.plan.per_layer.push_back({lq.weights.bits, lq.biases.bits, lq.activations.bits});
    q.train = tc;
    return qat_retrain(m, train_set, val_set, q).model;
  }
  MlpModel out = train(m, train_set, val_set, tc).model;
  out.provenance = m.provenance;
  return out;
}

}  // namespace

PruneSweepResult prune_sweep(const MlpModel& model, const Dataset& train_set, const Dataset& val_set,
                             const GainFunction& gain_of, const PruneSweepConfig& cfg) {
  if (!(cfg.step > 0.0)) throw std::invalid_argument("prune_sweep: step must be > 0");
  const double eps = cfg.zero_tolerance >= 0.0 ? cfg.zero_tolerance : default_zero_tolerance(model.config.activation);
  const Dataset stats = train_set.slice(0, std::min(cfg.apoz_samples, train_set.size()));

  PruneSweepResult res;
  MlpModel current = model;
  res.curve.push_back(make_point(current, 1.0 + cfg.step, gain_of(current), cfg.retrain.seed));
  res.models.push_back(current);

  const int steps = static_cast<int>(std::llround(1.0 / cfg.step));
  for (int s = 0; s <= steps; ++s) {
    if (pruned_percent(current) >= cfg.max_pruned_pct) break;
    const double t = 1.0 - s * cfg.step;
    const PruneSelection sel = select_by_apoz(compute_apoz(current, stats, eps), t - 1e-12);
    bool any = false;
    bool collapse = false;
    for (std::size_t l = 0; l < sel.size(); ++l) {
      any = any || !sel[l].empty();
      collapse = collapse || static_cast<int>(sel[l].size()) == current.layers[l].out_dim();
    }
    if (collapse) break;
    if (!any) continue;
    TrainConfig tc = cfg.retrain;
    tc.seed = derive_seed(cfg.retrain.seed, static_cast<std::uint64_t>(s));
    current = retrain(prune_neurons(current, sel).model, train_set, val_set, tc);
    res.curve.push_back(make_point(current, t, gain_of(current), cfg.retrain.seed));
    res.models.push_back(current);
  }
  return res;
}

}  // namespace chden
