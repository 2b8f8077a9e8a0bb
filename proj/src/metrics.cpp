// SPDX-License-Identifier: Apache-2.0
#include "chden/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace chden {

namespace {

Gain gain_from_errors(double ls_err, double est_err) {
  if (!(ls_err > 0.0)) throw std::invalid_argument("denoising_gain_db: LS estimate equals the truth");
  if (est_err <= 0.0) return {kGainSaturationDb, true};
  const double g = 10.0 * std::log10(ls_err / est_err);
  if (g >= kGainSaturationDb) return {kGainSaturationDb, true};
  return {g, false};
}

}  // namespace

Gain denoising_gain_db(const Eigen::VectorXcd& estimate, const Eigen::VectorXcd& ls, const Eigen::VectorXcd& truth) {
  if (estimate.size() != truth.size() || ls.size() != truth.size())
    throw std::invalid_argument("denoising_gain_db: length mismatch");
  return gain_from_errors((ls - truth).squaredNorm(), (estimate - truth).squaredNorm());
}

Gain denoising_gain_db_packed(const Eigen::Ref<const Eigen::VectorXf>& estimate, const Eigen::Ref<const Eigen::VectorXf>& ls,
                       const Eigen::Ref<const Eigen::VectorXf>& truth) {
  if (estimate.size() != truth.size() || ls.size() != truth.size())
    throw std::invalid_argument("denoising_gain_db: length mismatch");
  double ls_err = 0.0, est_err = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double a = static_cast<double>(ls[i]) - truth[i];
    const double b = static_cast<double>(estimate[i]) - truth[i];
    ls_err += a * a;
    est_err += b * b;
  }
  return gain_from_errors(ls_err, est_err);
}

std::size_t mac_count(std::span<const int> dims) {
  std::size_t macs = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto in = static_cast<std::size_t>(dims[l]);
    const auto out = static_cast<std::size_t>(dims[l + 1]);
    macs += in * out + out;
  }
  return macs;
}

std::size_t mac_count(const MlpModel& model) {
  const auto d = model.dims();
  return mac_count(d);
}

std::size_t float_model_size_bytes(const MlpModel& model) { return model.parameter_count() * 4; }

std::vector<std::size_t> pareto_front_indices(std::span<const double> sizes, std::span<const double> gains) {
  if (sizes.size() != gains.size()) throw std::invalid_argument("pareto_front: size/gain length mismatch");
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sizes[a] != sizes[b]) return sizes[a] < sizes[b];
    return gains[a] > gains[b];
  });
  std::vector<std::size_t> front;
  double best_smaller = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    // Group of equal size; only its top gain can survive, and only if it beats
    // every strictly smaller record.
    std::size_t j = i;
    while (j < order.size() && sizes[order[j]] == sizes[order[i]]) ++j;
    const double top = gains[order[i]];
    if (top > best_smaller) {
      std::vector<std::size_t> group;
      for (std::size_t k = i; k < j && gains[order[k]] == top; ++k) group.push_back(order[k]);
      std::sort(group.begin(), group.end());
      front.insert(front.end(), group.begin(), group.end());
      best_smaller = top;
    }
    i = j;
  }
  return front;
}

std::vector<EvalResult> pareto_front(std::span<const EvalResult> records) {
  std::vector<double> sizes, gains;
  for (const auto& r : records) {
    sizes.push_back(static_cast<double>(r.size_bytes));
    gains.push_back(r.mean_gain_db);
  }
  std::vector<EvalResult> out;
  for (auto idx : pareto_front_indices(sizes, gains)) out.push_back(records[idx]);
  return out;
}

}  // namespace chden
