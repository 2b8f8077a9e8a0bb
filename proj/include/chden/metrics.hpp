// SPDX-License-Identifier: Apache-2.0
//
// Denoising gain, MAC / size accounting, and Pareto extraction.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chden/mlp.hpp"

namespace chden {

/// Gains above this are reported as saturated (estimate equals truth).
inline constexpr double kGainSaturationDb = 200.0;

struct Gain {
  double db = 0.0;
  bool saturated = false;
};

/// G = 10 log10(||ls - h||^2 / ||est - h||^2); positive means the estimate is
/// closer to the truth than LS. Requires ||ls - h|| > 0.
Gain denoising_gain_db(const Eigen::VectorXcd& estimate, const Eigen::VectorXcd& ls, const Eigen::VectorXcd& truth);
/// Same on packed real vectors (any consistent real layout).
Gain denoising_gain_db_packed(const Eigen::Ref<const Eigen::VectorXf>& estimate, const Eigen::Ref<const Eigen::VectorXf>& ls,
                       const Eigen::Ref<const Eigen::VectorXf>& truth);

/// Sum over weight layers of in * out + out (bias additions count as MACs).
std::size_t mac_count(std::span<const int> dims);
std::size_t mac_count(const MlpModel& model);

inline constexpr double kBytesPerKB = 1000.0;

/// Storage of the parameters of a float32 model.
std::size_t float_model_size_bytes(const MlpModel& model);

/// One evaluated configuration.
struct EvalResult {
  std::string stage;  // float | quant | prune
  int K = 1;
  int submodel = -1;  // sub-range model index for K > 1, -1 for the whole scheme
  int width = 0;
  int depth = 0;
  Activation activation = Activation::relu;
  int bits = 32;
  double pruned_pct = 0.0;
  std::uint64_t seed = 0;
  double mean_gain_db = 0.0;
  std::vector<double> gain_curve_db;
  std::size_t macs = 0;
  std::size_t size_bytes = 0;
  std::size_t size_bytes_with_metadata = 0;
  std::string status = "ok";
  std::string lineage;
};

/// Indices of the records not dominated on (size ascending, gain descending).
/// A record dominates another if it is no larger, has no less gain, and is
/// strictly better in one of them. Output is ordered by size, ties by index.
std::vector<std::size_t> pareto_front_indices(std::span<const double> sizes, std::span<const double> gains);
std::vector<EvalResult> pareto_front(std::span<const EvalResult> records);

}  // namespace chden
