// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

namespace chden {

/// K models partition [snr_min, snr_max) into equal sub-ranges of width
/// step = (snr_max - snr_min) / K; model k covers
/// [snr_min + k step, snr_min + (k + 1) step) and is trained at the midpoint.
/// snr_max itself belongs to the last model.
struct SnrScheme {
  int K = 1;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;

  struct Selection {
    int index = 0;
    bool clamped = false;  // input was outside [snr_min, snr_max]
  };

  double step() const { return (snr_max_db - snr_min_db) / K; }
  std::pair<double, double> range(int k) const { return {snr_min_db + k * step(), snr_min_db + (k + 1) * step()}; }
  double training_snr(int k) const { return snr_min_db + (k + 0.5) * step(); }
  Selection select(double snr_db) const;
  void validate() const;
};

}  // namespace chden
