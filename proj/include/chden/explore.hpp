// SPDX-License-Identifier: Apache-2.0
//
// Three-stage design-space exploration: float grid, quantization-aware
// retraining of the float Pareto models, and pruning sweeps of the quantized
// Pareto models. Every stage persists its records and models, so a rerun with
// the same manifest skips finished work.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "chden/channel.hpp"
#include "chden/metrics.hpp"
#include "chden/mlp.hpp"
#include "chden/snr_scheme.hpp"
#include "chden/train.hpp"

namespace chden {

/// Configurations outside these bounds need `allow_out_of_bounds`.
inline constexpr int kMinWidth = 32;
inline constexpr int kMaxWidth = 160;
inline constexpr int kMinDepth = 2;
inline constexpr int kMaxDepth = 6;

struct GridSpec {
  std::vector<int> widths = {32, 64, 96, 128, 160};
  std::vector<int> depths = {2, 4, 5, 6};
  std::vector<Activation> activations = {Activation::tanh, Activation::relu};
  std::vector<int> bits = {8, 10, 12, 16, 32};
  std::vector<int> Ks = {1, 2, 3, 4};
  std::vector<std::uint64_t> seeds = {1};
  bool allow_out_of_bounds = false;

  /// Throws std::invalid_argument naming the offending set or value.
  void validate() const;
};

/// Architecture sets used for the sub-range models when K > 1.
struct SplitGrid {
  std::vector<int> widths;
  std::vector<int> depths;
  std::vector<Activation> activations;
};

struct DataSpec {
  std::size_t train_count = 200000;
  std::size_t val_count = 20000;
  std::size_t eval_channels = 1000;  // test channels per grid SNR
  /// Optional dataset files for the single-model (K = 1) scheme.
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> val_path;
};

struct PruneStageSpec {
  double step_pct = 1.0;
  double max_pruned_pct = 70.0;
  /// Retraining epochs per prune step as a fraction of the float epoch budget.
  double retrain_fraction = 0.25;
  double operating_point_single = 48.0;
  double operating_point_split = 20.0;
  /// Only quantized Pareto models at these bit-widths are pruned.
  std::vector<int> bits = {10};
  std::size_t apoz_samples = 10000;
};

struct ExploreManifest {
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;
  ChannelConfig channel;
  DataSpec data;
  GridSpec grid;
  std::optional<SplitGrid> split_grid;
  TrainConfig train;
  TrainConfig qat;
  PruneStageSpec prune;
  int summary_bits = 10;
  std::vector<std::string> stages = {"float", "quant", "prune"};
  int jobs = 1;

  ExploreManifest();
  void validate() const;
};

/// Parses the JSON manifest. Unknown keys are errors. Throws std::invalid_argument.
ExploreManifest parse_manifest(const std::string& json_text);
/// Channel section of a manifest (or a file holding only that object).
ChannelConfig parse_channel_config(const std::string& json_text);
ExploreManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const ExploreManifest& m);

/// Records sorted into the canonical file order.
void sort_records(std::vector<EvalResult>& records);

/// Table-II style rows: per K the best float record, the best quantized record
/// at `bits`, and the pruned operating point derived from it.
std::vector<EvalResult> summarize(const std::vector<EvalResult>& records, int bits);

/// Runs the configured stages and returns all records (also written to
/// output_dir/records.csv). Configs that fail to train are recorded with a
/// non-"ok" status. `jobs_override` > 0 replaces the manifest's job count.
std::vector<EvalResult> run_exploration(const ExploreManifest& manifest, int jobs_override = 0);

}  // namespace chden
