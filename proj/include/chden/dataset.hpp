// SPDX-License-Identifier: Apache-2.0
//
// Sample collections and the binary dataset file.
//
// File layout (little-endian):
//   "OCDS"                     4 bytes magic
//   version                    u16 (= 1)
//   P                          u16 pilot count
//   N                          u64 sample count
//   F                          u16 subcarrier count
//   pilot indices              P x u16
//   N records of:
//     ls estimate              2P x f32, re/im interleaved
//     truth                    2P x f32, re/im interleaved
//     noise variance           f32 (linear)
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chden/channel.hpp"

namespace chden {

inline constexpr std::uint16_t kDatasetVersion = 1;

/// Complex pilot vector -> real vector [re0, im0, re1, im1, ...].
Eigen::VectorXf pack_complex(const Eigen::VectorXcd& z);
Eigen::VectorXcd unpack_complex(const Eigen::Ref<const Eigen::VectorXf>& v);

/// Column-per-sample storage; rows are the interleaved real input layout the
/// networks consume directly.
struct Dataset {
  int num_subcarriers = 0;
  std::vector<int> pilot_indices;
  Eigen::MatrixXf ls;         // 2P x N
  Eigen::MatrixXf truth;      // 2P x N
  Eigen::VectorXf noise_var;  // N

  std::size_t size() const { return static_cast<std::size_t>(ls.cols()); }
  bool empty() const { return size() == 0; }
  int num_pilots() const { return static_cast<int>(pilot_indices.size()); }
  int input_dim() const { return 2 * num_pilots(); }

  /// Linear SNR (1 / noise_var) of every sample.
  Eigen::VectorXf snr() const;

  Dataset slice(std::size_t begin, std::size_t end) const;
  Dataset gather(std::span<const std::size_t> indices) const;

  static Dataset with_layout(const ChannelConfig& cfg, std::size_t count);
  void set_sample(std::size_t i, const Sample& s);
};

/// Per-sample SNR drawn uniformly in dB on [snr_min_db, snr_max_db]; equal
/// bounds give a single-SNR dataset. Channels come from generate_channel.
/// Work is split into fixed blocks with derived seeds, so the output is
/// identical for any thread count.
Dataset generate_dataset(const ChannelConfig& cfg, std::size_t count, double snr_min_db, double snr_max_db,
                         std::uint64_t seed);

/// Same channels at every SNR of `grid_db`: one dataset per grid point.
std::vector<Dataset> generate_grid_datasets(const ChannelConfig& cfg, std::size_t channels_per_point,
                                            std::span<const double> grid_db, std::uint64_t seed);

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

/// Concatenates datasets that share a pilot layout.
Dataset concat(std::span<const Dataset> parts);

}  // namespace chden
