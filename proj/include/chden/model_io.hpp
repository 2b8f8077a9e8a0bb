// SPDX-License-Identifier: Apache-2.0
//
// Binary model file (little-endian):
//   "OCNN"                       4 bytes magic
//   version                      u16 (= 1)
//   activation                   u8 (0 tanh, 1 relu)
//   residual                     u8
//   D                            u16 number of weight layers
//   dims                         (D + 1) x u16
//   per layer l:                 dims[l+1] x dims[l] f32 weights, row-major
//                                dims[l+1] f32 biases
//   has_quant                    u8
//   if has_quant:
//     per layer, per type (weights, biases, activations):
//                                u8 Q, f32 scale, i32 zero point,
//                                f32 observed min, f32 observed max
//     per layer:                 weight codes packed at Q_w bits (row-major),
//                                padded to a byte; bias codes likewise at Q_b
//   has_provenance               u8
//   if has_provenance:           u64 seed, u32 epochs, f32 snr_min_db,
//                                f32 snr_max_db, u16 nominal width
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "chden/mlp.hpp"

namespace chden {

inline constexpr std::uint16_t kModelVersion = 1;

std::vector<std::uint8_t> encode_model(const MlpModel& model);
MlpModel decode_model(std::span<const std::uint8_t> bytes);
void write_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel read_model(const std::filesystem::path& path);

}  // namespace chden
