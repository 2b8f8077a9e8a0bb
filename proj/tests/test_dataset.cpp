// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <omp.h>

#include "doctest.h"

#include "chden/binary_io.hpp"
#include "chden/dataset.hpp"

using namespace chden;

TEST_CASE("pack / unpack complex") {
  Eigen::VectorXcd z(3);
  z << cplx(1, -2), cplx(0.5, 0.25), cplx(-3, 4);
  const Eigen::VectorXf v = pack_complex(z);
  REQUIRE(v.size() == 6);
  CHECK(v[0] == 1.0f);
  CHECK(v[1] == -2.0f);
  CHECK(v[5] == 4.0f);
  CHECK((unpack_complex(v) - z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generation is deterministic and thread-count independent") {
  const ChannelConfig cfg;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const Dataset a = generate_dataset(cfg, 1500, 0.0, 30.0, 7);
  omp_set_num_threads(3);
  const Dataset b = generate_dataset(cfg, 1500, 0.0, 30.0, 7);
  omp_set_num_threads(saved);
  CHECK(encode_dataset(a) == encode_dataset(b));
  const Dataset c = generate_dataset(cfg, 1500, 0.0, 30.0, 8);
  CHECK(encode_dataset(a) != encode_dataset(c));
}

TEST_CASE("per-sample SNR is uniform in dB") {
  const ChannelConfig cfg;
  const std::size_t n = 20000;
  const Dataset ds = generate_dataset(cfg, n, 0.0, 30.0, 1);
  std::vector<int> hist(10, 0);
  for (Eigen::Index i = 0; i < ds.noise_var.size(); ++i) {
    const double s = -10.0 * std::log10(static_cast<double>(ds.noise_var[i]));
    REQUIRE(s >= -1e-4);
    REQUIRE(s <= 30.0 + 1e-4);
    ++hist[static_cast<std::size_t>(std::min(9, static_cast<int>(s / 3.0)))];
  }
  // Binomial(n, 0.1) per bin.
  const double sd = std::sqrt(n * 0.1 * 0.9);
  for (int h : hist) CHECK(std::abs(h - n * 0.1) < 5.0 * sd);
}

TEST_CASE("equal bounds give a single SNR") {
  const Dataset ds = generate_dataset(ChannelConfig{}, 100, 11.25, 11.25, 3);
  const float nv = static_cast<float>(db_to_noise_var(11.25));
  for (Eigen::Index i = 0; i < ds.noise_var.size(); ++i) CHECK(ds.noise_var[i] == nv);
  CHECK_THROWS_AS(generate_dataset(ChannelConfig{}, 10, 5.0, 1.0, 3), std::invalid_argument);
}

TEST_CASE("grid datasets share channels across SNR points") {
  const ChannelConfig cfg;
  const std::vector<double> grid{0.0, 30.0};
  const auto sets = generate_grid_datasets(cfg, 20, grid, 4);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].truth == sets[1].truth);
  CHECK(sets[0].ls != sets[1].ls);
}

TEST_CASE("binary round trip") {
  const Dataset a = generate_dataset(ChannelConfig{}, 37, 0.0, 30.0, 9);
  const auto bytes = encode_dataset(a);
  CHECK(bytes.size() == 4 + 2 + 2 + 8 + 2 + 24 * 2 + 37 * (48 * 2 + 1) * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "OCDS");
  const Dataset b = decode_dataset(bytes);
  CHECK(b.ls == a.ls);
  CHECK(b.truth == a.truth);
  CHECK(b.noise_var == a.noise_var);
  CHECK(b.pilot_indices == a.pilot_indices);
  CHECK(b.num_subcarriers == 96);
  CHECK(encode_dataset(b) == bytes);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_dataset(bad), io::FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_dataset(truncated), io::FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode_dataset(version), io::FormatError);
}

TEST_CASE("slice, gather and concat") {
  const Dataset a = generate_dataset(ChannelConfig{}, 10, 0.0, 30.0, 2);
  const Dataset s = a.slice(2, 5);
  REQUIRE(s.size() == 3);
  CHECK(s.ls.col(0) == a.ls.col(2));
  const std::vector<std::size_t> idx{9, 0};
  const Dataset g = a.gather(idx);
  CHECK(g.ls.col(0) == a.ls.col(9));
  const std::vector<Dataset> parts{a.slice(0, 4), a.slice(4, 10)};
  CHECK(encode_dataset(concat(parts)) == encode_dataset(a));
  CHECK_THROWS_AS(a.slice(5, 11), std::out_of_range);
}

TEST_CASE("crc32 matches the standard check value") {
  const std::string s = "123456789";
  CHECK(io::crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == 0xCBF43926u);
}
