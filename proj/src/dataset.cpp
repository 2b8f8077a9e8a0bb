// SPDX-License-Identifier: Apache-2.0
#include "chden/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

#include "chden/binary_io.hpp"

namespace chden {

namespace io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < data.size()) {
    const std::size_t n = std::min<std::size_t>(data.size() - off, 1u << 30);
    crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace io

Eigen::VectorXf pack_complex(const Eigen::VectorXcd& z) {
  Eigen::VectorXf v(2 * z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    v[2 * i] = static_cast<float>(z[i].real());
    v[2 * i + 1] = static_cast<float>(z[i].imag());
  }
  return v;
}

Eigen::VectorXcd unpack_complex(const Eigen::Ref<const Eigen::VectorXf>& v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("unpack_complex: odd length");
  Eigen::VectorXcd z(v.size() / 2);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = {v[2 * i], v[2 * i + 1]};
  return z;
}

Eigen::VectorXf Dataset::snr() const { return noise_var.cwiseInverse(); }

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("Dataset::slice");
  Dataset out;
  out.num_subcarriers = num_subcarriers;
  out.pilot_indices = pilot_indices;
  const auto n = static_cast<Eigen::Index>(end - begin);
  const auto b = static_cast<Eigen::Index>(begin);
  out.ls = ls.middleCols(b, n);
  out.truth = truth.middleCols(b, n);
  out.noise_var = noise_var.segment(b, n);
  return out;
}

Dataset Dataset::gather(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_subcarriers = num_subcarriers;
  out.pilot_indices = pilot_indices;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.ls.resize(ls.rows(), n);
  out.truth.resize(truth.rows(), n);
  out.noise_var.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto src = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(j)]);
    out.ls.col(j) = ls.col(src);
    out.truth.col(j) = truth.col(src);
    out.noise_var[j] = noise_var[src];
  }
  return out;
}

Dataset Dataset::with_layout(const ChannelConfig& cfg, std::size_t count) {
  Dataset ds;
  ds.num_subcarriers = cfg.num_subcarriers;
  ds.pilot_indices = cfg.pilot_indices;
  const auto n = static_cast<Eigen::Index>(count);
  ds.ls.resize(2 * cfg.num_pilots(), n);
  ds.truth.resize(2 * cfg.num_pilots(), n);
  ds.noise_var.resize(n);
  return ds;
}

void Dataset::set_sample(std::size_t i, const Sample& s) {
  const auto j = static_cast<Eigen::Index>(i);
  ls.col(j) = pack_complex(s.ls_estimate);
  truth.col(j) = pack_complex(s.truth);
  noise_var[j] = static_cast<float>(s.noise_var);
}

namespace {
constexpr std::size_t kGenBlock = 512;
}

Dataset generate_dataset(const ChannelConfig& cfg, std::size_t count, double snr_min_db, double snr_max_db,
                         std::uint64_t seed) {
  cfg.validate();
  if (!std::isfinite(snr_min_db) || !std::isfinite(snr_max_db) || snr_min_db > snr_max_db)
    throw std::invalid_argument("generate_dataset: invalid SNR range");
  Dataset ds = Dataset::with_layout(cfg, count);
  const std::size_t n_blocks = (count + kGenBlock - 1) / kGenBlock;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    const std::size_t begin = static_cast<std::size_t>(b) * kGenBlock;
    const std::size_t end = std::min(count, begin + kGenBlock);
    for (std::size_t i = begin; i < end; ++i) {
      const auto ch = generate_channel(cfg, rng);
      const double snr_db = snr_min_db == snr_max_db ? snr_min_db : rng.uniform(snr_min_db, snr_max_db);
      ds.set_sample(i, make_sample(ch, cfg, snr_db, rng));
    }
  }
  return ds;
}

std::vector<Dataset> generate_grid_datasets(const ChannelConfig& cfg, std::size_t channels_per_point,
                                            std::span<const double> grid_db, std::uint64_t seed) {
  cfg.validate();
  std::vector<ChannelRealization> channels(channels_per_point);
  const std::size_t n_blocks = (channels_per_point + kGenBlock - 1) / kGenBlock;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    const std::size_t begin = static_cast<std::size_t>(b) * kGenBlock;
    const std::size_t end = std::min(channels_per_point, begin + kGenBlock);
    for (std::size_t i = begin; i < end; ++i) channels[i] = generate_channel(cfg, rng);
  }
  std::vector<Dataset> out(grid_db.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(grid_db.size()); ++g) {
    const auto gi = static_cast<std::size_t>(g);
    Rng rng(derive_seed(derive_seed(seed, 0xC0FFEEu), gi));
    Dataset ds = Dataset::with_layout(cfg, channels_per_point);
    for (std::size_t i = 0; i < channels_per_point; ++i)
      ds.set_sample(i, make_sample(channels[i], cfg, grid_db[gi], rng));
    out[gi] = std::move(ds);
  }
  return out;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  const int P = ds.num_pilots();
  if (P <= 0 || P > 0xFFFF || ds.num_subcarriers <= 0 || ds.num_subcarriers > 0xFFFF)
    throw std::invalid_argument("encode_dataset: layout does not fit the format");
  io::ByteWriter w;
  w.bytes("OCDS");
  w.u16(kDatasetVersion);
  w.u16(static_cast<std::uint16_t>(P));
  w.u64(ds.size());
  w.u16(static_cast<std::uint16_t>(ds.num_subcarriers));
  for (int p : ds.pilot_indices) w.u16(static_cast<std::uint16_t>(p));
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const auto j = static_cast<Eigen::Index>(n);
    for (int r = 0; r < 2 * P; ++r) w.f32(ds.ls(r, j));
    for (int r = 0; r < 2 * P; ++r) w.f32(ds.truth(r, j));
    w.f32(ds.noise_var[j]);
  }
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("OCDS");
  const auto version = r.u16();
  if (version != kDatasetVersion) throw io::FormatError("unsupported dataset version " + std::to_string(version));
  const int P = r.u16();
  const std::uint64_t N = r.u64();
  Dataset ds;
  ds.num_subcarriers = r.u16();
  ds.pilot_indices.resize(static_cast<std::size_t>(P));
  for (auto& p : ds.pilot_indices) p = r.u16();
  const std::uint64_t record = (4ULL * P + 1) * 4;
  if (r.remaining() != N * record) throw io::FormatError("dataset size does not match header");
  const auto n = static_cast<Eigen::Index>(N);
  ds.ls.resize(2 * P, n);
  ds.truth.resize(2 * P, n);
  ds.noise_var.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int i = 0; i < 2 * P; ++i) ds.ls(i, j) = r.f32();
    for (int i = 0; i < 2 * P; ++i) ds.truth(i, j) = r.f32();
    ds.noise_var[j] = r.f32();
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(ds));
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

Dataset concat(std::span<const Dataset> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.pilot_indices != parts.front().pilot_indices) throw std::invalid_argument("concat: layout mismatch");
    total += static_cast<Eigen::Index>(p.size());
  }
  Dataset out;
  out.num_subcarriers = parts.front().num_subcarriers;
  out.pilot_indices = parts.front().pilot_indices;
  out.ls.resize(parts.front().ls.rows(), total);
  out.truth.resize(parts.front().truth.rows(), total);
  out.noise_var.resize(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    const auto n = static_cast<Eigen::Index>(p.size());
    out.ls.middleCols(at, n) = p.ls;
    out.truth.middleCols(at, n) = p.truth;
    out.noise_var.segment(at, n) = p.noise_var;
    at += n;
  }
  return out;
}

}  // namespace chden
