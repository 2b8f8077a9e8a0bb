// SPDX-License-Identifier: Apache-2.0
#include "chden/csv.hpp"

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "chden/binary_io.hpp"

namespace chden {

namespace {

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) s.erase(0, s[0] == '-' ? 1 : 0);
  return s;
}

double to_double(const std::string& s, std::size_t line, const char* col) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw CsvError(line, std::string("bad number in column ") + col + ": '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s, std::size_t line, const char* col) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || end != s.c_str() + s.size() || errno == ERANGE)
    throw CsvError(line, std::string("bad integer in column ") + col + ": '" + s + "'");
  return v;
}

}  // namespace

std::vector<std::string> split_csv_row(const std::string& row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const char c = row[i];
    if (quoted) {
      if (c == '"' && i + 1 < row.size() && row[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw std::invalid_argument("unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

std::string join_csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") == std::string::npos) {
      out += f;
      continue;
    }
    out += '"';
    for (char c : f) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
  }
  return out;
}

std::string format_gain(double db) { return fmt_fixed(db, 6); }

const std::vector<std::string>& results_columns() {
  static const std::vector<std::string> cols = {
      "stage", "K", "submodel", "width",      "depth",  "activation",          "bits",   "pruned_pct", "seed",
      "mean_gain_db",  "macs",       "size_bytes", "size_bytes_with_metadata", "status", "lineage",
      "gain_curve_db"};
  return cols;
}

std::string results_header() { return join_csv_row(results_columns()); }

std::string format_result_row(const EvalResult& r) {
  std::string curve;
  for (std::size_t i = 0; i < r.gain_curve_db.size(); ++i) {
    if (i) curve += ';';
    curve += format_gain(r.gain_curve_db[i]);
  }
  return join_csv_row({r.stage, std::to_string(r.K), r.submodel < 0 ? std::string() : std::to_string(r.submodel),
                       std::to_string(r.width), std::to_string(r.depth),
                       std::string(to_string(r.activation)), std::to_string(r.bits), fmt_fixed(r.pruned_pct, 2),
                       std::to_string(r.seed), format_gain(r.mean_gain_db), std::to_string(r.macs),
                       std::to_string(r.size_bytes), std::to_string(r.size_bytes_with_metadata), r.status, r.lineage,
                       curve});
}

EvalResult parse_result_row(const std::string& row, std::size_t line) {
  std::vector<std::string> f;
  try {
    f = split_csv_row(row);
  } catch (const std::exception& e) {
    throw CsvError(line, e.what());
  }
  if (f.size() != results_columns().size())
    throw CsvError(line, "expected " + std::to_string(results_columns().size()) + " fields, got " +
                             std::to_string(f.size()));
  EvalResult r;
  r.stage = f[0];
  if (r.stage != "float" && r.stage != "quant" && r.stage != "prune")
    throw CsvError(line, "unknown stage '" + r.stage + "'");
  r.K = static_cast<int>(to_u64(f[1], line, "K"));
  r.submodel = f[2].empty() ? -1 : static_cast<int>(to_u64(f[2], line, "submodel"));
  r.width = static_cast<int>(to_u64(f[3], line, "width"));
  r.depth = static_cast<int>(to_u64(f[4], line, "depth"));
  try {
    r.activation = parse_activation(f[5]);
  } catch (const std::exception& e) {
    throw CsvError(line, e.what());
  }
  r.bits = static_cast<int>(to_u64(f[6], line, "bits"));
  r.pruned_pct = to_double(f[7], line, "pruned_pct");
  r.seed = to_u64(f[8], line, "seed");
  r.mean_gain_db = to_double(f[9], line, "mean_gain_db");
  r.macs = to_u64(f[10], line, "macs");
  r.size_bytes = to_u64(f[11], line, "size_bytes");
  r.size_bytes_with_metadata = to_u64(f[12], line, "size_bytes_with_metadata");
  r.status = f[13];
  r.lineage = f[14];
  if (!f[15].empty()) {
    std::stringstream ss(f[15]);
    std::string item;
    while (std::getline(ss, item, ';')) r.gain_curve_db.push_back(to_double(item, line, "gain_curve_db"));
  }
  return r;
}

void write_results_csv(std::ostream& os, const std::vector<EvalResult>& records) {
  os << "# chden-results v" << kResultsSchemaVersion << '\n' << results_header() << '\n';
  for (const auto& r : records) os << format_result_row(r) << '\n';
}

std::vector<EvalResult> read_results_csv(std::istream& is) {
  std::string row;
  std::size_t line = 0;
  bool seen_header = false;
  std::vector<EvalResult> out;
  while (std::getline(is, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    if (row[0] == '#') {
      const std::string tag = "# chden-results v";
      if (row.rfind(tag, 0) == 0 && row.substr(tag.size()) != std::to_string(kResultsSchemaVersion))
        throw CsvError(line, "unsupported schema version '" + row.substr(tag.size()) + "'");
      continue;
    }
    if (!seen_header) {
      if (row != results_header()) throw CsvError(line, "header does not match the results schema");
      seen_header = true;
      continue;
    }
    out.push_back(parse_result_row(row, line));
  }
  if (!seen_header) throw CsvError(line, "missing header");
  if (out.empty()) throw CsvError(line, "no records");
  return out;
}

void write_results_file(const std::filesystem::path& path, const std::vector<EvalResult>& records) {
  std::ostringstream os;
  write_results_csv(os, records);
  const std::string s = os.str();
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::vector<EvalResult> read_results_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_results_csv(is);
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& curve) {
  os << "pruned_pct,threshold,gain_db,macs,size_bytes,seed\n";
  for (const auto& p : curve)
    os << fmt_fixed(p.pruned_pct, 2) << ',' << fmt_fixed(p.threshold, 2) << ',' << format_gain(p.gain_db) << ','
       << p.macs << ',' << p.size_bytes << ',' << p.seed << '\n';
}

}  // namespace chden
