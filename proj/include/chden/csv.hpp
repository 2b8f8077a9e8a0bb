// SPDX-License-Identifier: Apache-2.0
//
// Results CSV (one EvalResult per row) and prune-sweep CSV.
//
// The first line of a results file is the schema comment
//   # chden-results v1
// followed by the header row and one row per record. gain_curve_db holds the
// per-SNR gains separated by ';'. Fields containing ',' or '"' are quoted
// with '"' and embedded quotes doubled.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "chden/metrics.hpp"
#include "chden/prune.hpp"

namespace chden {

inline constexpr int kResultsSchemaVersion = 1;

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::vector<std::string> split_csv_row(const std::string& row);
std::string join_csv_row(const std::vector<std::string>& fields);

/// Fixed-precision text, so that parse + format is the identity on written files.
std::string format_gain(double db);

const std::vector<std::string>& results_columns();
std::string results_header();
std::string format_result_row(const EvalResult& r);
EvalResult parse_result_row(const std::string& row, std::size_t line);

void write_results_csv(std::ostream& os, const std::vector<EvalResult>& records);
/// Throws CsvError naming the offending line; a file without rows is an error.
std::vector<EvalResult> read_results_csv(std::istream& is);
void write_results_file(const std::filesystem::path& path, const std::vector<EvalResult>& records);
std::vector<EvalResult> read_results_file(const std::filesystem::path& path);

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& curve);

}  // namespace chden
