// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include "doctest.h"

#include "chden/csv.hpp"

using namespace chden;

namespace {

EvalResult sample_record() {
  EvalResult r;
  r.stage = "quant";
  r.K = 4;
  r.submodel = 2;
  r.width = 64;
  r.depth = 3;
  r.activation = Activation::tanh;
  r.bits = 10;
  r.pruned_pct = 12.5;
  r.seed = 17;
  r.mean_gain_db = 6.123456;
  r.gain_curve_db = {1.5, -0.25};
  r.macs = 10416;
  r.size_bytes = 13056;
  r.size_bytes_with_metadata = 13101;
  r.lineage = "float:K4-W64-D3-tanh-s17>quant:Q10";
  return r;
}

}  // namespace

TEST_CASE("row split and join") {
  CHECK(split_csv_row("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv_row("\"x,y\",\"he said \"\"hi\"\"\"") == std::vector<std::string>{"x,y", "he said \"hi\""});
  CHECK(join_csv_row({"x,y", "q\"", "plain"}) == "\"x,y\",\"q\"\"\",plain");
  CHECK_THROWS(split_csv_row("\"open"));
}

TEST_CASE("results round trip") {
  std::vector<EvalResult> recs{sample_record(), sample_record()};
  recs[1].submodel = -1;
  recs[1].status = "diverged@3";
  recs[1].gain_curve_db.clear();
  std::stringstream ss;
  write_results_csv(ss, recs);
  const std::string text = ss.str();
  CHECK(text.rfind("# chden-results v1\n", 0) == 0);
  std::stringstream in(text);
  const auto back = read_results_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].lineage == recs[0].lineage);
  CHECK(back[0].activation == Activation::tanh);
  CHECK(back[0].submodel == 2);
  CHECK(back[1].submodel == -1);
  CHECK(back[0].gain_curve_db == std::vector<double>{1.5, -0.25});
  CHECK(back[1].status == "diverged@3");
  std::stringstream again;
  write_results_csv(again, back);
  CHECK(again.str() == text);
}

TEST_CASE("malformed files name the line") {
  std::stringstream ss;
  write_results_csv(ss, {sample_record()});
  std::string text = ss.str() + "quant,1,,64\n";
  std::stringstream bad(text);
  try {
    read_results_csv(bad);
    FAIL("expected CsvError");
  } catch (const CsvError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::stringstream header_only("# chden-results v1\n" + results_header() + "\n");
  CHECK_THROWS_AS(read_results_csv(header_only), CsvError);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_results_csv(empty), CsvError);
  std::stringstream future("# chden-results v9\n" + results_header() + "\n");
  CHECK_THROWS_AS(read_results_csv(future), CsvError);
  std::string nan_row = format_result_row(sample_record());
  nan_row.replace(nan_row.find("6.123456"), 8, "abc");
  std::stringstream bad_num("# chden-results v1\n" + results_header() + "\n" + nan_row + "\n");
  CHECK_THROWS_AS(read_results_csv(bad_num), CsvError);
}

TEST_CASE("sweep csv") {
  std::stringstream ss;
  write_sweep_csv(ss, {{0.0, 1.01, 7.5, 10416, 13056, 1}, {12.5, 0.97, 7.25, 9000, 11000, 1}});
  CHECK(ss.str() ==
        "pruned_pct,threshold,gain_db,macs,size_bytes,seed\n0.00,1.01,7.500000,10416,13056,1\n"
        "12.50,0.97,7.250000,9000,11000,1\n");
}
