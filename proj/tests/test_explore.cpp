// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "chden/csv.hpp"
#include "chden/explore.hpp"

using namespace chden;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("chden_test_explore_" + name);
  fs::remove_all(p);
  return p;
}

ExploreManifest tiny(const fs::path& out) {
  ExploreManifest m;
  m.output_dir = out;
  m.data.train_count = 400;
  m.data.val_count = 100;
  m.data.eval_channels = 3;
  m.grid.widths = {32};
  m.grid.depths = {2};
  m.grid.activations = {Activation::relu};
  m.grid.bits = {8, 10};
  m.grid.Ks = {1, 2};
  m.train.max_epochs = 2;
  m.train.batch_size = 64;
  m.qat.max_epochs = 1;
  m.qat.batch_size = 64;
  m.prune.step_pct = 10.0;
  m.prune.max_pruned_pct = 30.0;
  m.prune.retrain_fraction = 0.5;
  m.prune.apoz_samples = 200;
  return m;
}

}  // namespace

TEST_CASE("grid validation") {
  GridSpec g;
  CHECK_NOTHROW(g.validate());
  g.widths = {200};
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.allow_out_of_bounds = true;
  CHECK_NOTHROW(g.validate());
  g = GridSpec{};
  g.depths = {1};
  g.allow_out_of_bounds = true;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g = GridSpec{};
  g.bits.clear();
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("manifest parsing") {
  CHECK_THROWS_AS(parse_manifest("{}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_manifest("{\"output_dir\": \"x\", \"bogus\": 1}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_manifest("{\"output_dir\": \"x\", \"grid\": {\"widths\": [8]}}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_manifest("not json"), std::invalid_argument);
  const ExploreManifest m = parse_manifest(R"({
    "output_dir": "runs/a",
    "seed": 5,
    "grid": {"widths": [64, 128], "depths": [3, 5], "activations": ["tanh"], "bits": [10], "K": [1, 4]},
    "split_grid": {"widths": [64], "depths": [3]},
    "train": {"learning_rate": 0.0005, "max_epochs": 30, "weighting": "linear"},
    "prune": {"operating_point_single": 40}
  })");
  CHECK(m.seed == 5u);
  CHECK(m.grid.widths == std::vector<int>{64, 128});
  CHECK(m.grid.activations == std::vector<Activation>{Activation::tanh});
  REQUIRE(m.split_grid.has_value());
  CHECK(m.split_grid->widths == std::vector<int>{64});
  CHECK(m.split_grid->activations == std::vector<Activation>{Activation::tanh});
  CHECK(m.train.weighting == LossWeighting::linear);
  CHECK(m.train.max_epochs == 30);
  CHECK(m.prune.operating_point_single == 40.0);
  CHECK(m.channel.num_pilots() == 24);
  const ExploreManifest r = parse_manifest(manifest_to_json(m));
  CHECK(manifest_to_json(r) == manifest_to_json(m));
}

TEST_CASE("default grid cardinality for K = 1") {
  ExploreManifest m;
  m.output_dir = scratch("cardinality");
  m.grid.Ks = {1};
  m.data.train_count = 64;
  m.data.val_count = 32;
  m.data.eval_channels = 1;
  m.train.max_epochs = 1;
  m.train.batch_size = 64;
  m.stages = {"float"};
  const auto recs = run_exploration(m);
  CHECK(recs.size() == 40u);
  for (const auto& r : recs) CHECK(r.submodel == -1);
  fs::remove_all(m.output_dir);
}

TEST_CASE("three-stage exploration, aggregation and resume") {
  const ExploreManifest m = tiny(scratch("full"));
  const auto recs = run_exploration(m);
  const fs::path dir = m.output_dir;
  for (const char* f : {"records.csv", "summary.csv", "pareto_float.csv", "pareto_quant.csv", "run.log",
                        "manifest.resolved.json"})
    CHECK(fs::exists(dir / f));

  int float_agg = 0, quant_agg = 0, prune_agg = 0;
  for (const auto& r : recs) {
    if (r.submodel >= 0) continue;
    CHECK(r.status == "ok");
    if (r.stage == "float") ++float_agg;
    if (r.stage == "quant") ++quant_agg;
    if (r.stage == "prune") ++prune_agg;
    CHECK(r.gain_curve_db.size() == 31u);
  }
  CHECK(float_agg == 2);
  CHECK(quant_agg == 4);
  CHECK(prune_agg >= 1);

  // K = 2 aggregate: worst-case MACs, summed size.
  for (const auto& agg : recs) {
    if (agg.K != 2 || agg.submodel >= 0) continue;
    std::size_t max_macs = 0, sum = 0;
    for (const auto& sub : recs)
      if (sub.K == 2 && sub.submodel >= 0 && sub.lineage == agg.lineage) {
        max_macs = std::max(max_macs, sub.macs);
        sum += sub.size_bytes;
      }
    CHECK(agg.macs == max_macs);
    CHECK(agg.size_bytes == sum);
  }

  // Interrupted run: drop everything after the float stage and resume.
  const std::string full = slurp(dir / "records.csv");
  std::vector<EvalResult> partial;
  for (const auto& r : recs)
    if (r.stage == "float") partial.push_back(r);
  write_results_file(dir / "records.csv", partial);
  run_exploration(m);
  CHECK(slurp(dir / "records.csv") == full);

  // Same manifest with two workers in a fresh directory.
  ExploreManifest m2 = m;
  m2.output_dir = scratch("jobs");
  run_exploration(m2, 2);
  std::string a = full, b = slurp(m2.output_dir / "records.csv");
  CHECK(a == b);
  fs::remove_all(dir);
  fs::remove_all(m2.output_dir);
}

TEST_CASE("summary picks best records per K") {
  std::vector<EvalResult> recs(4);
  recs[0].stage = "float";
  recs[0].mean_gain_db = 5.0;
  recs[0].lineage = "float:a";
  recs[1].stage = "float";
  recs[1].mean_gain_db = 6.0;
  recs[1].lineage = "float:b";
  recs[2].stage = "quant";
  recs[2].bits = 10;
  recs[2].mean_gain_db = 5.5;
  recs[2].lineage = "float:b>quant:Q10";
  recs[3].stage = "prune";
  recs[3].bits = 10;
  recs[3].lineage = "float:b>quant:Q10>prune";
  const auto s = summarize(recs, 10);
  REQUIRE(s.size() == 3);
  CHECK(s[0].lineage == "float:b");
  CHECK(s[1].lineage == "float:b>quant:Q10");
  CHECK(s[2].stage == "prune");
}
