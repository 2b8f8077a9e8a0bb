// SPDX-License-Identifier: Apache-2.0
#include "chden/explore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <omp.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include "chden/csv.hpp"
#include "chden/dataset.hpp"
#include "chden/evaluate.hpp"
#include "chden/model_io.hpp"
#include "chden/prune.hpp"
#include "chden/quant.hpp"

namespace chden {

using nlohmann::json;

namespace {

void check_set_nonempty(bool empty, const char* name) {
  if (empty) throw std::invalid_argument(std::string("grid: '") + name + "' must not be empty");
}

}  // namespace

void GridSpec::validate() const {
  check_set_nonempty(widths.empty(), "widths");
  check_set_nonempty(depths.empty(), "depths");
  check_set_nonempty(activations.empty(), "activations");
  check_set_nonempty(bits.empty(), "bits");
  check_set_nonempty(Ks.empty(), "K");
  check_set_nonempty(seeds.empty(), "seeds");
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("grid: width must be >= 1");
    if (!allow_out_of_bounds && (w < kMinWidth || w > kMaxWidth))
      throw std::invalid_argument("grid: width " + std::to_string(w) + " outside [" + std::to_string(kMinWidth) +
                                  ", " + std::to_string(kMaxWidth) + "] (set allow_out_of_bounds to override)");
  }
  for (int d : depths) {
    if (d < 2) throw std::invalid_argument("grid: depth must be >= 2");
    if (!allow_out_of_bounds && (d < kMinDepth || d > kMaxDepth))
      throw std::invalid_argument("grid: depth " + std::to_string(d) + " outside [" + std::to_string(kMinDepth) +
                                  ", " + std::to_string(kMaxDepth) + "] (set allow_out_of_bounds to override)");
  }
  for (int q : bits)
    if (q < 2 || q > 32) throw std::invalid_argument("grid: bit-width " + std::to_string(q) + " outside [2, 32]");
  for (int k : Ks)
    if (k < 1) throw std::invalid_argument("grid: K must be >= 1");
}

ExploreManifest::ExploreManifest() {
  qat.learning_rate = 1e-4;
  qat.max_epochs = 50;
  qat.patience = 10;
}

void ExploreManifest::validate() const {
  if (output_dir.empty()) throw std::invalid_argument("manifest: output_dir is required");
  if (!(snr_min_db < snr_max_db)) throw std::invalid_argument("manifest: snr_min_db must be < snr_max_db");
  channel.validate();
  grid.validate();
  if (split_grid) {
    GridSpec g = grid;
    g.widths = split_grid->widths;
    g.depths = split_grid->depths;
    g.activations = split_grid->activations;
    g.validate();
  }
  train.validate();
  qat.validate();
  if (data.train_count == 0 || data.val_count == 0 || data.eval_channels == 0)
    throw std::invalid_argument("manifest: dataset sizes must be > 0");
  if (!(prune.step_pct > 0.0 && prune.step_pct <= 100.0)) throw std::invalid_argument("manifest: bad prune step");
  if (!(prune.retrain_fraction >= 0.0)) throw std::invalid_argument("manifest: bad prune retrain_fraction");
  if (jobs < 1) throw std::invalid_argument("manifest: jobs must be >= 1");
  for (const auto& s : stages)
    if (s != "float" && s != "quant" && s != "prune") throw std::invalid_argument("manifest: unknown stage '" + s + "'");
}

// ---------------------------------------------------------------------------
// Manifest JSON

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("manifest: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }))
      throw std::invalid_argument("manifest: unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<Activation> parse_activations(const json& j) {
  std::vector<Activation> out;
  for (const auto& a : j) out.push_back(parse_activation(a.get<std::string>()));
  return out;
}

json activations_json(const std::vector<Activation>& acts) {
  json a = json::array();
  for (auto x : acts) a.push_back(std::string(to_string(x)));
  return a;
}

void parse_train(const json& j, TrainConfig& tc, const std::string& where) {
  reject_unknown(j, {"learning_rate", "batch_size", "max_epochs", "patience", "lr_decay", "weighting", "beta1", "beta2",
                     "epsilon"},
                 where);
  get_if(j, "learning_rate", tc.learning_rate);
  get_if(j, "batch_size", tc.batch_size);
  get_if(j, "max_epochs", tc.max_epochs);
  get_if(j, "patience", tc.patience);
  get_if(j, "lr_decay", tc.lr_decay);
  get_if(j, "beta1", tc.beta1);
  get_if(j, "beta2", tc.beta2);
  get_if(j, "epsilon", tc.epsilon);
  if (j.contains("weighting")) tc.weighting = parse_loss_weighting(j.at("weighting").get<std::string>());
}

json train_json(const TrainConfig& tc) {
  return {{"learning_rate", tc.learning_rate}, {"batch_size", tc.batch_size}, {"max_epochs", tc.max_epochs},
          {"patience", tc.patience},           {"lr_decay", tc.lr_decay},     {"weighting", std::string(to_string(tc.weighting))},
          {"beta1", tc.beta1},                 {"beta2", tc.beta2},           {"epsilon", tc.epsilon}};
}

ChannelConfig channel_from_json(const json& c) {
  ChannelConfig ch;
  reject_unknown(c, {"num_subcarriers", "pilot_spacing", "subcarrier_spacing_hz", "max_paths", "gain_db",
                     "delay_spread_ns"},
                 "channel");
  get_if(c, "num_subcarriers", ch.num_subcarriers);
  int spacing = 4;
  get_if(c, "pilot_spacing", spacing);
  if (spacing < 1) throw std::invalid_argument("manifest: pilot_spacing must be >= 1");
  ch.pilot_indices = ChannelConfig::comb(ch.num_subcarriers, spacing);
  get_if(c, "subcarrier_spacing_hz", ch.subcarrier_spacing_hz);
  get_if(c, "max_paths", ch.max_paths);
  if (c.contains("gain_db")) {
    const auto g = c.at("gain_db").get<std::vector<double>>();
    if (g.size() != 2) throw std::invalid_argument("manifest: channel.gain_db must be [min, max]");
    ch.gain_min_db = g[0];
    ch.gain_max_db = g[1];
  }
  if (c.contains("delay_spread_ns")) {
    const auto d = c.at("delay_spread_ns").get<std::vector<double>>();
    if (d.size() != 2) throw std::invalid_argument("manifest: channel.delay_spread_ns must be [min, max]");
    ch.delay_spread_min_ns = d[0];
    ch.delay_spread_max_ns = d[1];
  }
  return ch;
}

}  // namespace

ExploreManifest parse_manifest(const std::string& json_text) {
  ExploreManifest m;
  try {
    const json j = json::parse(json_text);
    reject_unknown(j,
                   {"output_dir", "seed", "snr_min_db", "snr_max_db", "channel", "data", "grid", "split_grid", "train",
                    "qat", "prune", "summary_bits", "stages", "jobs"},
                   "manifest");
    if (!j.contains("output_dir")) throw std::invalid_argument("manifest: output_dir is required");
    m.output_dir = j.at("output_dir").get<std::string>();
    get_if(j, "seed", m.seed);
    get_if(j, "snr_min_db", m.snr_min_db);
    get_if(j, "snr_max_db", m.snr_max_db);
    get_if(j, "summary_bits", m.summary_bits);
    get_if(j, "stages", m.stages);
    get_if(j, "jobs", m.jobs);
    if (j.contains("channel")) m.channel = channel_from_json(j.at("channel"));
    if (j.contains("data")) {
      const json& d = j.at("data");
      reject_unknown(d, {"train_count", "val_count", "eval_channels", "train_path", "val_path"}, "data");
      get_if(d, "train_count", m.data.train_count);
      get_if(d, "val_count", m.data.val_count);
      get_if(d, "eval_channels", m.data.eval_channels);
      if (d.contains("train_path")) m.data.train_path = d.at("train_path").get<std::string>();
      if (d.contains("val_path")) m.data.val_path = d.at("val_path").get<std::string>();
      if (m.data.train_path.has_value() != m.data.val_path.has_value())
        throw std::invalid_argument("manifest: data.train_path and data.val_path must be given together");
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      reject_unknown(g, {"widths", "depths", "activations", "bits", "K", "seeds", "allow_out_of_bounds"}, "grid");
      get_if(g, "widths", m.grid.widths);
      get_if(g, "depths", m.grid.depths);
      if (g.contains("activations")) m.grid.activations = parse_activations(g.at("activations"));
      get_if(g, "bits", m.grid.bits);
      get_if(g, "K", m.grid.Ks);
      get_if(g, "seeds", m.grid.seeds);
      get_if(g, "allow_out_of_bounds", m.grid.allow_out_of_bounds);
    }
    if (j.contains("split_grid")) {
      const json& g = j.at("split_grid");
      reject_unknown(g, {"widths", "depths", "activations"}, "split_grid");
      SplitGrid s{m.grid.widths, m.grid.depths, m.grid.activations};
      get_if(g, "widths", s.widths);
      get_if(g, "depths", s.depths);
      if (g.contains("activations")) s.activations = parse_activations(g.at("activations"));
      m.split_grid = s;
    }
    if (j.contains("train")) parse_train(j.at("train"), m.train, "train");
    if (j.contains("qat")) parse_train(j.at("qat"), m.qat, "qat");
    if (j.contains("prune")) {
      const json& p = j.at("prune");
      reject_unknown(p, {"step_pct", "max_pruned_pct", "retrain_fraction", "operating_point_single",
                         "operating_point_split", "bits", "apoz_samples"},
                     "prune");
      get_if(p, "step_pct", m.prune.step_pct);
      get_if(p, "max_pruned_pct", m.prune.max_pruned_pct);
      get_if(p, "retrain_fraction", m.prune.retrain_fraction);
      get_if(p, "operating_point_single", m.prune.operating_point_single);
      get_if(p, "operating_point_split", m.prune.operating_point_split);
      get_if(p, "bits", m.prune.bits);
      get_if(p, "apoz_samples", m.prune.apoz_samples);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

ChannelConfig parse_channel_config(const std::string& json_text) {
  ChannelConfig ch;
  try {
    const json j = json::parse(json_text);
    ch = channel_from_json(j.contains("channel") ? j.at("channel") : j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("channel config: ") + e.what());
  }
  ch.validate();
  return ch;
}

ExploreManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_manifest(ss.str());
}

std::string manifest_to_json(const ExploreManifest& m) {
  const int spacing = m.channel.pilot_indices.size() > 1 ? m.channel.pilot_indices[1] - m.channel.pilot_indices[0] : 1;
  json j = {
      {"output_dir", m.output_dir.string()},
      {"seed", m.seed},
      {"snr_min_db", m.snr_min_db},
      {"snr_max_db", m.snr_max_db},
      {"channel",
       {{"num_subcarriers", m.channel.num_subcarriers},
        {"pilot_spacing", spacing},
        {"subcarrier_spacing_hz", m.channel.subcarrier_spacing_hz},
        {"max_paths", m.channel.max_paths},
        {"gain_db", {m.channel.gain_min_db, m.channel.gain_max_db}},
        {"delay_spread_ns", {m.channel.delay_spread_min_ns, m.channel.delay_spread_max_ns}}}},
      {"data",
       {{"train_count", m.data.train_count}, {"val_count", m.data.val_count}, {"eval_channels", m.data.eval_channels}}},
      {"grid",
       {{"widths", m.grid.widths},
        {"depths", m.grid.depths},
        {"activations", activations_json(m.grid.activations)},
        {"bits", m.grid.bits},
        {"K", m.grid.Ks},
        {"seeds", m.grid.seeds},
        {"allow_out_of_bounds", m.grid.allow_out_of_bounds}}},
      {"train", train_json(m.train)},
      {"qat", train_json(m.qat)},
      {"prune",
       {{"step_pct", m.prune.step_pct},
        {"max_pruned_pct", m.prune.max_pruned_pct},
        {"retrain_fraction", m.prune.retrain_fraction},
        {"operating_point_single", m.prune.operating_point_single},
        {"operating_point_split", m.prune.operating_point_split},
        {"bits", m.prune.bits},
        {"apoz_samples", m.prune.apoz_samples}}},
      {"summary_bits", m.summary_bits},
      {"stages", m.stages},
      {"jobs", m.jobs},
  };
  if (m.data.train_path) j["data"]["train_path"] = m.data.train_path->string();
  if (m.data.val_path) j["data"]["val_path"] = m.data.val_path->string();
  if (m.split_grid)
    j["split_grid"] = {{"widths", m.split_grid->widths},
                       {"depths", m.split_grid->depths},
                       {"activations", activations_json(m.split_grid->activations)}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Records

namespace {

int stage_rank(const std::string& s) { return s == "float" ? 0 : s == "quant" ? 1 : 2; }

bool is_aggregate_ok(const EvalResult& r, const std::string& stage, int K) {
  return r.stage == stage && r.K == K && r.submodel < 0 && r.status == "ok";
}

}  // namespace

void sort_records(std::vector<EvalResult>& records) {
  std::stable_sort(records.begin(), records.end(), [](const EvalResult& a, const EvalResult& b) {
    return std::make_tuple(stage_rank(a.stage), a.K, a.lineage, a.submodel, a.pruned_pct) <
           std::make_tuple(stage_rank(b.stage), b.K, b.lineage, b.submodel, b.pruned_pct);
  });
}

std::vector<EvalResult> summarize(const std::vector<EvalResult>& records, int bits) {
  std::set<int> Ks;
  for (const auto& r : records) Ks.insert(r.K);
  std::vector<EvalResult> out;
  auto best_of = [&](auto pred) -> const EvalResult* {
    const EvalResult* best = nullptr;
    for (const auto& r : records)
      if (pred(r) && (!best || r.mean_gain_db > best->mean_gain_db)) best = &r;
    return best;
  };
  for (int K : Ks) {
    if (const auto* f = best_of([&](const EvalResult& r) { return is_aggregate_ok(r, "float", K); })) out.push_back(*f);
    const auto* q = best_of([&](const EvalResult& r) { return is_aggregate_ok(r, "quant", K) && r.bits == bits; });
    if (!q) continue;
    out.push_back(*q);
    if (const auto* p = best_of([&](const EvalResult& r) {
          return is_aggregate_ok(r, "prune", K) && r.lineage.rfind(q->lineage + ">", 0) == 0;
        }))
      out.push_back(*p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

struct Arch {
  int width;
  int depth;
  Activation act;
};

std::string arch_key(int K, const Arch& a, std::uint64_t seed) {
  return "K" + std::to_string(K) + "-W" + std::to_string(a.width) + "-D" + std::to_string(a.depth) + "-" +
         std::string(to_string(a.act)) + "-s" + std::to_string(seed);
}

std::string file_safe(std::string s) {
  for (auto& c : s)
    if (c == ':' || c == '>' || c == '=') c = '_';
  return s;
}

std::string format_pct(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p);
  return buf;
}

class Explorer {
 public:
  Explorer(const ExploreManifest& m, int jobs) : m_(m), jobs_(jobs) {}

  std::vector<EvalResult> run() {
    namespace fs = std::filesystem;
    fs::create_directories(m_.output_dir / "models");
    fs::create_directories(m_.output_dir / "sweeps");
    open_log();
    {
      std::ofstream os(m_.output_dir / "manifest.resolved.json");
      os << manifest_to_json(m_);
    }
    const fs::path rec_path = m_.output_dir / "records.csv";
    if (fs::exists(rec_path)) {
      records_ = read_results_file(rec_path);
      log_->info("resuming: {} records already present", records_.size());
    }
    prepare_data();

    const auto has_stage = [&](const char* s) { return std::find(m_.stages.begin(), m_.stages.end(), s) != m_.stages.end(); };
    if (has_stage("float")) stage_float();
    if (has_stage("quant")) stage_quant();
    if (has_stage("prune")) stage_prune();

    flush();
    write_pareto_files();
    write_results_file(m_.output_dir / "summary.csv", summarize(records_, m_.summary_bits));
    log_->info("done: {} records", records_.size());
    log_->flush();
    return records_;
  }

 private:
  const ExploreManifest& m_;
  int jobs_;
  std::shared_ptr<spdlog::logger> log_;
  std::mutex sink_mutex_;
  std::vector<EvalResult> records_;
  EvalSet eval_;
  std::map<std::pair<int, int>, Dataset> train_sets_;  // (K, k)
  std::map<std::pair<int, int>, Dataset> val_sets_;

  void open_log() {
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>((m_.output_dir / "run.log").string());
    auto err = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    err->set_level(spdlog::level::info);
    log_ = std::make_shared<spdlog::logger>("explore", spdlog::sinks_init_list{file, err});
    log_->set_level(spdlog::level::debug);
    log_->flush_on(spdlog::level::info);
  }

  SnrScheme scheme(int K) const { return SnrScheme{K, m_.snr_min_db, m_.snr_max_db}; }

  void prepare_data() {
    std::vector<double> grid;
    for (double s : default_snr_grid())
      if (s >= m_.snr_min_db && s <= m_.snr_max_db) grid.push_back(s);
    eval_ = make_eval_set(m_.channel, m_.data.eval_channels, grid, derive_seed(m_.seed, 0xE7A1));
    for (int K : m_.grid.Ks) {
      const SnrScheme sc = scheme(K);
      for (int k = 0; k < K; ++k) {
        const auto key = std::make_pair(K, k);
        if (K == 1 && m_.data.train_path) {
          train_sets_[key] = read_dataset(*m_.data.train_path);
          val_sets_[key] = read_dataset(*m_.data.val_path);
          continue;
        }
        const double lo = K == 1 ? m_.snr_min_db : sc.training_snr(k);
        const double hi = K == 1 ? m_.snr_max_db : sc.training_snr(k);
        const std::uint64_t base = derive_seed(m_.seed, static_cast<std::uint64_t>(K) * 1000 + static_cast<std::uint64_t>(k));
        train_sets_[key] = generate_dataset(m_.channel, m_.data.train_count, lo, hi, derive_seed(base, 1));
        val_sets_[key] = generate_dataset(m_.channel, m_.data.val_count, lo, hi, derive_seed(base, 2));
      }
    }
    log_->info("datasets ready: {} eval grid points x {} channels", eval_.grid_db.size(), m_.data.eval_channels);
  }

  EvalSet eval_for(int K, int k) const {
    if (K == 1) return eval_;
    const auto [lo, hi] = scheme(K).range(k);
    return eval_.restrict_to(lo, hi, k == K - 1);
  }

  std::filesystem::path model_path(const std::string& lineage, int k) const {
    return m_.output_dir / "models" / (file_safe(lineage) + "-k" + std::to_string(k) + ".ocnn");
  }

  bool done(const std::string& lineage) {
    std::lock_guard lock(sink_mutex_);
    return std::any_of(records_.begin(), records_.end(),
                       [&](const EvalResult& r) { return r.lineage == lineage && r.submodel < 0; });
  }

  void sink(std::vector<EvalResult> recs) {
    std::lock_guard lock(sink_mutex_);
    for (auto& r : recs) records_.push_back(std::move(r));
    sort_records(records_);
    write_results_file(m_.output_dir / "records.csv", records_);
  }

  void flush() {
    std::lock_guard lock(sink_mutex_);
    sort_records(records_);
    if (!records_.empty()) write_results_file(m_.output_dir / "records.csv", records_);
  }

  std::vector<EvalResult> snapshot() {
    std::lock_guard lock(sink_mutex_);
    return records_;
  }

  void run_jobs(std::vector<std::function<void()>>& jobs) {
    if (jobs_ <= 1 || jobs.size() <= 1) {
      for (auto& j : jobs) j();
      return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    const int n = std::min<int>(jobs_, static_cast<int>(jobs.size()));
    for (int t = 0; t < n; ++t)
      pool.emplace_back([&] {
        omp_set_num_threads(1);
        for (std::size_t i = next++; i < jobs.size(); i = next++) jobs[i]();
      });
  }

  EvalResult base_record(const std::string& stage, int K, const Arch& a, std::uint64_t seed,
                         const std::string& lineage) const {
    EvalResult r;
    r.stage = stage;
    r.K = K;
    r.width = a.width;
    r.depth = a.depth;
    r.activation = a.act;
    r.seed = seed;
    r.lineage = lineage;
    return r;
  }

  void fill_eval(EvalResult& r, const std::vector<MlpModel>& models, int K, int k) const {
    GainCurve c = k < 0 ? evaluate_gain(eval_, nn_denoiser(models, scheme(K)))
                        : evaluate_gain(eval_for(K, k), single_nn_denoiser(models[static_cast<std::size_t>(k)]));
    r.mean_gain_db = c.mean_db;
    r.gain_curve_db = std::move(c.gain_db);
    std::size_t macs = 0, size = 0, size_meta = 0;
    int hidden = 0, nominal = 0;
    for (std::size_t i = 0; i < models.size(); ++i) {
      if (k >= 0 && static_cast<int>(i) != k) continue;
      const MlpModel& mm = models[i];
      macs = std::max(macs, mac_count(mm));
      if (mm.quant) {
        const ModelSize s = quantized_model_size(mm, *mm.quant);
        size += s.with_scales();
        size_meta += s.with_full_metadata();
      } else {
        size += float_model_size_bytes(mm);
        size_meta += float_model_size_bytes(mm);
      }
      hidden += hidden_neuron_count(mm);
      nominal += mm.config.width * (mm.depth() - 1);
    }
    r.macs = macs;
    r.size_bytes = size;
    r.size_bytes_with_metadata = size_meta;
    r.pruned_pct = nominal > 0 ? 100.0 * (1.0 - static_cast<double>(hidden) / nominal) : 0.0;
    // Stored with two decimals; keep the in-memory value identical to a reread one.
    r.pruned_pct = std::stod(format_pct(r.pruned_pct));
    r.mean_gain_db = std::stod(format_gain(r.mean_gain_db));
    for (auto& g : r.gain_curve_db) g = std::stod(format_gain(g));
  }

  std::vector<Arch> archs_for(int K) const {
    const bool split = K > 1 && m_.split_grid;
    const auto& W = split ? m_.split_grid->widths : m_.grid.widths;
    const auto& D = split ? m_.split_grid->depths : m_.grid.depths;
    const auto& A = split ? m_.split_grid->activations : m_.grid.activations;
    std::vector<Arch> out;
    for (int w : W)
      for (int d : D)
        for (Activation a : A) out.push_back({w, d, a});
    return out;
  }

  std::vector<MlpModel> load_models(const std::string& lineage, int K) const {
    std::vector<MlpModel> out;
    for (int k = 0; k < K; ++k) out.push_back(read_model(model_path(lineage, k)));
    return out;
  }

  std::vector<EvalResult> records_of(const std::vector<MlpModel>& models, const std::string& stage, int K,
                                     const Arch& a, std::uint64_t seed, const std::string& lineage, int bits) const {
    std::vector<EvalResult> out;
    // Aggregate first; a single model has no separate submodel record.
    for (int k = -1; k < (K > 1 ? K : 0); ++k) {
      EvalResult r = base_record(stage, K, a, seed, lineage);
      r.submodel = k;
      r.bits = bits;
      fill_eval(r, models, K, k);
      out.push_back(std::move(r));
    }
    return out;
  }

  void stage_float() {
    std::vector<std::function<void()>> jobs;
    for (int K : m_.grid.Ks)
      for (const Arch& a : archs_for(K))
        for (std::uint64_t seed : m_.grid.seeds) {
          const std::string lineage = "float:" + arch_key(K, a, seed);
          if (done(lineage)) continue;
          jobs.push_back([this, K, a, seed, lineage] { float_job(K, a, seed, lineage); });
        }
    log_->info("float stage: {} jobs", jobs.size());
    run_jobs(jobs);
  }

  void float_job(int K, const Arch& a, std::uint64_t seed, const std::string& lineage) {
    std::vector<MlpModel> models;
    try {
      for (int k = 0; k < K; ++k) {
        MlpConfig cfg;
        cfg.input_dim = 2 * m_.channel.num_pilots();
        cfg.width = a.width;
        cfg.depth = a.depth;
        cfg.activation = a.act;
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        TrainConfig tc = m_.train;
        tc.seed = derive_seed(seed, 0x7000 + static_cast<std::uint64_t>(k));
        const auto key = std::make_pair(K, k);
        TrainResult tr = train(init_glorot(cfg, rng), train_sets_.at(key), val_sets_.at(key), tc);
        MlpModel model = std::move(tr.model);
        const auto [lo, hi] = scheme(K).range(k);
        model.provenance = {seed, tr.best_epoch, K == 1 ? lo : scheme(K).training_snr(k),
                            K == 1 ? hi : scheme(K).training_snr(k)};
        write_model(model, model_path(lineage, k));
        models.push_back(std::move(model));
        log_->debug("{} k={} best epoch {} val loss {:.6g}", lineage, k, tr.best_epoch, tr.best_val_loss);
      }
    } catch (const TrainingDiverged& e) {
      log_->warn("{}: {}", lineage, e.what());
      EvalResult r = base_record("float", K, a, seed, lineage);
      r.status = "diverged@" + std::to_string(e.epoch());
      sink({r});
      return;
    }
    auto recs = records_of(models, "float", K, a, seed, lineage, 32);
    log_->info("{}: gain {:.3f} dB, {} MACs, {} B", lineage, recs.front().mean_gain_db, recs.front().macs,
               recs.front().size_bytes);
    sink(std::move(recs));
  }

  // bits < 0 takes every bit-width.
  std::vector<EvalResult> front_for(const std::string& stage, int K, int bits = -1) {
    std::vector<EvalResult> cand;
    for (const auto& r : snapshot())
      if (is_aggregate_ok(r, stage, K) && (bits < 0 || r.bits == bits)) cand.push_back(r);
    if (cand.empty()) return {};
    return pareto_front(cand);
  }

  void stage_quant() {
    std::vector<std::function<void()>> jobs;
    for (int K : m_.grid.Ks)
      for (const EvalResult& src : front_for("float", K))
        for (int q : m_.grid.bits) {
          const std::string lineage = src.lineage + ">quant:Q" + std::to_string(q);
          if (done(lineage)) continue;
          jobs.push_back([this, src, q, lineage] { quant_job(src, q, lineage); });
        }
    log_->info("quant stage: {} jobs", jobs.size());
    run_jobs(jobs);
  }

  void quant_job(const EvalResult& src, int q, const std::string& lineage) {
    const Arch a{src.width, src.depth, src.activation};
    const std::vector<MlpModel> floats = load_models(src.lineage, src.K);
    std::vector<MlpModel> models;
    try {
      for (int k = 0; k < src.K; ++k) {
        QatConfig qc;
        qc.plan.uniform = QuantBits::uniform(q);
        qc.train = m_.qat;
        qc.train.seed = derive_seed(src.seed, 0x9000 + static_cast<std::uint64_t>(q) * 16 + static_cast<std::uint64_t>(k));
        const auto key = std::make_pair(src.K, k);
        QatResult res = qat_retrain(floats[static_cast<std::size_t>(k)], train_sets_.at(key), val_sets_.at(key), qc);
        res.model.provenance = floats[static_cast<std::size_t>(k)].provenance;
        write_model(res.model, model_path(lineage, k));
        models.push_back(std::move(res.model));
      }
    } catch (const TrainingDiverged& e) {
      log_->warn("{}: {}", lineage, e.what());
      EvalResult r = base_record("quant", src.K, a, src.seed, lineage);
      r.bits = q;
      r.status = "diverged@" + std::to_string(e.epoch());
      sink({r});
      return;
    }
    auto recs = records_of(models, "quant", src.K, a, src.seed, lineage, q);
    log_->info("{}: gain {:.3f} dB, {} B", lineage, recs.front().mean_gain_db, recs.front().size_bytes);
    sink(std::move(recs));
  }

  void stage_prune() {
    std::vector<std::function<void()>> jobs;
    for (int K : m_.grid.Ks)
      for (int q : m_.prune.bits)
        for (const EvalResult& src : front_for("quant", K, q)) {
          const std::string lineage = src.lineage + ">prune";
          if (done(lineage)) continue;
          jobs.push_back([this, src, lineage] { prune_job(src, lineage); });
        }
    log_->info("prune stage: {} jobs", jobs.size());
    run_jobs(jobs);
  }

  void prune_job(const EvalResult& src, const std::string& lineage) {
    const Arch a{src.width, src.depth, src.activation};
    const int K = src.K;
    const std::vector<MlpModel> quantized = load_models(src.lineage, K);
    const double target = K == 1 ? m_.prune.operating_point_single : m_.prune.operating_point_split;
    std::vector<MlpModel> chosen;
    std::vector<EvalResult> recs;
    try {
      for (int k = 0; k < K; ++k) {
        const auto key = std::make_pair(K, k);
        PruneSweepConfig pc;
        pc.step = m_.prune.step_pct / 100.0;
        pc.max_pruned_pct = m_.prune.max_pruned_pct;
        pc.apoz_samples = m_.prune.apoz_samples;
        pc.retrain = m_.qat;
        pc.retrain.max_epochs = static_cast<int>(std::lround(m_.prune.retrain_fraction * m_.train.max_epochs));
        pc.retrain.patience = std::max(1, std::min(pc.retrain.patience, pc.retrain.max_epochs));
        pc.retrain.seed = derive_seed(src.seed, 0xB000 + static_cast<std::uint64_t>(k));
        const EvalSet ev = eval_for(K, k);
        const auto gain_of = [&ev](const MlpModel& mm) { return evaluate_gain(ev, single_nn_denoiser(mm)).mean_db; };
        PruneSweepResult sw = prune_sweep(quantized[static_cast<std::size_t>(k)], train_sets_.at(key),
                                          val_sets_.at(key), gain_of, pc);
        {
          std::ofstream os(m_.output_dir / "sweeps" / (file_safe(lineage) + "-k" + std::to_string(k) + ".csv"));
          write_sweep_csv(os, sw.curve);
        }
        std::size_t pick = 0;
        for (std::size_t i = 0; i < sw.curve.size(); ++i) {
          EvalResult r = base_record("prune", K, a, src.seed, lineage + ":" + format_pct(sw.curve[i].pruned_pct));
          r.submodel = k;
          r.bits = src.bits;
          std::vector<MlpModel> one(static_cast<std::size_t>(K));
          one[static_cast<std::size_t>(k)] = sw.models[i];
          fill_eval(r, one, K, k);
          recs.push_back(std::move(r));
          if (sw.curve[i].pruned_pct <= target + 1e-9) pick = i;
        }
        chosen.push_back(sw.models[pick]);
        write_model(chosen.back(), model_path(lineage, k));
      }
    } catch (const TrainingDiverged& e) {
      log_->warn("{}: {}", lineage, e.what());
      EvalResult r = base_record("prune", K, a, src.seed, lineage);
      r.bits = src.bits;
      r.status = "diverged@" + std::to_string(e.epoch());
      sink({r});
      return;
    }
    auto chosen_recs = records_of(chosen, "prune", K, a, src.seed, lineage, src.bits);
    const EvalResult& agg = chosen_recs.front();
    log_->info("{}: operating point {:.2f}% pruned, gain {:.3f} dB, {} MACs, {} B", lineage, agg.pruned_pct,
               agg.mean_gain_db, agg.macs, agg.size_bytes);
    for (auto& r : chosen_recs) recs.push_back(std::move(r));
    sink(std::move(recs));
  }

  void write_pareto_files() {
    const auto all = snapshot();
    for (const char* stage : {"float", "quant", "prune"}) {
      std::vector<EvalResult> out;
      std::set<std::pair<int, int>> groups;
      for (const auto& r : all)
        if (r.stage == stage && r.status == "ok") groups.insert({r.K, r.submodel});
      for (const auto& [K, sub] : groups) {
        std::vector<EvalResult> cand;
        for (const auto& r : all)
          if (r.stage == stage && r.status == "ok" && r.K == K && r.submodel == sub) cand.push_back(r);
        for (auto& r : pareto_front(cand)) out.push_back(std::move(r));
      }
      if (!out.empty()) write_results_file(m_.output_dir / (std::string("pareto_") + stage + ".csv"), out);
    }
  }
};

}  // namespace

std::vector<EvalResult> run_exploration(const ExploreManifest& manifest, int jobs_override) {
  manifest.validate();
  Explorer ex(manifest, jobs_override > 0 ? jobs_override : manifest.jobs);
  return ex.run();
}

}  // namespace chden
