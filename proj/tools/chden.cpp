// SPDX-License-Identifier: Apache-2.0
//
// chden: command-line front end for dataset generation, training, QAT,
// pruning, evaluation and the design-space exploration.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "chden/binary_io.hpp"
#include "chden/csv.hpp"
#include "chden/dataset.hpp"
#include "chden/evaluate.hpp"
#include "chden/explore.hpp"
#include "chden/metrics.hpp"
#include "chden/model_io.hpp"
#include "chden/prune.hpp"
#include "chden/quant.hpp"
#include "chden/train.hpp"

namespace {

using namespace chden;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ChannelConfig load_channel(const std::string& path) {
  if (path.empty()) return ChannelConfig{};
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open channel config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_channel_config(ss.str());
}

// ---------------------------------------------------------------------------

struct DatasetOpts {
  std::string config, out;
  long long count = 0;
  double snr_min = 0.0, snr_max = 30.0;
  std::uint64_t seed = 1;
};

int cmd_dataset(const DatasetOpts& o) {
  if (o.count <= 0) throw UsageError("empty dataset (--count must be > 0)");
  if (!std::isfinite(o.snr_min) || !std::isfinite(o.snr_max) || o.snr_min > o.snr_max)
    throw UsageError("invalid SNR range: --snr-min must be <= --snr-max");
  const ChannelConfig cfg = load_channel(o.config);
  const Dataset ds = generate_dataset(cfg, static_cast<std::size_t>(o.count), o.snr_min, o.snr_max, o.seed);
  const auto bytes = encode_dataset(ds);
  io::write_file(o.out, bytes);

  constexpr int kBins = 10;
  std::vector<std::size_t> hist(kBins, 0);
  const double width = (o.snr_max - o.snr_min) / kBins;
  double lo = INFINITY, hi = -INFINITY;
  for (Eigen::Index i = 0; i < ds.noise_var.size(); ++i) {
    const double s = -10.0 * std::log10(static_cast<double>(ds.noise_var[i]));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
    const int b = width > 0.0 ? std::clamp(static_cast<int>((s - o.snr_min) / width), 0, kBins - 1) : 0;
    ++hist[static_cast<std::size_t>(b)];
  }
  std::printf("wrote %s\n", o.out.c_str());
  std::printf("samples   %lld\n", o.count);
  std::printf("pilots    %d of %d subcarriers\n", ds.num_pilots(), ds.num_subcarriers);
  std::printf("snr_db    [%.3f, %.3f]\n", lo, hi);
  std::printf("crc32     %08x\n", io::crc32(bytes));
  std::printf("histogram");
  for (auto h : hist) std::printf(" %zu", h);
  std::printf("\n");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string train_path, val_path, out;
  int width = 64, depth = 3;
  std::string activation = "relu";
  bool no_residual = false;
  int epochs = 200, patience = 20, batch = 256;
  double lr = 1e-3, lr_decay = 1.0;
  std::string weighting = "verbatim";
  std::uint64_t seed = 1;
};

TrainConfig train_config(const TrainOpts& o) {
  TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.lr_decay = o.lr_decay;
  tc.batch_size = o.batch;
  tc.max_epochs = o.epochs;
  tc.patience = o.patience;
  tc.weighting = parse_loss_weighting(o.weighting);
  tc.seed = o.seed;
  tc.validate();
  return tc;
}

void print_history(const TrainResult& r) {
  for (std::size_t e = 0; e < r.val_loss.size(); ++e)
    std::printf("epoch %3zu  train %.6g  val %.6g\n", e + 1, r.train_loss[e], r.val_loss[e]);
  std::printf("best epoch %d, val loss %.6g\n", r.best_epoch, r.best_val_loss);
}

int cmd_train(const TrainOpts& o) {
  const Dataset tr = read_dataset(o.train_path);
  const Dataset va = read_dataset(o.val_path);
  MlpConfig cfg;
  cfg.input_dim = tr.input_dim();
  cfg.width = o.width;
  cfg.depth = o.depth;
  cfg.activation = parse_activation(o.activation);
  cfg.residual = !o.no_residual;
  cfg.validate();
  const TrainConfig tc = train_config(o);
  Rng rng(o.seed);
  TrainResult r = train(init_glorot(cfg, rng), tr, va, tc);
  const Eigen::VectorXf snr = tr.snr();
  double lo = INFINITY, hi = -INFINITY;
  for (Eigen::Index i = 0; i < snr.size(); ++i) {
    lo = std::min(lo, 10.0 * std::log10(static_cast<double>(snr[i])));
    hi = std::max(hi, 10.0 * std::log10(static_cast<double>(snr[i])));
  }
  r.model.provenance = {o.seed, r.best_epoch, lo, hi};
  write_model(r.model, o.out);
  print_history(r);
  std::printf("wrote %s (%zu MACs)\n", o.out.c_str(), mac_count(r.model));
  return 0;
}

// ---------------------------------------------------------------------------

struct QatOpts {
  std::string model, train_path, val_path, out;
  int bits = 10, weight_bits = 0, bias_bits = 0, act_bits = 0;
  int epochs = 50, patience = 10, batch = 256;
  double lr = 1e-4;
  std::string weighting = "verbatim";
  std::uint64_t seed = 1;
};

int cmd_qat(const QatOpts& o) {
  const MlpModel m = read_model(o.model);
  const Dataset tr = read_dataset(o.train_path);
  const Dataset va = read_dataset(o.val_path);
  QatConfig qc;
  qc.plan.uniform = {o.weight_bits ? o.weight_bits : o.bits, o.bias_bits ? o.bias_bits : o.bits,
                     o.act_bits ? o.act_bits : o.bits};
  qc.train.learning_rate = o.lr;
  qc.train.max_epochs = o.epochs;
  qc.train.patience = o.patience;
  qc.train.batch_size = o.batch;
  qc.train.weighting = parse_loss_weighting(o.weighting);
  qc.train.seed = o.seed;
  qc.train.validate();
  QatResult r = qat_retrain(m, tr, va, qc);
  r.model.provenance = m.provenance;
  write_model(r.model, o.out);
  print_history(r.history);
  const ModelSize s = quantized_model_size(r.model, *r.model.quant);
  std::printf("wrote %s (payload %zu B, with scales %zu B, with full metadata %zu B)\n", o.out.c_str(),
              s.payload_bytes, s.with_scales(), s.with_full_metadata());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalOpts {
  std::vector<std::string> models;
  std::string mmse, config, csv;
  double snr_min = 0.0, snr_max = 30.0;
  std::size_t channels = 1000, mmse_snapshots = 100, mmse_ensemble = 100000;
  std::uint64_t seed = 1;
};

EvalSet eval_set(const ChannelConfig& cfg, std::size_t channels, double lo, double hi, std::uint64_t seed) {
  std::vector<double> grid;
  for (double s : default_snr_grid())
    if (s >= lo && s <= hi) grid.push_back(s);
  if (grid.empty()) throw UsageError("SNR range contains no integer grid point");
  return make_eval_set(cfg, channels, grid, seed);
}

int cmd_eval(const EvalOpts& o) {
  if (o.models.empty() == o.mmse.empty()) throw UsageError("give either --model (repeatable) or --mmse");
  const ChannelConfig cfg = load_channel(o.config);
  const EvalSet ev = eval_set(cfg, o.channels, o.snr_min, o.snr_max, o.seed);
  BatchDenoiser den;
  std::vector<MlpModel> models;
  std::string label;
  if (!o.models.empty()) {
    for (const auto& p : o.models) models.push_back(read_model(p));
    const SnrScheme scheme{static_cast<int>(models.size()), o.snr_min, o.snr_max};
    den = nn_denoiser(models, scheme);
    label = "nn K=" + std::to_string(models.size());
  } else if (o.mmse == "ideal") {
    den = mmse_denoiser(ensemble_covariance(cfg, o.mmse_ensemble, derive_seed(o.seed, 0xC0)));
    label = "mmse ideal";
  } else if (o.mmse == "sample") {
    den = mmse_sample_denoiser(cfg, o.mmse_snapshots, derive_seed(o.seed, 0xC1));
    label = "mmse " + std::to_string(o.mmse_snapshots) + "-sample";
  } else {
    throw UsageError("--mmse must be 'ideal' or 'sample'");
  }
  const GainCurve c = evaluate_gain(ev, den);
  std::printf("%s: mean gain %.4f dB over %zu SNR points\n", label.c_str(), c.mean_db, c.snr_db.size());
  if (!models.empty()) {
    std::size_t macs = 0, bytes = 0;
    for (const auto& m : models) {
      macs = std::max(macs, mac_count(m));
      bytes += model_size_bytes(m);
    }
    std::printf("worst-case MACs %zu, size %zu B (%.2f KB)\n", macs, bytes, bytes / kBytesPerKB);
  }
  for (std::size_t i = 0; i < c.snr_db.size(); ++i) std::printf("  %5.1f dB  %8.4f\n", c.snr_db[i], c.gain_db[i]);
  if (!o.csv.empty()) {
    std::ofstream os(o.csv);
    if (!os) throw std::runtime_error("cannot write " + o.csv);
    os << "snr_db,gain_db\n";
    for (std::size_t i = 0; i < c.snr_db.size(); ++i)
      os << c.snr_db[i] << ',' << format_gain(c.gain_db[i]) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PruneOpts {
  std::string model, train_path, val_path, out, sweep_csv, config;
  double step = 1.0, max_pct = 70.0, target = 48.0, zero_tol = -1.0;
  double snr_min = 0.0, snr_max = 30.0;
  int retrain_epochs = 50, patience = 10, batch = 256;
  double lr = 1e-4;
  std::size_t channels = 200, apoz_samples = 10000;
  std::uint64_t seed = 1;
};

int cmd_prune(const PruneOpts& o) {
  const MlpModel m = read_model(o.model);
  const Dataset tr = read_dataset(o.train_path);
  const Dataset va = read_dataset(o.val_path);
  const EvalSet ev = eval_set(load_channel(o.config), o.channels, o.snr_min, o.snr_max, o.seed);
  PruneSweepConfig pc;
  pc.step = o.step / 100.0;
  pc.max_pruned_pct = o.max_pct;
  pc.zero_tolerance = o.zero_tol;
  pc.apoz_samples = o.apoz_samples;
  pc.retrain.learning_rate = o.lr;
  pc.retrain.max_epochs = o.retrain_epochs;
  pc.retrain.patience = std::max(1, std::min(o.patience, std::max(1, o.retrain_epochs)));
  pc.retrain.batch_size = o.batch;
  pc.retrain.seed = o.seed;
  const auto gain_of = [&ev](const MlpModel& mm) { return evaluate_gain(ev, single_nn_denoiser(mm)).mean_db; };
  const PruneSweepResult sw = prune_sweep(m, tr, va, gain_of, pc);
  write_sweep_csv(std::cout, sw.curve);
  if (!o.sweep_csv.empty()) {
    std::ofstream os(o.sweep_csv);
    if (!os) throw std::runtime_error("cannot write " + o.sweep_csv);
    write_sweep_csv(os, sw.curve);
  }
  std::size_t pick = 0;
  for (std::size_t i = 0; i < sw.curve.size(); ++i)
    if (sw.curve[i].pruned_pct <= o.target + 1e-9) pick = i;
  write_model(sw.models[pick], o.out);
  std::printf("wrote %s (%.2f%% pruned, %.4f dB, %zu MACs)\n", o.out.c_str(), sw.curve[pick].pruned_pct,
              sw.curve[pick].gain_db, sw.curve[pick].macs);
  return 0;
}

// ---------------------------------------------------------------------------

struct ParetoOpts {
  std::string records, out, stage;
  int K = 0;
};

std::vector<EvalResult> filtered_front(const std::vector<EvalResult>& recs, const std::string& stage, int K) {
  std::vector<EvalResult> cand;
  for (const auto& r : recs)
    if (r.status == "ok" && (stage.empty() || r.stage == stage) && (K == 0 || r.K == K) && r.submodel < 0)
      cand.push_back(r);
  if (cand.empty()) throw std::runtime_error("no records match the filter");
  return pareto_front(cand);
}

int cmd_pareto(const ParetoOpts& o) {
  const auto front = filtered_front(read_results_file(o.records), o.stage, o.K);
  if (o.out.empty()) {
    write_results_csv(std::cout, front);
  } else {
    write_results_file(o.out, front);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ReportOpts {
  std::string records, pareto, svg, stage;
  int K = 0;
};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_svg(std::ostream& os, const std::vector<EvalResult>& points, const std::vector<EvalResult>& front) {
  constexpr double W = 640, H = 440, L = 70, R = 20, T = 20, B = 50;
  double xmax = 0, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& r : points) {
    xmax = std::max(xmax, r.size_bytes / kBytesPerKB);
    ymin = std::min(ymin, r.mean_gain_db);
    ymax = std::max(ymax, r.mean_gain_db);
  }
  if (xmax <= 0) xmax = 1;
  if (ymax - ymin < 1e-9) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  xmax *= 1.05;
  auto px = [&](double kb) { return L + (W - L - R) * kb / xmax; };
  auto py = [&](double g) { return T + (H - T - B) * (1.0 - (g - ymin) / (ymax - ymin)); };
  char buf[256];
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "  <line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, H - B, W - R,
                H - B);
  os << buf;
  std::snprintf(buf, sizeof buf, "  <line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", L, T, L, H - B);
  os << buf;
  for (int i = 0; i <= 4; ++i) {
    const double kb = xmax * i / 4.0, g = ymin + (ymax - ymin) * i / 4.0;
    std::snprintf(buf, sizeof buf, "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.1f</text>\n", px(kb),
                  H - B + 16, kb);
    os << buf;
    std::snprintf(buf, sizeof buf, "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.2f</text>\n", L - 6, py(g) + 4,
                  g);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">model size [KB]</text>\n",
                (L + W - R) / 2, H - 12);
  os << buf;
  std::snprintf(buf, sizeof buf,
                "  <text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 16 %.1f)\">mean gain "
                "[dB]</text>\n",
                (T + H - B) / 2, (T + H - B) / 2);
  os << buf;
  os << "  <g class=\"points\" fill=\"steelblue\" fill-opacity=\"0.7\">\n";
  for (const auto& r : points) {
    std::snprintf(buf, sizeof buf, "    <circle cx=\"%.2f\" cy=\"%.2f\" r=\"3.5\">", px(r.size_bytes / kBytesPerKB),
                  py(r.mean_gain_db));
    os << buf << "<title>" << xml_escape(r.lineage) << "</title></circle>\n";
  }
  os << "  </g>\n";
  os << "  <polyline class=\"frontier\" fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < front.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", i ? " " : "", px(front[i].size_bytes / kBytesPerKB),
                  py(front[i].mean_gain_db));
    os << buf;
  }
  os << "\"/>\n</svg>\n";
}

int cmd_report(const ReportOpts& o) {
  const auto recs = read_results_file(o.records);
  std::vector<EvalResult> points;
  for (const auto& r : recs)
    if (r.status == "ok" && (o.stage.empty() || r.stage == o.stage) && (o.K == 0 || r.K == o.K) && r.submodel < 0)
      points.push_back(r);
  if (points.empty()) throw std::runtime_error("no records match the filter");
  const auto front = pareto_front(points);
  if (!o.pareto.empty()) write_results_file(o.pareto, front);
  if (!o.svg.empty()) {
    std::ofstream os(o.svg);
    if (!os) throw std::runtime_error("cannot write " + o.svg);
    write_svg(os, points, front);
  }
  std::printf("%zu records, %zu on the frontier\n", points.size(), front.size());
  for (const auto& r : front)
    std::printf("  %-50s %9.2f KB  %8.4f dB\n", r.lineage.c_str(), r.size_bytes / kBytesPerKB, r.mean_gain_db);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chden: neural pilot-channel denoiser toolkit"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  DatasetOpts ds;
  auto* c_ds = app.add_subcommand("dataset", "Generate a training/validation dataset file");
  c_ds->add_option("--config", ds.config, "Channel configuration JSON");
  c_ds->add_option("--out", ds.out, "Output dataset file")->required();
  c_ds->add_option("--count", ds.count, "Number of samples")->required()->default_str("");
  c_ds->add_option("--snr-min", ds.snr_min, "Lowest SNR in dB");
  c_ds->add_option("--snr-max", ds.snr_max, "Highest SNR in dB");
  c_ds->add_option("--seed", ds.seed, "RNG seed");

  TrainOpts tr;
  auto* c_tr = app.add_subcommand("train", "Train a float model");
  c_tr->add_option("--train", tr.train_path, "Training dataset file")->required();
  c_tr->add_option("--val", tr.val_path, "Validation dataset file (early stopping)")->required();
  c_tr->add_option("--out", tr.out, "Output model file")->required();
  c_tr->add_option("--width", tr.width);
  c_tr->add_option("--depth", tr.depth, "Number of weight layers");
  c_tr->add_option("--activation", tr.activation)->check(CLI::IsMember({"tanh", "relu"}));
  c_tr->add_flag("--no-residual", tr.no_residual);
  c_tr->add_option("--epochs", tr.epochs);
  c_tr->add_option("--patience", tr.patience);
  c_tr->add_option("--batch", tr.batch);
  c_tr->add_option("--lr", tr.lr);
  c_tr->add_option("--lr-decay", tr.lr_decay, "Learning-rate factor applied after every epoch");
  c_tr->add_option("--weighting", tr.weighting, "How SNR scales the loss")->check(CLI::IsMember({"verbatim", "linear", "none"}));
  c_tr->add_option("--seed", tr.seed);

  QatOpts qa;
  auto* c_qa = app.add_subcommand("qat", "Quantization-aware retraining of a model");
  c_qa->add_option("--model", qa.model, "Float model to retrain")->required();
  c_qa->add_option("--train", qa.train_path)->required();
  c_qa->add_option("--val", qa.val_path)->required();
  c_qa->add_option("--out", qa.out)->required();
  c_qa->add_option("--bits", qa.bits, "Bit-width for all tensor types")->check(CLI::Range(1, 32));
  c_qa->add_option("--weight-bits", qa.weight_bits, "Override --bits for weights")->default_str("")->check(CLI::Range(1, 32));
  c_qa->add_option("--bias-bits", qa.bias_bits, "Override --bits for biases")->default_str("")->check(CLI::Range(1, 32));
  c_qa->add_option("--act-bits", qa.act_bits, "Override --bits for activations")->default_str("")->check(CLI::Range(1, 32));
  c_qa->add_option("--epochs", qa.epochs);
  c_qa->add_option("--patience", qa.patience);
  c_qa->add_option("--batch", qa.batch);
  c_qa->add_option("--lr", qa.lr);
  c_qa->add_option("--weighting", qa.weighting)->check(CLI::IsMember({"verbatim", "linear", "none"}));
  c_qa->add_option("--seed", qa.seed);

  PruneOpts pr;
  auto* c_pr = app.add_subcommand("prune", "APoZ pruning sweep with retraining");
  c_pr->add_option("--model", pr.model, "Model to prune (float or quantized)")->required();
  c_pr->add_option("--train", pr.train_path)->required();
  c_pr->add_option("--val", pr.val_path)->required();
  c_pr->add_option("--out", pr.out, "Model at the operating point")->required();
  c_pr->add_option("--sweep-csv", pr.sweep_csv, "Write every sweep point");
  c_pr->add_option("--config", pr.config, "Channel configuration JSON for the evaluation set");
  c_pr->add_option("--step", pr.step, "Threshold step in percent");
  c_pr->add_option("--max-pct", pr.max_pct, "Stop once this share of neurons is pruned");
  c_pr->add_option("--target", pr.target, "Operating point (percent pruned) written to --out");
  c_pr->add_option("--zero-tol", pr.zero_tol, "APoZ zero tolerance (default: 0 relu, 1e-6 tanh)");
  c_pr->add_option("--snr-min", pr.snr_min);
  c_pr->add_option("--snr-max", pr.snr_max);
  c_pr->add_option("--retrain-epochs", pr.retrain_epochs, "Epochs of retraining after each step");
  c_pr->add_option("--patience", pr.patience);
  c_pr->add_option("--batch", pr.batch);
  c_pr->add_option("--lr", pr.lr);
  c_pr->add_option("--channels", pr.channels, "Test channels per SNR point");
  c_pr->add_option("--apoz-samples", pr.apoz_samples);
  c_pr->add_option("--seed", pr.seed);

  EvalOpts ev;
  auto* c_ev = app.add_subcommand("eval", "Mean denoising gain over the SNR grid");
  c_ev->add_option("--model", ev.models, "Model file; repeat for a split-SNR scheme in sub-range order")
      ->default_str("");
  c_ev->add_option("--mmse", ev.mmse, "Evaluate the MMSE baseline instead: ideal | sample");
  c_ev->add_option("--mmse-snapshots", ev.mmse_snapshots);
  c_ev->add_option("--mmse-ensemble", ev.mmse_ensemble);
  c_ev->add_option("--config", ev.config, "Channel configuration JSON");
  c_ev->add_option("--snr-min", ev.snr_min);
  c_ev->add_option("--snr-max", ev.snr_max);
  c_ev->add_option("--channels", ev.channels, "Test channels per SNR point");
  c_ev->add_option("--csv", ev.csv, "Write the gain curve");
  c_ev->add_option("--seed", ev.seed);

  std::string manifest;
  int jobs = 0;
  auto* c_ex = app.add_subcommand("explore", "Run the design-space exploration");
  c_ex->add_option("manifest", manifest, "Exploration manifest (JSON)")->required();
  c_ex->add_option("--jobs", jobs, "Concurrent configurations (overrides the manifest)")
      ->default_str("")
      ->check(CLI::PositiveNumber);

  ParetoOpts pa;
  auto* c_pa = app.add_subcommand("pareto", "Extract the size/gain Pareto frontier of a records CSV");
  c_pa->add_option("records", pa.records, "Results CSV")->required();
  c_pa->add_option("--out", pa.out, "Write the frontier CSV here instead of stdout");
  c_pa->add_option("--stage", pa.stage)->check(CLI::IsMember({"float", "quant", "prune"}));
  c_pa->add_option("-K", pa.K, "Restrict to one K")->default_str("");

  ReportOpts rp;
  auto* c_rp = app.add_subcommand("report", "Frontier CSV and size/gain scatter SVG");
  c_rp->add_option("records", rp.records, "Results CSV")->required();
  c_rp->add_option("--pareto", rp.pareto);
  c_rp->add_option("--svg", rp.svg, "Size-vs-gain scatter plot");
  c_rp->add_option("--stage", rp.stage)->check(CLI::IsMember({"float", "quant", "prune"}));
  c_rp->add_option("-K", rp.K, "Restrict to one K")->default_str("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_ds) return cmd_dataset(ds);
    if (*c_tr) return cmd_train(tr);
    if (*c_qa) return cmd_qat(qa);
    if (*c_pr) return cmd_prune(pr);
    if (*c_ev) return cmd_eval(ev);
    if (*c_ex) {
      ExploreManifest m;
      try {
        m = load_manifest(manifest);
      } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
      }
      const auto recs = run_exploration(m, jobs);
      const bool any_ok = std::any_of(recs.begin(), recs.end(), [](const EvalResult& r) { return r.status == "ok"; });
      return any_ok ? 0 : 2;
    }
    if (*c_pa) return cmd_pareto(pa);
    if (*c_rp) return cmd_report(rp);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
