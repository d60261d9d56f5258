// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface for the low-precision toolkit: generate synthetic
// models/data, calibrate, search quantization schemes, transform, evaluate,
// debug, monitor snapshot streams, and estimate operator latency.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpq/autoquant.hpp"
#include "lpq/datagen.hpp"
#include "lpq/debugger.hpp"
#include "lpq/executor.hpp"
#include "lpq/graph.hpp"
#include "lpq/io_util.hpp"
#include "lpq/metrics.hpp"
#include "lpq/monitor.hpp"
#include "lpq/perfmodel.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace lpq;

// Exit codes, one per failure class.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kAccuracyGate = 4;
constexpr int kInternalError = 5;

int log_level() {
  const char* env = std::getenv("LPQ_LOG_LEVEL");
  return env ? std::atoi(env) : 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "lpq: " << msg << "\n";
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  int64_t ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_manifest(const std::string& command, const json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    const std::vector<uint64_t>& seeds, int64_t wall_ms) {
  if (outputs.empty() || outputs.front().empty()) return;
  json j;
  j["command"] = command;
  const std::string cfg = config.dump();
  j["config"] = config;
  j["config_hash"] =
      to_hex(fnv1a64({reinterpret_cast<const uint8_t*>(cfg.data()), cfg.size()}));
  j["seeds"] = seeds;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["toolkit_version"] = "0.1.0";
  j["wall_time_ms"] = wall_ms;
  write_text_file(outputs.front() + ".manifest.json", j.dump(2) + "\n");
}

FaultSpec parse_fault(const std::string& text) {
  // layer:kind[:magnitude[:count]]   kind = outlier | wide
  std::vector<std::string> parts;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t colon = text.find(':', pos);
    parts.push_back(text.substr(
        pos, colon == std::string::npos ? std::string::npos : colon - pos));
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (parts.size() < 2)
    throw std::invalid_argument("--fault needs layer:kind");
  FaultSpec f;
  f.layer = parts[0];
  if (parts[1] == "outlier") {
    f.kind = FaultSpec::Kind::OutlierWeights;
    if (parts.size() > 2) f.magnitude = std::stof(parts[2]);
    if (parts.size() > 3) f.count = std::stoi(parts[3]);
  } else if (parts[1] == "wide") {
    f.kind = FaultSpec::Kind::WideDynamicRange;
    if (parts.size() > 2) f.sigma_mult = std::stof(parts[2]);
  } else {
    throw std::invalid_argument("--fault kind must be outlier or wide");
  }
  return f;
}

TableQuantMode parse_table_mode(const std::string& s) {
  if (s == "none") return TableQuantMode::None;
  if (s == "int8") return TableQuantMode::Int8;
  if (s == "int4-top-half") return TableQuantMode::Int4TopHalf;
  if (s == "int4") return TableQuantMode::Int4;
  throw std::invalid_argument("unknown table mode: " + s);
}

BatchDistribution parse_batch_dist(const std::string& s) {
  if (s == "typical") return BatchDistribution::typical();
  if (s.rfind("fixed:", 0) == 0)
    return BatchDistribution::fixed(std::stoll(s.substr(6)));
  throw std::invalid_argument("--batch-dist must be typical or fixed:<m>");
}

json ne_report(const NEComparison& cmp,
               const std::map<std::string, double>& layer_errors,
               double skipped_ratio) {
  json j;
  j["ne_fp32"] = cmp.ne_fp32;
  j["ne_lowp"] = cmp.ne_lowp;
  j["ne_diff"] = cmp.ne_diff;
  j["skipped_flops_ratio"] = skipped_ratio;
  j["per_layer_error"] = json::object();
  std::vector<std::pair<std::string, double>> sorted(layer_errors.begin(),
                                                     layer_errors.end());
  std::stable_sort(
      sorted.begin(), sorted.end(),
      [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [node, err] : sorted) j["per_layer_error"][node] = err;
  return j;
}

ModelGenConfig preset_model_config(const std::string& preset) {
  ModelGenConfig cfg;
  if (preset == "tiny") {
    cfg.rows_per_table = {400, 300, 200, 100};
    cfg.embedding_dim = 8;
    cfg.dense_dim = 8;
    cfg.bottom_mlp = {16, 8};
    cfg.top_mlp = {32, 16, 1};
  } else if (preset != "default") {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  return cfg;
}

// --- subcommand bodies ------------------------------------------------------

struct GenModelArgs {
  std::string out;
  uint64_t seed = 1;
  std::string preset = "default";
  std::string interaction = "concat";
  double width_mult = 1.0;
  std::vector<std::string> faults;
  std::string tables = "none";
};

int cmd_gen_model(const GenModelArgs& a) {
  Stopwatch timer;
  ModelGenConfig cfg = preset_model_config(a.preset);
  cfg.seed = a.seed;
  cfg.width_mult = a.width_mult;
  cfg.interaction = a.interaction == "dot" ? ModelGenConfig::Interaction::Dot
                                           : ModelGenConfig::Interaction::Concat;
  if (cfg.interaction == ModelGenConfig::Interaction::Dot)
    cfg.bottom_mlp.back() = cfg.embedding_dim;
  for (const auto& f : a.faults) cfg.faults.push_back(parse_fault(f));

  ModelGraph g = gen_model(cfg);
  const TableQuantMode tmode = parse_table_mode(a.tables);
  if (tmode != TableQuantMode::None) g = quantize_tables(g, tmode);
  save_model(g, a.out);
  info("model written to " + a.out + ".json (" +
       std::to_string(g.table_storage_bytes()) + " table bytes)");
  write_manifest("gen-model",
                 json{{"seed", a.seed},
                      {"preset", a.preset},
                      {"interaction", a.interaction},
                      {"width_mult", a.width_mult},
                      {"faults", a.faults},
                      {"tables", a.tables}},
                 {}, {a.out}, {a.seed}, timer.ms());
  return kOk;
}

struct GenDataArgs {
  std::string model, out;
  int64_t n = 10000;
  uint64_t seed = 2;
  double dense_mean = 0.0;
  int ids_per_slot = 20;
  double zipf_s = 1.2;
};

int cmd_gen_data(const GenDataArgs& a) {
  Stopwatch timer;
  const ModelGraph teacher = load_model(a.model);
  DataGenConfig cfg;
  cfg.n = a.n;
  cfg.seed = a.seed;
  cfg.dense_mean = a.dense_mean;
  cfg.ids_per_slot = a.ids_per_slot;
  cfg.zipf_s = a.zipf_s;
  save_dataset(gen_dataset(teacher, cfg), a.out);
  info("dataset written to " + a.out);
  write_manifest("gen-data",
                 json{{"n", a.n},
                      {"seed", a.seed},
                      {"dense_mean", a.dense_mean},
                      {"ids_per_slot", a.ids_per_slot},
                      {"zipf_s", a.zipf_s}},
                 {a.model}, {a.out}, {a.seed}, timer.ms());
  return kOk;
}

struct GenSnapshotsArgs {
  std::string out;
  int count = 3;
  std::string drift = "none";
  uint64_t model_seed = 1, data_seed = 2;
  std::string preset = "default";
  int64_t calib_n = 2048, eval_n = 2048;
};

int cmd_gen_snapshots(const GenSnapshotsArgs& a) {
  Stopwatch timer;
  ModelGenConfig mcfg = preset_model_config(a.preset);
  mcfg.seed = a.model_seed;
  DataGenConfig dcfg;
  dcfg.seed = a.data_seed;

  DriftSpec drift;
  if (a.drift == "none") {
    drift.kind = DriftSpec::Kind::None;
  } else if (a.drift.rfind("weight-walk:", 0) == 0) {
    drift.kind = DriftSpec::Kind::WeightWalk;
    drift.step = std::stod(a.drift.substr(12));
  } else if (a.drift.rfind("activation-shift:", 0) == 0) {
    drift.kind = DriftSpec::Kind::ActivationShift;
    drift.step = std::stod(a.drift.substr(17));
  } else {
    throw std::invalid_argument("unknown drift: " + a.drift);
  }
  gen_snapshots(mcfg, dcfg, a.count, drift, a.out, a.calib_n, a.eval_n);
  info("wrote " + std::to_string(a.count) + " snapshots to " + a.out);
  write_manifest("gen-snapshots",
                 json{{"count", a.count},
                      {"drift", a.drift},
                      {"model_seed", a.model_seed},
                      {"data_seed", a.data_seed},
                      {"preset", a.preset},
                      {"calib_n", a.calib_n},
                      {"eval_n", a.eval_n}},
                 {}, {a.out + "/snapshots"}, {a.model_seed, a.data_seed},
                 timer.ms());
  return kOk;
}

struct CalibrateArgs {
  std::string model, data, out;
  size_t batch_size = 512;
};

int cmd_calibrate(const CalibrateArgs& a) {
  Stopwatch timer;
  const ModelGraph g = fuse_fc_relu(load_model(a.model));
  const EvalDataset ds = load_dataset(a.data);
  const CalibrationData calib = collect_calibration(g, ds, {}, a.batch_size);
  calib.save(a.out);
  info("calibration histograms for " + std::to_string(calib.tensors.size()) +
       " tensors written to " + a.out);
  write_manifest("calibrate", json{{"batch_size", a.batch_size}},
                 {a.model, a.data}, {a.out}, {}, timer.ms());
  return kOk;
}

struct SearchArgs {
  std::string model, data, eval, out_scheme, out_model, config, log;
  SearchConfig cfg;
};

int cmd_search(SearchArgs& a, const CLI::App* sub) {
  Stopwatch timer;
  // Precedence: defaults < config file < command-line flags.
  SearchConfig cfg;
  if (!a.config.empty()) {
    const json j = json::parse(read_text_file(a.config));
    cfg.ne_diff_max = j.value("ne_diff_max", cfg.ne_diff_max);
    cfg.max_skip_flops_ratio =
        j.value("max_skip_flops_ratio", cfg.max_skip_flops_ratio);
    cfg.small_eval_size = j.value("small_eval_size", cfg.small_eval_size);
    cfg.calib_size = j.value("calib_size", cfg.calib_size);
    cfg.small_full_gap_max =
        j.value("small_full_gap_max", cfg.small_full_gap_max);
    cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
  }
  if (sub->count("--ne-diff-max")) cfg.ne_diff_max = a.cfg.ne_diff_max;
  if (sub->count("--max-skip-flops-ratio"))
    cfg.max_skip_flops_ratio = a.cfg.max_skip_flops_ratio;
  if (sub->count("--small-eval-size"))
    cfg.small_eval_size = a.cfg.small_eval_size;
  if (sub->count("--calib-size")) cfg.calib_size = a.cfg.calib_size;
  if (sub->count("--max-iterations")) cfg.max_iterations = a.cfg.max_iterations;
  if (sub->count("--seed")) cfg.seed = a.cfg.seed;
  if (sub->count("--jobs")) cfg.jobs = a.cfg.jobs;

  const ModelGraph g = load_model(a.model);
  const EvalDataset train = load_dataset(a.data);
  const EvalDataset eval = load_dataset(a.eval);

  SearchLog log;
  const SearchResult res = run_search(g, train, eval, cfg, &log);
  if (!a.log.empty()) log.write(a.log);
  if (!a.out_scheme.empty()) res.scheme.save(a.out_scheme);
  if (!a.out_model.empty()) save_model(res.quantized, a.out_model);

  std::cout << "status: "
            << (res.status == SearchStatus::Pass ? "pass" : "fail") << "\n"
            << "ne_diff_small: " << res.ne_diff_small << "\n"
            << "ne_diff_full: " << res.ne_diff_full << "\n"
            << "skipped_flops_ratio: " << res.skipped_ratio << "\n"
            << "iterations: " << res.iterations << "\n";
  if (res.status == SearchStatus::Fail)
    std::cout << "reason: " << res.failure_reason << "\n";

  write_manifest("search",
                 json{{"ne_diff_max", cfg.ne_diff_max},
                      {"max_skip_flops_ratio", cfg.max_skip_flops_ratio},
                      {"small_eval_size", cfg.small_eval_size},
                      {"calib_size", cfg.calib_size},
                      {"max_iterations", cfg.max_iterations},
                      {"seed", cfg.seed},
                      {"jobs", cfg.jobs}},
                 {a.model, a.data, a.eval},
                 {a.out_scheme.empty() ? a.out_model : a.out_scheme},
                 {cfg.seed}, timer.ms());
  return res.status == SearchStatus::Pass ? kOk : kAccuracyGate;
}

struct QuantizeArgs {
  std::string model, scheme, calib, out;
  std::string tables = "none";
};

int cmd_quantize(const QuantizeArgs& a) {
  Stopwatch timer;
  const ModelGraph g = fuse_fc_relu(load_model(a.model));
  const QuantScheme scheme = QuantScheme::load(a.scheme);
  CalibrationData calib;
  if (!a.calib.empty()) calib = CalibrationData::load(a.calib);
  ModelGraph q = apply_scheme(g, scheme, calib);
  const TableQuantMode tmode = parse_table_mode(a.tables);
  if (tmode != TableQuantMode::None) q = quantize_tables(q, tmode);
  save_model(q, a.out);
  info("quantized model written to " + a.out + ".json");
  write_manifest("quantize", json{{"tables", a.tables}},
                 {a.model, a.scheme, a.calib}, {a.out}, {}, timer.ms());
  return kOk;
}

struct EvalArgs {
  std::string model_a, model_b, data, out;
};

int cmd_eval(const EvalArgs& a) {
  Stopwatch timer;
  const ModelGraph ga = load_model(a.model_a);  // low precision
  const ModelGraph gb = load_model(a.model_b);  // reference
  const EvalDataset ds = load_dataset(a.data);

  const auto pa = run_dataset(ga, ds);
  const auto pb = run_dataset(gb, ds);
  const NEComparison cmp =
      ne_diff(normalized_entropy(pa, ds), normalized_entropy(pb, ds));

  std::map<std::string, double> layer_errors;
  try {
    const size_t probe = std::min<size_t>(256, ds.size());
    layer_errors = per_layer_error(ga, gb, to_batch(ds, 0, probe));
  } catch (const std::exception& e) {
    info(std::string("per-layer errors unavailable: ") + e.what());
  }

  const json rep = ne_report(cmp, layer_errors, 0.0);
  std::cout << rep.dump(2) << "\n";
  if (!a.out.empty()) write_text_file(a.out, rep.dump(2) + "\n");
  write_manifest("eval", json::object(), {a.model_a, a.model_b, a.data},
                 {a.out}, {}, timer.ms());
  return kOk;
}

struct DebugArgs {
  std::string model_lowp, model_fp32, data, out;
  size_t n = 256;
  uint64_t seed = 1;
  std::string format = "text";
};

int cmd_debug(const DebugArgs& a) {
  Stopwatch timer;
  const ModelGraph lowp = load_model(a.model_lowp);
  const ModelGraph fp32 = load_model(a.model_fp32);
  const EvalDataset ds = load_dataset(a.data);

  // Shrink both models against the same sample so their tables agree.
  const DebugBundle bundle =
      extract_bundle(fp32, ds, std::min(a.n, ds.size()), a.seed);
  const DebugBundle bundle_lowp =
      extract_bundle(lowp, ds, std::min(a.n, ds.size()), a.seed);

  const auto ranks = rank_samples(bundle, bundle_lowp.model, bundle.model);
  const auto records = shadow_run(bundle, bundle_lowp.model, bundle.model);

  std::filesystem::create_directories(a.out);
  save_bundle(bundle, a.out + "/bundle");
  const std::string report = a.format == "json"
                                 ? debug_report_json(records, ranks)
                                 : debug_report_text(records, ranks);
  write_text_file(a.out + "/report." + (a.format == "json" ? "json" : "txt"),
                  report);
  std::cout << report;
  write_manifest("debug",
                 json{{"n", a.n}, {"seed", a.seed}, {"format", a.format}},
                 {a.model_lowp, a.model_fp32, a.data}, {a.out}, {a.seed},
                 timer.ms());
  return kOk;
}

struct MonitorArgs {
  std::string snapshots, scheme, eval, log;
  float threshold = 0.0005f;
  bool no_recalibrate = false;
};

int cmd_monitor(const MonitorArgs& a) {
  Stopwatch timer;
  const QuantScheme scheme = QuantScheme::load(a.scheme);
  EvalDataset fallback;
  const EvalDataset* fallback_ptr = nullptr;
  if (!a.eval.empty()) {
    fallback = load_dataset(a.eval);
    fallback_ptr = &fallback;
  }
  MonitorConfig cfg;
  cfg.threshold = a.threshold;
  cfg.recalibrate = !a.no_recalibrate;
  const MonitorResult res =
      monitor_run(a.snapshots, scheme, fallback_ptr, fallback_ptr, cfg, a.log);
  for (const auto& r : res.records) std::cout << r.to_json_line() << "\n";
  write_manifest("monitor",
                 json{{"threshold", a.threshold},
                      {"recalibrate", !a.no_recalibrate}},
                 {a.snapshots, a.scheme}, {a.log}, {}, timer.ms());
  return res.any_alert ? kAccuracyGate : kOk;
}

struct RooflineArgs {
  std::string model, hw, batch_dist = "typical", out;
};

int cmd_roofline(const RooflineArgs& a) {
  Stopwatch timer;
  const ModelGraph g = load_model(a.model);
  const HardwareSpec spec = a.hw.empty() ? HardwareSpec::broadwell_like()
                                         : HardwareSpec::from_json_file(a.hw);
  const GraphLatencyReport rep =
      graph_report(g, spec, parse_batch_dist(a.batch_dist));
  std::cout << rep.to_text();
  if (!a.out.empty()) write_text_file(a.out, rep.to_json_string());
  write_manifest("roofline",
                 json{{"hw", spec.name}, {"batch_dist", a.batch_dist}},
                 {a.model}, {a.out}, {}, timer.ms());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-precision quantization toolkit"};
  app.require_subcommand(1);

  GenModelArgs gm;
  auto* gen_model_cmd =
      app.add_subcommand("gen-model", "generate a synthetic model");
  gen_model_cmd->add_option("--out", gm.out)->required();
  gen_model_cmd->add_option("--seed", gm.seed);
  gen_model_cmd->add_option("--preset", gm.preset);
  gen_model_cmd->add_option("--interaction", gm.interaction);
  gen_model_cmd->add_option("--width-mult", gm.width_mult);
  gen_model_cmd->add_option("--fault", gm.faults);
  gen_model_cmd->add_option("--tables", gm.tables);

  GenDataArgs gd;
  auto* gen_data_cmd =
      app.add_subcommand("gen-data", "generate a labeled dataset");
  gen_data_cmd->add_option("--model", gd.model)->required();
  gen_data_cmd->add_option("--out", gd.out)->required();
  gen_data_cmd->add_option("--n", gd.n);
  gen_data_cmd->add_option("--seed", gd.seed);
  gen_data_cmd->add_option("--dense-mean", gd.dense_mean);
  gen_data_cmd->add_option("--ids-per-slot", gd.ids_per_slot);
  gen_data_cmd->add_option("--zipf", gd.zipf_s);

  GenSnapshotsArgs gs;
  auto* gen_snap_cmd =
      app.add_subcommand("gen-snapshots", "generate a snapshot directory");
  gen_snap_cmd->add_option("--out", gs.out)->required();
  gen_snap_cmd->add_option("--count", gs.count);
  gen_snap_cmd->add_option("--drift", gs.drift);
  gen_snap_cmd->add_option("--model-seed", gs.model_seed);
  gen_snap_cmd->add_option("--data-seed", gs.data_seed);
  gen_snap_cmd->add_option("--preset", gs.preset);
  gen_snap_cmd->add_option("--calib-n", gs.calib_n);
  gen_snap_cmd->add_option("--eval-n", gs.eval_n);

  CalibrateArgs ca;
  auto* calib_cmd =
      app.add_subcommand("calibrate", "collect activation histograms");
  calib_cmd->add_option("--model", ca.model)->required();
  calib_cmd->add_option("--data", ca.data)->required();
  calib_cmd->add_option("--out", ca.out)->required();
  calib_cmd->add_option("--batch-size", ca.batch_size);

  SearchArgs sa;
  auto* search_cmd =
      app.add_subcommand("search", "automatic quantization scheme search");
  search_cmd->add_option("--model", sa.model)->required();
  search_cmd->add_option("--data", sa.data)->required();
  search_cmd->add_option("--eval", sa.eval)->required();
  search_cmd->add_option("--out-scheme", sa.out_scheme);
  search_cmd->add_option("--out-model", sa.out_model);
  search_cmd->add_option("--config", sa.config);
  search_cmd->add_option("--log", sa.log);
  search_cmd->add_option("--ne-diff-max", sa.cfg.ne_diff_max);
  search_cmd->add_option("--max-skip-flops-ratio", sa.cfg.max_skip_flops_ratio);
  search_cmd->add_option("--small-eval-size", sa.cfg.small_eval_size);
  search_cmd->add_option("--calib-size", sa.cfg.calib_size);
  search_cmd->add_option("--max-iterations", sa.cfg.max_iterations);
  search_cmd->add_option("--seed", sa.cfg.seed);
  search_cmd->add_option("--jobs", sa.cfg.jobs);

  QuantizeArgs qa;
  auto* quant_cmd =
      app.add_subcommand("quantize", "apply a quantization scheme");
  quant_cmd->add_option("--model", qa.model)->required();
  quant_cmd->add_option("--scheme", qa.scheme)->required();
  quant_cmd->add_option("--calib", qa.calib);
  quant_cmd->add_option("--out", qa.out)->required();
  quant_cmd->add_option("--tables", qa.tables);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "NE comparison of two models");
  eval_cmd->add_option("--model-a", ea.model_a)->required();
  eval_cmd->add_option("--model-b", ea.model_b)->required();
  eval_cmd->add_option("--data", ea.data)->required();
  eval_cmd->add_option("--out", ea.out);

  DebugArgs da;
  auto* debug_cmd =
      app.add_subcommand("debug", "numeric debugging bundle + report");
  debug_cmd->add_option("--model-lowp", da.model_lowp)->required();
  debug_cmd->add_option("--model-fp32", da.model_fp32)->required();
  debug_cmd->add_option("--data", da.data)->required();
  debug_cmd->add_option("--out", da.out)->required();
  debug_cmd->add_option("--n", da.n);
  debug_cmd->add_option("--seed", da.seed);
  debug_cmd->add_option("--format", da.format);

  MonitorArgs ma;
  auto* monitor_cmd =
      app.add_subcommand("monitor", "snapshot accuracy monitor");
  monitor_cmd->add_option("--snapshots", ma.snapshots)->required();
  monitor_cmd->add_option("--scheme", ma.scheme)->required();
  monitor_cmd->add_option("--eval", ma.eval);
  monitor_cmd->add_option("--threshold", ma.threshold);
  monitor_cmd->add_option("--log", ma.log);
  monitor_cmd->add_flag("--no-recalibrate", ma.no_recalibrate);

  RooflineArgs ra;
  auto* roofline_cmd =
      app.add_subcommand("roofline", "operator latency estimates");
  roofline_cmd->add_option("--model", ra.model)->required();
  roofline_cmd->add_option("--hw", ra.hw);
  roofline_cmd->add_option("--batch-dist", ra.batch_dist);
  roofline_cmd->add_option("--out", ra.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen_model_cmd) return cmd_gen_model(gm);
    if (*gen_data_cmd) return cmd_gen_data(gd);
    if (*gen_snap_cmd) return cmd_gen_snapshots(gs);
    if (*calib_cmd) return cmd_calibrate(ca);
    if (*search_cmd) return cmd_search(sa, search_cmd);
    if (*quant_cmd) return cmd_quantize(qa);
    if (*eval_cmd) return cmd_eval(ea);
    if (*debug_cmd) return cmd_debug(da);
    if (*monitor_cmd) return cmd_monitor(ma);
    if (*roofline_cmd) return cmd_roofline(ra);
  } catch (const std::invalid_argument& e) {
    std::cerr << "lpq: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::runtime_error& e) {
    std::cerr << "lpq: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "lpq: internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kConfigError;
}
