// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/monitor.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lpq/debugger.hpp"
#include "lpq/io_util.hpp"

namespace lpq {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string SnapshotRecord::to_json_line() const {
  json j;
  j["schema_version"] = schema_version;
  j["snapshot_id"] = snapshot_id;
  j["timestamp"] = timestamp;
  if (load_error) {
    j["load_error"] = true;
    j["error"] = error;
    return j.dump();
  }
  j["ne_fp32"] = ne_fp32;
  j["ne_lowp"] = ne_lowp;
  j["ne_diff"] = ne_diff;
  j["top_layer_errors"] = json::array();
  for (const auto& [node, err] : top_layer_errors)
    j["top_layer_errors"].push_back({{"node", node}, {"error", err}});
  j["alert"] = alert;
  j["scheme_hash"] = scheme_hash;
  return j.dump();
}

SnapshotRecord SnapshotRecord::from_json_line(const std::string& line) {
  const json j = json::parse(line);
  SnapshotRecord r;
  r.schema_version = j.at("schema_version").get<int>();
  r.snapshot_id = j.at("snapshot_id").get<std::string>();
  r.timestamp = j.at("timestamp").get<int64_t>();
  r.load_error = j.value("load_error", false);
  r.error = j.value("error", "");
  if (r.load_error) return r;
  r.ne_fp32 = j.at("ne_fp32").get<float>();
  r.ne_lowp = j.at("ne_lowp").get<float>();
  r.ne_diff = j.at("ne_diff").get<float>();
  for (const auto& e : j.at("top_layer_errors"))
    r.top_layer_errors.emplace_back(e.at("node").get<std::string>(),
                                    e.at("error").get<double>());
  r.alert = j.at("alert").get<bool>();
  r.scheme_hash = j.at("scheme_hash").get<std::string>();
  return r;
}

namespace {

int64_t file_mtime_seconds(const std::string& path) {
  const auto t = fs::last_write_time(path);
  return std::chrono::duration_cast<std::chrono::seconds>(
             t.time_since_epoch())
      .count();
}

}  // namespace

MonitorResult monitor_run(const std::string& snapshot_dir,
                          const QuantScheme& scheme,
                          const EvalDataset* fallback_eval,
                          const EvalDataset* fallback_calib,
                          const MonitorConfig& cfg,
                          const std::string& log_path) {
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(snapshot_dir)) {
    const std::string p = entry.path().string();
    if (p.size() > 5 && p.substr(p.size() - 5) == ".json" &&
        p.find(".calib") == std::string::npos &&
        p.find(".eval") == std::string::npos)
      stems.push_back(p.substr(0, p.size() - 5));
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty())
    throw std::runtime_error("monitor: no snapshots in " + snapshot_dir);

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::app);
    if (!log) throw std::runtime_error("monitor: cannot open log " + log_path);
  }

  MonitorResult result;
  const std::string scheme_hash = to_hex(scheme.hash());
  bool have_frozen_calib = false;
  CalibrationData frozen_calib;

  for (const auto& stem : stems) {
    SnapshotRecord rec;
    rec.snapshot_id = stem.substr(stem.find_last_of('/') + 1);
    rec.scheme_hash = scheme_hash;
    try {
      rec.timestamp = file_mtime_seconds(stem + ".json");
      const ModelGraph snapshot = load_model(stem);
      const ModelGraph fused = fuse_fc_relu(snapshot);

      EvalDataset eval_slice, calib_slice;
      if (fs::exists(stem + ".eval.jsonl"))
        eval_slice = load_dataset(stem + ".eval.jsonl");
      else if (fallback_eval)
        eval_slice = *fallback_eval;
      else
        throw std::runtime_error("no eval slice for " + rec.snapshot_id);
      if (fs::exists(stem + ".calib.jsonl"))
        calib_slice = load_dataset(stem + ".calib.jsonl");
      else if (fallback_calib)
        calib_slice = *fallback_calib;
      else
        calib_slice = eval_slice;

      if (cfg.recalibrate || !have_frozen_calib) {
        frozen_calib = collect_calibration(fused, calib_slice);
        have_frozen_calib = true;
      }
      const ModelGraph quantized = apply_scheme(fused, scheme, frozen_calib);

      const auto preds_fp32 = run_dataset(fused, eval_slice, cfg.backend);
      const auto preds_lowp = run_dataset(quantized, eval_slice, cfg.backend);
      const NEResult ne_fp32 = normalized_entropy(preds_fp32, eval_slice);
      const NEResult ne_lowp = normalized_entropy(preds_lowp, eval_slice);
      const NEComparison cmp = ne_diff(ne_lowp, ne_fp32);
      rec.ne_fp32 = cmp.ne_fp32;
      rec.ne_lowp = cmp.ne_lowp;
      rec.ne_diff = cmp.ne_diff;
      rec.alert = rec.ne_diff > cfg.threshold;

      const size_t probe_n = std::min(cfg.probe_batch, eval_slice.size());
      const auto errors = per_layer_error(
          quantized, fused, to_batch(eval_slice, 0, probe_n), cfg.backend);
      std::vector<std::pair<std::string, double>> sorted(errors.begin(),
                                                         errors.end());
      std::stable_sort(
          sorted.begin(), sorted.end(),
          [](const auto& a, const auto& b) { return a.second > b.second; });
      if (sorted.size() > 5) sorted.resize(5);
      rec.top_layer_errors = std::move(sorted);
    } catch (const std::exception& e) {
      rec.load_error = true;
      rec.error = e.what();
    }
    result.any_alert = result.any_alert || rec.alert;
    if (log.is_open()) log << rec.to_json_line() << '\n';
    result.records.push_back(std::move(rec));
  }
  return result;
}

EmulationRecord emulation_compare(const ModelGraph& snapshot,
                                  const QuantScheme& scheme,
                                  const CalibrationData& calib,
                                  const EvalDataset& eval,
                                  const Backend& emulation,
                                  const Backend& reference) {
  const ModelGraph fused = fuse_fc_relu(snapshot);
  const ModelGraph quantized = apply_scheme(fused, scheme, calib);

  const auto preds_ref = run_dataset(quantized, eval, reference);
  const auto preds_emu = run_dataset(quantized, eval, emulation);
  const NEResult ne_ref = normalized_entropy(preds_ref, eval);
  const NEResult ne_emu = normalized_entropy(preds_emu, eval);

  EmulationRecord rec;
  rec.backend_cmp = ne_diff(ne_emu, ne_ref);
  const size_t probe_n = std::min<size_t>(256, eval.size());
  rec.per_layer = backend_layer_diff(quantized, to_batch(eval, 0, probe_n),
                                     emulation, reference);
  return rec;
}

}  // namespace lpq
