// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpq/dataset.hpp"
#include "lpq/executor.hpp"
#include "lpq/graph.hpp"
#include "lpq/metrics.hpp"

namespace lpq {

struct MonitorConfig {
  float threshold = 0.0005f;
  // When false, activation params stay frozen to the first snapshot's
  // histograms (drift study mode).
  bool recalibrate = true;
  size_t probe_batch = 256;  // per-layer error sample
  Backend backend;
};

struct SnapshotRecord {
  int schema_version = 1;
  std::string snapshot_id;
  int64_t timestamp = 0;  // model file mtime; keeps replays bitwise identical
  bool load_error = false;
  std::string error;
  float ne_fp32 = 0.0f, ne_lowp = 0.0f, ne_diff = 0.0f;
  std::vector<std::pair<std::string, double>> top_layer_errors;  // top 5
  bool alert = false;
  std::string scheme_hash;

  std::string to_json_line() const;
  static SnapshotRecord from_json_line(const std::string& line);
};

struct MonitorResult {
  std::vector<SnapshotRecord> records;
  bool any_alert = false;
};

/// Evaluate every snapshot (snap-*.json in name order) side by side with its
/// quantized form under the frozen scheme. Per-snapshot calibration/eval
/// slices (<stem>.calib.jsonl / <stem>.eval.jsonl) are preferred; the
/// fallbacks cover directories without slices. Snapshot load failures are
/// recorded and monitoring continues. Appends one record per line to
/// `log_path` when non-empty.
MonitorResult monitor_run(const std::string& snapshot_dir,
                          const QuantScheme& scheme,
                          const EvalDataset* fallback_eval,
                          const EvalDataset* fallback_calib,
                          const MonitorConfig& cfg,
                          const std::string& log_path = "");

/// Run one quantized snapshot under an emulation backend and the default
/// backend; the NE difference and per-node deltas guide kernel validation.
struct EmulationRecord {
  NEComparison backend_cmp;  // lowp = emulation, reference = default backend
  std::vector<std::pair<std::string, double>> per_layer;  // descending
};

EmulationRecord emulation_compare(const ModelGraph& snapshot,
                                  const QuantScheme& scheme,
                                  const CalibrationData& calib,
                                  const EvalDataset& eval,
                                  const Backend& emulation,
                                  const Backend& reference = {});

}  // namespace lpq
