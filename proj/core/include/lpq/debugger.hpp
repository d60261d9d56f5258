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

/// Reduced debugging unit: a sampled dataset plus the model with embedding
/// tables shrunk to exactly the referenced rows. Construction verifies that
/// predictions are bitwise unchanged.
struct DebugBundle {
  EvalDataset samples;
  ModelGraph model;
  // Per table: old row id at each new index (sorted ascending).
  std::vector<std::vector<int32_t>> kept_rows;
  uint64_t seed = 0;
  std::string source_hash;  // FNV of the source dataset bytes
};

DebugBundle extract_bundle(const ModelGraph& model, const EvalDataset& ds,
                           size_t n, uint64_t seed);

void save_bundle(const DebugBundle& b, const std::string& dir);
DebugBundle load_bundle(const std::string& dir);

/// Per-sample cross-entropy deltas, descending; ties keep sample order.
struct SampleRank {
  size_t index = 0;
  double delta = 0.0;  // CE(lowp) - CE(fp32)
  double ce_lowp = 0.0;
  double ce_fp32 = 0.0;
};

std::vector<SampleRank> rank_samples(const DebugBundle& bundle,
                                     const ModelGraph& g_lowp,
                                     const ModelGraph& g_fp32,
                                     const Backend& backend = {});

/// Shadow comparison over the bundle, descending by relative error.
std::vector<OpErrorRecord> shadow_run(const DebugBundle& bundle,
                                      const ModelGraph& g_lowp,
                                      const ModelGraph& g_fp32,
                                      const Backend& backend = {});

// --- bitwise backend comparison --------------------------------------------

struct NodeDiff {
  std::string node;
  std::string kind;
  bool bitwise_equal = true;
  size_t diff_count = 0;
  size_t first_diff_index = 0;
  double max_abs_diff = 0.0;
};

struct BackendDiffReport {
  bool identical = true;
  std::string first_divergence;  // node name, empty when identical
  std::vector<NodeDiff> nodes;   // topological order
  std::string operand_dump;      // inputs/outputs around the divergence
};

/// Run one graph under two backends and compare every wire bit for bit.
BackendDiffReport compare_backends(const ModelGraph& g, const Backend& a,
                                   const Backend& b, const Batch& batch);

/// Relative L2 per node between two backends' executions (tolerance-based
/// sibling of compare_backends, for emulation studies).
std::vector<std::pair<std::string, double>> backend_layer_diff(
    const ModelGraph& g, const Batch& batch, const Backend& a,
    const Backend& b);

// --- report -----------------------------------------------------------------

struct DebugReportOptions {
  int top_ops = 10;
  int top_samples = 20;
  double skip_suggestion_threshold = 0.05;
  double tune_suggestion_threshold = 0.005;
};

std::string debug_report_text(const std::vector<OpErrorRecord>& records,
                              const std::vector<SampleRank>& samples,
                              const DebugReportOptions& opts = {});
std::string debug_report_json(const std::vector<OpErrorRecord>& records,
                              const std::vector<SampleRank>& samples,
                              const DebugReportOptions& opts = {});

}  // namespace lpq
