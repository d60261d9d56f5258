// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lpq/graph.hpp"

namespace lpq {

/// Machine description for the roofline model.
struct HardwareSpec {
  std::string name = "broadwell-like";
  double peak_flops = 1e12;      // F
  double efficiency = 0.9;       // E, fraction of peak reachable
  double mem_bandwidth = 70e9;   // B, bytes/s

  static HardwareSpec broadwell_like() { return {}; }
  static HardwareSpec from_json_file(const std::string& path);
};

struct FCShape {
  int64_t m = 1, n = 0, k = 0;
  int weight_bytes_per_element = 4;  // 4 fp32, 2 fp16, 1 int8
};

enum class BoundClass { Memory, Compute };

struct FCLatency {
  double t_comp = 0.0;  // 2mnk / (F*E)
  double t_mem = 0.0;   // bytes*k*n / B (weight traffic only)
  double t = 0.0;       // max of the two
  BoundClass bound = BoundClass::Compute;
};

FCLatency fc_latency(const FCShape& shape, const HardwareSpec& hw);

/// Batch size below which an FC is memory bound: bytes*F*E / (2B).
/// fp32 weights give the familiar 2FE/B form.
double batch_threshold(const HardwareSpec& hw, int bytes_per_element = 4);

/// Discrete batch-size distribution used to weight per-operator estimates.
struct BatchDistribution {
  std::vector<std::pair<int64_t, double>> points;  // (m, probability)

  /// Heavy small-batch mix: 44% of FCs at m=1 and 86% of the mass below 25,
  /// the remainder spread up to 100.
  static BatchDistribution typical();
  static BatchDistribution fixed(int64_t m);
};

struct OpLatencyRow {
  std::string node;
  std::string kind;
  double expected_latency = 0.0;  // seconds, E over the batch distribution
  double bytes_moved = 0.0;       // weight/row traffic at m=1
  double memory_bound_fraction = 0.0;  // probability mass classified memory bound
};

struct GraphLatencyReport {
  std::vector<OpLatencyRow> rows;
  double expected_latency = 0.0;
  double fc_weight_bytes = 0.0;
  double memory_bound_fraction = 0.0;  // over FC evaluations
  std::string to_text() const;
  std::string to_json_string() const;
};

/// Per-operator roofline estimates for every FC/SLS/BatchMatMul node.
/// SparseLengthsSum is modeled as pure memory traffic (rows * row_bytes / B)
/// using each node's pooling hint.
GraphLatencyReport graph_report(const ModelGraph& g, const HardwareSpec& hw,
                                const BatchDistribution& dist);

}  // namespace lpq
