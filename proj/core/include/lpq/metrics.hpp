// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "lpq/dataset.hpp"
#include "lpq/executor.hpp"
#include "lpq/graph.hpp"
#include "lpq/scheme.hpp"

namespace lpq {

/// Predictions are clamped to [kCeEpsilon, 1-kCeEpsilon] before taking logs.
inline constexpr double kCeEpsilon = 1e-7;

/// Weighted per-sample cross entropy, natural log.
double cross_entropy_sample(double p, int label, double weight);

struct NEResult {
  double numerator = 0.0;    // sum of per-sample CE, fp64, dataset order
  double denominator = 0.0;  // CE of the constant-p* predictor
  float ne = 0.0f;
  float p_star = 0.0f;
};

/// Cross entropy normalized by the constant best-rate predictor. Throws if
/// only one label class is present (degenerate denominator).
NEResult normalized_entropy(std::span<const float> preds,
                            const EvalDataset& ds);

struct NEComparison {
  float ne_lowp = 0.0f;
  float ne_fp32 = 0.0f;
  float ne_diff = 0.0f;  // (ne_lowp - ne_fp32) / ne_fp32, sign preserved
};

NEComparison ne_diff(const NEResult& lowp, const NEResult& fp32);

// --- per-layer shadow comparison -------------------------------------------

struct TensorStats {
  double min = 0, max = 0, mean = 0, stddev = 0, p1 = 0, p99 = 0;
  std::vector<uint64_t> hist;  // 16 uniform bins over [min, max]
};

TensorStats compute_stats(std::span<const float> values);

/// One node's shadow comparison: the fp32 twin ran on the same (dequantized)
/// inputs, so the error is local to this operator.
struct OpErrorRecord {
  std::string node;
  std::string kind;
  double rel_l2_error = 0.0;
  TensorStats input, output;
  TensorStats weights;
  bool has_weights = false;
};

/// Shadow-execute g_ref's operators against g_lowp's execution of `batch`:
/// at every comparable node the reference twin consumes the low-precision
/// node's own inputs (dequantized), not the reference model's activations.
/// Nodes are aligned by name; throws on a missing twin.
std::vector<OpErrorRecord> shadow_compare(const ModelGraph& g_lowp,
                                          const ModelGraph& g_ref,
                                          const Batch& batch,
                                          const Backend& backend = {});

/// node -> relative L2 error, descending makes the ranking; map form for
/// direct lookups.
std::map<std::string, double> per_layer_error(const ModelGraph& g_lowp,
                                              const ModelGraph& g_ref,
                                              const Batch& batch,
                                              const Backend& backend = {});

// --- flops accounting -------------------------------------------------------

/// Per-sample flops: 2*n*k per FC (m=1) plus 2*b*p*q*r per BatchMatMul.
double graph_flops(const ModelGraph& g);

/// Fraction of FC flops the scheme leaves unquantized (layer skips plus the
/// skip-last rule).
double skipped_flops_ratio(const ModelGraph& g, const QuantScheme& scheme);

}  // namespace lpq
