// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "lpq/calibration.hpp"
#include "lpq/dataset.hpp"
#include "lpq/graph.hpp"

namespace lpq {

/// Kernel realization choices. The same graph can run under different
/// backends; numeric results differ but each backend is bitwise
/// deterministic.
struct Backend {
  enum class Fp16Mode { Storage, Compute };
  enum class Nonlinear { Exact, Lut };

  std::string name = "default";
  Fp16Mode fp16_mode = Fp16Mode::Storage;
  kernels::AccumMode sls_accum = kernels::AccumMode::Fp32;
  Nonlinear nonlinear = Nonlinear::Exact;
  kernels::LutSpec default_lut{};
  HalfPolicy half_policy = HalfPolicy::defaults();
  // Test double: accumulate reductions right-to-left instead. Numerically a
  // plausible vendor-kernel variation, used to exercise bitwise comparisons.
  bool reversed_accumulation = false;

  /// fp16 as storage only, exact nonlinearities, fp32 accumulation.
  static Backend cpu_reference();
  /// fp16 arithmetic emulation, LUT nonlinearities, fp16 SLS accumulation.
  static Backend accel_emulation();
};

using Value = std::variant<Tensor, QTensor>;

struct ExecutionTrace {
  std::map<std::string, Value> tensors;  // every wire, by name
  std::vector<float> predictions;
};

/// Execute in topological order. Deterministic for fixed (graph, batch,
/// backend).
std::vector<float> run(const ModelGraph& g, const Batch& batch,
                       const Backend& backend = {});
ExecutionTrace run_traced(const ModelGraph& g, const Batch& batch,
                          const Backend& backend = {});

std::vector<float> run_dataset(const ModelGraph& g, const EvalDataset& ds,
                               const Backend& backend = {},
                               size_t batch_size = 512);

/// Collect activation histograms for every FC/FCRelu input and output tensor
/// over the calibration set.
CalibrationData collect_calibration(const ModelGraph& g, const EvalDataset& ds,
                                    const Backend& backend = {},
                                    size_t batch_size = 512);

}  // namespace lpq
