// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "lpq/quant.hpp"

namespace lpq {

enum class Precision { Fp32, Fp16, Int8 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

/// One quantization recipe applied to every layer.
struct GlobalScheme {
  RangeMethod act_range = RangeMethod::minmax();
  RangeMethod weight_range = RangeMethod::minmax();
  Granularity weight_granularity = Granularity::PerTensor;
  bool skip_last_fc = false;
  Precision fallback_precision = Precision::Fp16;

  std::string label() const;
};

/// Per-layer refinement step. Applied on top of the global scheme, in listed
/// order; Skip is terminal for a layer.
struct LayerOverride {
  enum class Action { PerChannelWeights, PercentileActs, L2MinActs, Skip };
  std::string node;
  Action action = Action::PerChannelWeights;
  double q = 0.99;  // PercentileActs only
};

std::string to_string(LayerOverride::Action a);

struct QuantScheme {
  GlobalScheme global;
  std::vector<LayerOverride> overrides;

  /// All-skip scheme at the given fallback precision.
  static QuantScheme all_skip(Precision fallback = Precision::Fp16);

  void save(const std::string& path) const;
  static QuantScheme load(const std::string& path);
  std::string to_json_string() const;
  static QuantScheme from_json_string(const std::string& text);

  uint64_t hash() const;
};

/// Resolved per-layer settings after folding overrides into the global
/// scheme.
struct LayerQuantConfig {
  bool skip = false;
  Granularity weight_granularity = Granularity::PerTensor;
  RangeMethod act_range = RangeMethod::minmax();
  RangeMethod weight_range = RangeMethod::minmax();
};

LayerQuantConfig resolve_layer(const QuantScheme& scheme,
                               const std::string& node, bool is_last_fc);

}  // namespace lpq
