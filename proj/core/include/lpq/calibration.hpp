// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "lpq/histogram.hpp"

namespace lpq {

/// Activation histograms keyed by tensor name, one per observed activation.
struct CalibrationData {
  std::map<std::string, Histogram> tensors;

  bool has(const std::string& name) const { return tensors.count(name) > 0; }
  const Histogram& at(const std::string& name) const;

  static CalibrationData merge(const CalibrationData& a,
                               const CalibrationData& b);

  /// Versioned JSON artifact.
  void save(const std::string& path) const;
  static CalibrationData load(const std::string& path);
};

}  // namespace lpq
