// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpq/tensor.hpp"

namespace lpq {

/// Weighted binary-labeled sample.
struct LabeledSample {
  std::vector<float> dense;
  std::vector<std::vector<int32_t>> ids;  // per sparse slot
  int label = 0;                          // 0 or 1
  float weight = 1.0f;
};

using EvalDataset = std::vector<LabeledSample>;

/// Line-delimited records: {"dense": [...], "ids": [[...],...],
/// "label": 0|1, "weight": w}.
void save_dataset(const EvalDataset& ds, const std::string& path);
EvalDataset load_dataset(const std::string& path);

Batch to_batch(const EvalDataset& ds);
Batch to_batch(const EvalDataset& ds, size_t begin, size_t end);

}  // namespace lpq
