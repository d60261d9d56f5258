// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "lpq/quant.hpp"

namespace lpq {

/// Dense row-major fp32 tensor. Rank 2 (batch x features) almost everywhere;
/// rank 3 for stacked interaction inputs.
struct Tensor {
  std::vector<int64_t> dims;
  std::vector<float> data;

  Tensor() = default;
  Tensor(std::initializer_list<int64_t> d) : dims(d) { data.resize(numel()); }
  explicit Tensor(std::vector<int64_t> d) : dims(std::move(d)) {
    data.resize(numel());
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
  int64_t rows() const { return dims.empty() ? 0 : dims[0]; }
  int64_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }

  float& at(int64_t r, int64_t c) { return data[r * cols() + c]; }
  float at(int64_t r, int64_t c) const { return data[r * cols() + c]; }

  std::span<const float> row(int64_t r) const {
    return {data.data() + r * cols(), static_cast<size_t>(cols())};
  }
  std::span<float> row(int64_t r) {
    return {data.data() + r * cols(), static_cast<size_t>(cols())};
  }
};

/// Quantized activation tensor: uint8 storage plus the (scale, zeropt) that
/// maps it back to real values.
struct QTensor {
  std::vector<int64_t> dims;
  std::vector<uint8_t> data;
  QuantParams params;
  IntRange range = IntRange::u8();

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
  int64_t rows() const { return dims.empty() ? 0 : dims[0]; }
  int64_t cols() const { return dims.size() < 2 ? 1 : dims[1]; }
};

/// One inference batch: dense features plus per-slot sparse id lists
/// (slot -> sample -> ids).
struct Batch {
  Tensor dense;
  std::vector<std::vector<std::vector<int32_t>>> ids;

  int64_t size() const { return dense.rows(); }
};

}  // namespace lpq
