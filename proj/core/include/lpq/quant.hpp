// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lpq {

/// Target integer range for a quantization. (i_min, i_max) are fixed by the
/// (bit_width, signedness) pair, so they are exposed as accessors instead of
/// stored fields.
struct IntRange {
  int bit_width = 8;       // 4 or 8
  bool is_signed = false;

  int32_t i_min() const { return is_signed ? -(1 << (bit_width - 1)) : 0; }
  int32_t i_max() const {
    return is_signed ? (1 << (bit_width - 1)) - 1 : (1 << bit_width) - 1;
  }
  int32_t span() const { return i_max() - i_min(); }

  static IntRange u8() { return {8, false}; }
  static IntRange s8() { return {8, true}; }
  static IntRange u4() { return {4, false}; }
  static IntRange s4() { return {4, true}; }

  friend bool operator==(const IntRange&, const IntRange&) = default;
};

/// (scale, zeropt) pair: X = scale * (X_q - zeropt). scale > 0 and
/// dequantize(zeropt) == 0 exactly.
struct QuantParams {
  float scale = 1.0f;
  int32_t zeropt = 0;

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// Rowwise (scale, bias) pair: X = scale * X_q + bias. Carried in double
/// precision while quantizing; storage rounds to fp32 metadata for 8-bit rows
/// and fp16 for 4-bit rows (see stored_row_params).
struct RowQuantParams {
  double scale = 1.0;
  double bias = 0.0;
};

enum class Granularity { PerTensor, PerChannel, PerRow };

/// How the effective [X_min, X_max] is chosen from data.
struct RangeMethod {
  enum class Kind { MinMax, Percentile, L2Min };
  Kind kind = Kind::MinMax;
  double q = 0.99;  // central mass kept by Percentile; (1-q)/2 trimmed per tail

  static RangeMethod minmax() { return {Kind::MinMax, 1.0}; }
  static RangeMethod percentile(double q) { return {Kind::Percentile, q}; }
  static RangeMethod l2min() { return {Kind::L2Min, 1.0}; }

  friend bool operator==(const RangeMethod&, const RangeMethod&) = default;
};

std::string to_string(RangeMethod m);
RangeMethod range_method_from_string(const std::string& s);

/// Derive (scale, zeropt) from an observed range. The range is first widened
/// to include 0 so that zero is exactly representable; a degenerate range
/// afterwards (both bounds 0) falls back to scale = 1.
QuantParams compute_qparams(float x_min, float x_max, IntRange range);

/// clip(rnd(x/scale) + zeropt, i_min, i_max). Throws on a non-finite element.
int32_t quantize_value(float x, const QuantParams& p, IntRange range);
std::vector<int32_t> quantize(std::span<const float> x, const QuantParams& p,
                              IntRange range);

float dequantize_value(int32_t q, const QuantParams& p);
std::vector<float> dequantize(std::span<const int32_t> q, const QuantParams& p);

/// Rowwise params: scale = (max-min)/(i_max-i_min), bias = min. A constant
/// row yields scale = 1 with an exact reconstruction.
RowQuantParams compute_row_params(std::span<const float> row, IntRange range);

/// Round the rowwise metadata to its storage precision: fp32 scale/bias for
/// 8-bit rows, fp16 for 4-bit rows.
RowQuantParams stored_row_params(const RowQuantParams& p, IntRange range);

/// clip(rnd((x-bias)/scale), i_min, i_max), packed. 4-bit elements go two per
/// byte, low nibble first; an odd tail leaves the high nibble zero.
std::vector<uint8_t> quantize_row(std::span<const float> row,
                                  const RowQuantParams& p, IntRange range);
std::vector<float> dequantize_row(std::span<const uint8_t> packed, size_t dim,
                                  const RowQuantParams& p, IntRange range);

/// Nibble packing used by the 4-bit layout (normative: low nibble = even
/// index).
std::vector<uint8_t> pack_nibbles(std::span<const uint8_t> nibbles);
std::vector<uint8_t> unpack_nibbles(std::span<const uint8_t> packed,
                                    size_t count);

/// Pick the effective range of raw data under a method. L2Min routes through
/// the histogram window search (see histogram.hpp).
std::pair<float, float> select_range(std::span<const float> data,
                                     RangeMethod method,
                                     IntRange range = IntRange::u8());

/// Symmetric variant for signed weight tensors: returns a > 0 such that
/// [-a, a] is the chosen clip range.
float select_symmetric_absmax(std::span<const float> data, RangeMethod method,
                              IntRange range = IntRange::s8());

/// L2 norm of the roundtrip residual ||x - D(Q(x))||_2.
double quant_error_l2(std::span<const float> x, const QuantParams& p,
                      IntRange range);

}  // namespace lpq
