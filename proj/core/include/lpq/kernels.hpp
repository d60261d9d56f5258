// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lpq/half.hpp"
#include "lpq/quant.hpp"
#include "lpq/tensor.hpp"

namespace lpq::kernels {

// Every kernel here accumulates strictly left to right over the reduction
// axis and never uses fused multiply-add, so results are bitwise
// reproducible across platforms and runs.

enum class AccumMode { Fp32, Fp16 };

/// Lookup-table config for nonlinear kernels.
struct LutSpec {
  float lo = -12.0f;
  float hi = 12.0f;
  int entries = 2048;
  enum class Interp { Linear, Quadratic };
  Interp interp = Interp::Linear;
};

// ---------------------------------------------------------------------------
// FullyConnected. Weights are stored output-major: w[j*n + t] is the weight
// of input t for output channel j.
// ---------------------------------------------------------------------------

/// y = x * W^T + b in fp32.
Tensor fc_fp32(const Tensor& x, std::span<const float> w,
               std::span<const float> bias, int64_t n, int64_t k,
               bool fused_relu = false);

/// Weights held as fp16 storage, widened once; math identical to fc_fp32.
Tensor fc_fp16_storage(const Tensor& x, std::span<const uint16_t> w_half,
                       std::span<const float> bias, int64_t n, int64_t k,
                       bool fused_relu = false);

/// Emulated fp16 arithmetic: operands and every product rounded to binary16,
/// accumulation in fp16 or fp32 per `accum`. Output values are
/// fp16-representable.
Tensor fc_fp16_compute(const Tensor& x, std::span<const uint16_t> w_half,
                       std::span<const float> bias, int64_t n, int64_t k,
                       AccumMode accum, bool fused_relu = false,
                       const HalfPolicy& policy = HalfPolicy::defaults());

/// Per-output-channel int8 weight data. `scales` has one entry for
/// per-tensor granularity, k entries for per-channel. Column offsets
/// (per-channel sums of quantized weights) are precomputed once.
struct Int8Weights {
  std::vector<int8_t> data;  // k x n, output-major
  std::vector<float> scales;
  std::vector<int32_t> col_offsets;
  int64_t n = 0, k = 0;

  static Int8Weights quantize(std::span<const float> w, int64_t n, int64_t k,
                              Granularity gran, RangeMethod method);
  float scale_for(int64_t channel) const {
    return scales.size() == 1 ? scales[0] : scales[static_cast<size_t>(channel)];
  }
};

/// Integer pipeline: int32 accumulation of a_q * w_q with the activation
/// zero point compensated through the precomputed column offsets and the
/// bias folded in as int32 (scale s_a*s_w). Output is requantized to uint8
/// with `out` params. When `accum_out` is given the corrected int32
/// accumulator (post relu clamp) is copied out for validation.
QTensor fc_int8_requant(const QTensor& x, const Int8Weights& w,
                        std::span<const float> bias, const QuantParams& out,
                        bool fused_relu = false,
                        std::vector<int32_t>* accum_out = nullptr);

/// Same integer pipeline but dequantizing straight to fp32; bias stays fp32.
Tensor fc_int8_dequant(const QTensor& x, const Int8Weights& w,
                       std::span<const float> bias, bool fused_relu = false,
                       std::vector<int32_t>* accum_out = nullptr);

// ---------------------------------------------------------------------------
// SparseLengthsSum: pooled sum of table rows selected per sample.
// ---------------------------------------------------------------------------

Tensor sls_fp32(const Tensor& table,
                const std::vector<std::vector<int32_t>>& ids,
                AccumMode accum = AccumMode::Fp32);

/// Rowwise-quantized table stored packed; each row is dequantized on the fly
/// (the fp32 table is never materialized).
struct RowwiseTable {
  int64_t rows = 0, dim = 0;
  IntRange range = IntRange::u8();
  std::vector<uint8_t> data;          // rows x packed row bytes
  std::vector<RowQuantParams> params;  // storage-precision metadata per row

  size_t row_bytes() const {
    return range.bit_width == 4 ? (static_cast<size_t>(dim) + 1) / 2
                                : static_cast<size_t>(dim);
  }
  static RowwiseTable quantize(const Tensor& table, IntRange range);
  std::vector<float> dequantize_full() const;
};

Tensor sls_rowwise(const RowwiseTable& table,
                   const std::vector<std::vector<int32_t>>& ids,
                   AccumMode accum = AccumMode::Fp32);

// ---------------------------------------------------------------------------
// Nonlinearities.
// ---------------------------------------------------------------------------

float sigmoid_exact(float x);
float swish_exact(float x);  // x * sigmoid(x)

/// Table of f over [lo, hi] with clamp outside; linear or quadratic
/// interpolation between entries.
class Lut {
 public:
  Lut(const LutSpec& spec, double (*f)(double));
  float eval(float x) const;
  const LutSpec& spec() const { return spec_; }

  static const Lut& sigmoid(const LutSpec& spec);
  static const Lut& swish(const LutSpec& spec);

 private:
  LutSpec spec_;
  std::vector<float> table_;
};

void relu_inplace(Tensor& t);
Tensor sigmoid(const Tensor& t, const Lut* lut = nullptr);
Tensor swish(const Tensor& t, const Lut* lut = nullptr);

// ---------------------------------------------------------------------------
// BatchMatMul over rank-3 operands: (b x p x q) * (b x q x r).
// ---------------------------------------------------------------------------

Tensor batchmatmul_fp32(const Tensor& a, const Tensor& c,
                        bool transpose_b = false);
Tensor batchmatmul_fp16(const Tensor& a, const Tensor& c, AccumMode accum,
                        bool transpose_b = false,
                        const HalfPolicy& policy = HalfPolicy::defaults());

// ---------------------------------------------------------------------------
// Quantize / Dequantize ops (elementwise, delegate to quant).
// ---------------------------------------------------------------------------

QTensor quantize_op(const Tensor& t, const QuantParams& p, IntRange range);
Tensor dequantize_op(const QTensor& t);

}  // namespace lpq::kernels
