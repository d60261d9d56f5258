// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/kernels.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

namespace lpq::kernels {

namespace {

float half_round(float x, const HalfPolicy& policy) {
  return from_half(to_half(x, policy));
}

void check_int8_depth(int64_t n) {
  // Worst-case |a_q * w_q| is 255 * 128; the int32 accumulator holds n of
  // them only while n stays below this bound.
  constexpr int64_t kMaxDepth =
      std::numeric_limits<int32_t>::max() / (255 * 128);
  if (n > kMaxDepth)
    throw std::overflow_error(
        "int8 fc: reduction depth " + std::to_string(n) +
        " can overflow the int32 accumulator (max " +
        std::to_string(kMaxDepth) + ")");
}

}  // namespace

Tensor fc_fp32(const Tensor& x, std::span<const float> w,
               std::span<const float> bias, int64_t n, int64_t k,
               bool fused_relu) {
  const int64_t m = x.rows();
  if (x.cols() != n) throw std::invalid_argument("fc: input width mismatch");
  Tensor y{m, k};
  for (int64_t i = 0; i < m; ++i) {
    const float* xi = x.data.data() + i * n;
    for (int64_t j = 0; j < k; ++j) {
      const float* wj = w.data() + j * n;
      float acc = 0.0f;
      for (int64_t t = 0; t < n; ++t) acc += xi[t] * wj[t];
      acc += bias[j];
      if (fused_relu && acc < 0.0f) acc = 0.0f;
      y.at(i, j) = acc;
    }
  }
  return y;
}

Tensor fc_fp16_storage(const Tensor& x, std::span<const uint16_t> w_half,
                       std::span<const float> bias, int64_t n, int64_t k,
                       bool fused_relu) {
  std::vector<float> w(w_half.size());
  for (size_t i = 0; i < w_half.size(); ++i) w[i] = from_half(Half{w_half[i]});
  return fc_fp32(x, w, bias, n, k, fused_relu);
}

Tensor fc_fp16_compute(const Tensor& x, std::span<const uint16_t> w_half,
                       std::span<const float> bias, int64_t n, int64_t k,
                       AccumMode accum, bool fused_relu,
                       const HalfPolicy& policy) {
  const int64_t m = x.rows();
  if (x.cols() != n) throw std::invalid_argument("fc: input width mismatch");
  Tensor y{m, k};
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      const uint16_t* wj = w_half.data() + j * n;
      if (accum == AccumMode::Fp32) {
        float acc = 0.0f;
        for (int64_t t = 0; t < n; ++t) {
          const float a = half_round(x.at(i, t), policy);
          const float prod = half_round(a * from_half(Half{wj[t]}), policy);
          acc += prod;
        }
        acc += bias[j];
        if (fused_relu && acc < 0.0f) acc = 0.0f;
        y.at(i, j) = half_round(acc, policy);
      } else {
        float acc = 0.0f;  // always holds an fp16-representable value
        for (int64_t t = 0; t < n; ++t) {
          const float a = half_round(x.at(i, t), policy);
          const float prod = half_round(a * from_half(Half{wj[t]}), policy);
          acc = half_round(acc + prod, policy);
        }
        acc = half_round(acc + half_round(bias[j], policy), policy);
        if (fused_relu && acc < 0.0f) acc = 0.0f;
        y.at(i, j) = acc;
      }
    }
  }
  return y;
}

Int8Weights Int8Weights::quantize(std::span<const float> w, int64_t n,
                                  int64_t k, Granularity gran,
                                  RangeMethod method) {
  if (gran == Granularity::PerRow)
    throw std::invalid_argument("fc weights: per-row granularity is for tables");
  Int8Weights out;
  out.n = n;
  out.k = k;
  out.data.resize(static_cast<size_t>(n * k));
  const IntRange r = IntRange::s8();
  auto quant_slice = [&](std::span<const float> slice, int8_t* dst,
                         float absmax) {
    const QuantParams p{absmax / static_cast<float>(r.i_max()), 0};
    for (size_t t = 0; t < slice.size(); ++t)
      dst[t] = static_cast<int8_t>(quantize_value(slice[t], p, r));
    return p.scale;
  };
  if (gran == Granularity::PerTensor) {
    const float a = select_symmetric_absmax(w, method, r);
    out.scales.push_back(quant_slice(w, out.data.data(), a));
  } else {
    out.scales.resize(static_cast<size_t>(k));
    for (int64_t j = 0; j < k; ++j) {
      const std::span<const float> row{w.data() + j * n,
                                       static_cast<size_t>(n)};
      const float a = select_symmetric_absmax(row, method, r);
      out.scales[static_cast<size_t>(j)] =
          quant_slice(row, out.data.data() + j * n, a);
    }
  }
  out.col_offsets.resize(static_cast<size_t>(k));
  for (int64_t j = 0; j < k; ++j) {
    int32_t s = 0;
    for (int64_t t = 0; t < n; ++t) s += out.data[j * n + t];
    out.col_offsets[static_cast<size_t>(j)] = s;
  }
  return out;
}

namespace {

// Shared integer stage: corrected[i,j] = sum_t a*w - z_a*coloff[j] (+ int32
// bias when requested), relu-clamped in integer space when fused.
void fc_int8_accumulate(const QTensor& x, const Int8Weights& w,
                        std::span<const float> bias, bool int32_bias,
                        bool fused_relu, std::vector<int32_t>& corrected,
                        std::vector<double>& out_scale) {
  check_int8_depth(w.n);
  const int64_t m = x.rows(), n = w.n, k = w.k;
  if (x.cols() != n) throw std::invalid_argument("int8 fc: width mismatch");
  corrected.resize(static_cast<size_t>(m * k));
  out_scale.resize(static_cast<size_t>(k));
  const int32_t z_a = x.params.zeropt;
  const double s_a = x.params.scale;
  std::vector<int32_t> bias_q;
  for (int64_t j = 0; j < k; ++j) {
    out_scale[static_cast<size_t>(j)] =
        s_a * static_cast<double>(w.scale_for(j));
  }
  if (int32_bias) {
    bias_q.resize(static_cast<size_t>(k));
    for (int64_t j = 0; j < k; ++j)
      bias_q[static_cast<size_t>(j)] = static_cast<int32_t>(round_half_even(
          static_cast<double>(bias[j]) / out_scale[static_cast<size_t>(j)]));
  }
  for (int64_t i = 0; i < m; ++i) {
    const uint8_t* ai = x.data.data() + i * n;
    for (int64_t j = 0; j < k; ++j) {
      const int8_t* wj = w.data.data() + j * n;
      int32_t acc = 0;
      for (int64_t t = 0; t < n; ++t)
        acc += static_cast<int32_t>(ai[t]) * static_cast<int32_t>(wj[t]);
      acc -= z_a * w.col_offsets[static_cast<size_t>(j)];
      if (int32_bias) acc += bias_q[static_cast<size_t>(j)];
      if (fused_relu && int32_bias && acc < 0) acc = 0;
      corrected[static_cast<size_t>(i * k + j)] = acc;
    }
  }
}

}  // namespace

QTensor fc_int8_requant(const QTensor& x, const Int8Weights& w,
                        std::span<const float> bias, const QuantParams& out,
                        bool fused_relu, std::vector<int32_t>* accum_out) {
  std::vector<int32_t> corrected;
  std::vector<double> scale;
  fc_int8_accumulate(x, w, bias, /*int32_bias=*/true, fused_relu, corrected,
                     scale);
  if (accum_out) *accum_out = corrected;
  const int64_t m = x.rows(), k = w.k;
  QTensor y;
  y.dims = {m, k};
  y.data.resize(static_cast<size_t>(m * k));
  y.params = out;
  const double inv_so = 1.0 / static_cast<double>(out.scale);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      const double real =
          scale[static_cast<size_t>(j)] *
          static_cast<double>(corrected[static_cast<size_t>(i * k + j)]);
      const int64_t q = round_half_even(real * inv_so) + out.zeropt;
      y.data[static_cast<size_t>(i * k + j)] =
          static_cast<uint8_t>(std::clamp<int64_t>(q, 0, 255));
    }
  }
  return y;
}

Tensor fc_int8_dequant(const QTensor& x, const Int8Weights& w,
                       std::span<const float> bias, bool fused_relu,
                       std::vector<int32_t>* accum_out) {
  std::vector<int32_t> corrected;
  std::vector<double> scale;
  fc_int8_accumulate(x, w, bias, /*int32_bias=*/false, /*fused_relu=*/false,
                     corrected, scale);
  if (accum_out) *accum_out = corrected;
  const int64_t m = x.rows(), k = w.k;
  Tensor y{m, k};
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      float v = static_cast<float>(
          scale[static_cast<size_t>(j)] *
              static_cast<double>(corrected[static_cast<size_t>(i * k + j)]) +
          static_cast<double>(bias[j]));
      if (fused_relu && v < 0.0f) v = 0.0f;
      y.at(i, j) = v;
    }
  }
  return y;
}

Tensor sls_fp32(const Tensor& table,
                const std::vector<std::vector<int32_t>>& ids, AccumMode accum) {
  const int64_t dim = table.cols();
  const int64_t m = static_cast<int64_t>(ids.size());
  Tensor y{m, dim};
  for (int64_t i = 0; i < m; ++i) {
    for (int32_t id : ids[static_cast<size_t>(i)]) {
      if (id < 0 || id >= table.rows())
        throw std::out_of_range("sls: id " + std::to_string(id) +
                                " outside table of " +
                                std::to_string(table.rows()) + " rows");
      const float* row = table.data.data() + static_cast<int64_t>(id) * dim;
      float* out = y.data.data() + i * dim;
      if (accum == AccumMode::Fp32) {
        for (int64_t d = 0; d < dim; ++d) out[d] += row[d];
      } else {
        for (int64_t d = 0; d < dim; ++d)
          out[d] = half_round(out[d] + half_round(row[d], {}), {});
      }
    }
  }
  return y;
}

RowwiseTable RowwiseTable::quantize(const Tensor& table, IntRange range) {
  RowwiseTable t;
  t.rows = table.rows();
  t.dim = table.cols();
  t.range = range;
  t.params.resize(static_cast<size_t>(t.rows));
  t.data.resize(static_cast<size_t>(t.rows) * t.row_bytes());
  for (int64_t r = 0; r < t.rows; ++r) {
    const auto row = table.row(r);
    const RowQuantParams p = compute_row_params(row, range);
    const auto packed = quantize_row(row, p, range);
    std::copy(packed.begin(), packed.end(),
              t.data.begin() + static_cast<size_t>(r) * t.row_bytes());
    t.params[static_cast<size_t>(r)] = stored_row_params(p, range);
  }
  return t;
}

std::vector<float> RowwiseTable::dequantize_full() const {
  std::vector<float> out;
  out.reserve(static_cast<size_t>(rows * dim));
  for (int64_t r = 0; r < rows; ++r) {
    const std::span<const uint8_t> packed{
        data.data() + static_cast<size_t>(r) * row_bytes(), row_bytes()};
    const auto vals = dequantize_row(packed, static_cast<size_t>(dim),
                                     params[static_cast<size_t>(r)], range);
    out.insert(out.end(), vals.begin(), vals.end());
  }
  return out;
}

Tensor sls_rowwise(const RowwiseTable& table,
                   const std::vector<std::vector<int32_t>>& ids,
                   AccumMode accum) {
  const int64_t dim = table.dim;
  const int64_t m = static_cast<int64_t>(ids.size());
  Tensor y{m, dim};
  std::vector<float> row(static_cast<size_t>(dim));
  for (int64_t i = 0; i < m; ++i) {
    float* out = y.data.data() + i * dim;
    for (int32_t id : ids[static_cast<size_t>(i)]) {
      if (id < 0 || id >= table.rows)
        throw std::out_of_range("sls: id outside table");
      const std::span<const uint8_t> packed{
          table.data.data() + static_cast<size_t>(id) * table.row_bytes(),
          table.row_bytes()};
      const auto vals =
          dequantize_row(packed, static_cast<size_t>(dim),
                         table.params[static_cast<size_t>(id)], table.range);
      if (accum == AccumMode::Fp32) {
        for (int64_t d = 0; d < dim; ++d) out[d] += vals[static_cast<size_t>(d)];
      } else {
        for (int64_t d = 0; d < dim; ++d)
          out[d] = half_round(
              out[d] + half_round(vals[static_cast<size_t>(d)], {}), {});
      }
    }
  }
  return y;
}

float sigmoid_exact(float x) {
  return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

float swish_exact(float x) {
  const double xd = x;
  return static_cast<float>(xd / (1.0 + std::exp(-xd)));
}

Lut::Lut(const LutSpec& spec, double (*f)(double)) : spec_(spec) {
  if (!(spec.lo < spec.hi) || spec.entries < 2)
    throw std::invalid_argument("Lut: bad spec");
  table_.resize(static_cast<size_t>(spec.entries));
  const double step = (static_cast<double>(spec.hi) - spec.lo) /
                      (spec.entries - 1);
  for (int i = 0; i < spec.entries; ++i)
    table_[static_cast<size_t>(i)] =
        static_cast<float>(f(static_cast<double>(spec.lo) + i * step));
}

float Lut::eval(float x) const {
  const double lo = spec_.lo, hi = spec_.hi;
  double xd = x;
  if (xd < lo) xd = lo;
  if (xd > hi) xd = hi;
  const int n = spec_.entries;
  const double step = (hi - lo) / (n - 1);
  const double pos = (xd - lo) / step;
  int i = static_cast<int>(pos);
  if (i >= n - 1) i = n - 2;
  const double frac = pos - i;

  if (spec_.interp == LutSpec::Interp::Linear) {
    const double a = table_[static_cast<size_t>(i)];
    const double b = table_[static_cast<size_t>(i + 1)];
    return static_cast<float>(a + frac * (b - a));
  }
  // Quadratic: Lagrange through (i-1, i, i+1); shift at the edges.
  int c = std::clamp(i, 1, n - 2);
  const double t = pos - c;  // in [-1, 1]
  const double ym = table_[static_cast<size_t>(c - 1)];
  const double y0 = table_[static_cast<size_t>(c)];
  const double yp = table_[static_cast<size_t>(c + 1)];
  const double val =
      y0 + 0.5 * t * (yp - ym) + 0.5 * t * t * (yp - 2.0 * y0 + ym);
  return static_cast<float>(val);
}

namespace {
std::map<std::tuple<float, float, int, int>, Lut>& lut_cache() {
  static std::map<std::tuple<float, float, int, int>, Lut> cache;
  return cache;
}
std::mutex lut_mutex;

const Lut& cached_lut(const LutSpec& spec, double (*f)(double), int tag) {
  std::scoped_lock lock(lut_mutex);
  auto key = std::make_tuple(spec.lo, spec.hi,
                             spec.entries * 2 + static_cast<int>(spec.interp),
                             tag);
  auto it = lut_cache().find(key);
  if (it == lut_cache().end())
    it = lut_cache().emplace(key, Lut(spec, f)).first;
  return it->second;
}

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double swish_d(double x) { return x / (1.0 + std::exp(-x)); }
}  // namespace

const Lut& Lut::sigmoid(const LutSpec& spec) {
  return cached_lut(spec, &sigmoid_d, 0);
}
const Lut& Lut::swish(const LutSpec& spec) { return cached_lut(spec, &swish_d, 1); }

void relu_inplace(Tensor& t) {
  for (float& v : t.data)
    if (v < 0.0f) v = 0.0f;
}

Tensor sigmoid(const Tensor& t, const Lut* lut) {
  Tensor y = t;
  for (float& v : y.data) v = lut ? lut->eval(v) : sigmoid_exact(v);
  return y;
}

Tensor swish(const Tensor& t, const Lut* lut) {
  Tensor y = t;
  for (float& v : y.data) v = lut ? lut->eval(v) : swish_exact(v);
  return y;
}

namespace {

void bmm_dims(const Tensor& a, const Tensor& c, bool transpose_b, int64_t& b,
              int64_t& p, int64_t& q, int64_t& r) {
  if (a.dims.size() != 3 || c.dims.size() != 3)
    throw std::invalid_argument("batchmatmul: rank-3 operands required");
  b = a.dims[0];
  p = a.dims[1];
  q = a.dims[2];
  const int64_t cq = transpose_b ? c.dims[2] : c.dims[1];
  r = transpose_b ? c.dims[1] : c.dims[2];
  if (c.dims[0] != b || cq != q)
    throw std::invalid_argument("batchmatmul: shape mismatch");
}

}  // namespace

Tensor batchmatmul_fp32(const Tensor& a, const Tensor& c, bool transpose_b) {
  int64_t b, p, q, r;
  bmm_dims(a, c, transpose_b, b, p, q, r);
  Tensor y{b, p, r};
  for (int64_t bi = 0; bi < b; ++bi) {
    const float* ab = a.data.data() + bi * p * q;
    const float* cb = c.data.data() + bi * (transpose_b ? r * q : q * r);
    float* yb = y.data.data() + bi * p * r;
    for (int64_t i = 0; i < p; ++i) {
      for (int64_t j = 0; j < r; ++j) {
        float acc = 0.0f;
        for (int64_t t = 0; t < q; ++t) {
          const float cv = transpose_b ? cb[j * q + t] : cb[t * r + j];
          acc += ab[i * q + t] * cv;
        }
        yb[i * r + j] = acc;
      }
    }
  }
  return y;
}

Tensor batchmatmul_fp16(const Tensor& a, const Tensor& c, AccumMode accum,
                        bool transpose_b, const HalfPolicy& policy) {
  int64_t b, p, q, r;
  bmm_dims(a, c, transpose_b, b, p, q, r);
  Tensor y{b, p, r};
  for (int64_t bi = 0; bi < b; ++bi) {
    const float* ab = a.data.data() + bi * p * q;
    const float* cb = c.data.data() + bi * (transpose_b ? r * q : q * r);
    float* yb = y.data.data() + bi * p * r;
    for (int64_t i = 0; i < p; ++i) {
      for (int64_t j = 0; j < r; ++j) {
        float acc32 = 0.0f;
        float acc16 = 0.0f;
        for (int64_t t = 0; t < q; ++t) {
          const float cv = transpose_b ? cb[j * q + t] : cb[t * r + j];
          const float prod = half_round(
              half_round(ab[i * q + t], policy) * half_round(cv, policy),
              policy);
          if (accum == AccumMode::Fp32)
            acc32 += prod;
          else
            acc16 = half_round(acc16 + prod, policy);
        }
        yb[i * r + j] = accum == AccumMode::Fp32 ? half_round(acc32, policy)
                                                 : acc16;
      }
    }
  }
  return y;
}

QTensor quantize_op(const Tensor& t, const QuantParams& p, IntRange range) {
  QTensor q;
  q.dims = t.dims;
  q.params = p;
  q.range = range;
  q.data.resize(static_cast<size_t>(t.numel()));
  for (size_t i = 0; i < q.data.size(); ++i)
    q.data[i] = static_cast<uint8_t>(quantize_value(t.data[i], p, range));
  return q;
}

Tensor dequantize_op(const QTensor& t) {
  Tensor y;
  y.dims = t.dims;
  y.data.resize(static_cast<size_t>(t.numel()));
  for (size_t i = 0; i < y.data.size(); ++i)
    y.data[i] = dequantize_value(static_cast<int32_t>(t.data[i]), t.params);
  return y;
}

}  // namespace lpq::kernels
