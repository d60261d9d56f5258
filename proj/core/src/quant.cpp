// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lpq/half.hpp"
#include "lpq/histogram.hpp"

namespace lpq {

std::string to_string(RangeMethod m) {
  switch (m.kind) {
    case RangeMethod::Kind::MinMax: return "minmax";
    case RangeMethod::Kind::L2Min: return "l2min";
    case RangeMethod::Kind::Percentile:
      return "percentile:" + std::to_string(m.q);
  }
  return "minmax";
}

RangeMethod range_method_from_string(const std::string& s) {
  if (s == "minmax") return RangeMethod::minmax();
  if (s == "l2min") return RangeMethod::l2min();
  if (s.rfind("percentile", 0) == 0) {
    double q = 0.99;
    auto colon = s.find(':');
    if (colon != std::string::npos) q = std::stod(s.substr(colon + 1));
    if (!(q > 0.0 && q <= 1.0))
      throw std::invalid_argument("percentile q must be in (0, 1]");
    return RangeMethod::percentile(q);
  }
  throw std::invalid_argument("unknown range method: " + s);
}

QuantParams compute_qparams(float x_min, float x_max, IntRange range) {
  if (!(x_min <= x_max))
    throw std::invalid_argument("compute_qparams: x_min > x_max");
  // Widen to include zero so the zero point is representable and exact.
  const double lo = std::min(0.0, static_cast<double>(x_min));
  const double hi = std::max(0.0, static_cast<double>(x_max));

  QuantParams p;
  if (lo == hi) {
    p.scale = 1.0f;
    p.zeropt = range.i_max();  // zeropt formula with scale = 1
    return p;
  }
  const double ispan = range.span();
  p.scale = static_cast<float>((hi - lo) / ispan);
  // Divide last so exact cancellations (e.g. symmetric ranges) survive.
  const double z = range.i_max() - hi * ispan / (hi - lo);
  p.zeropt = static_cast<int32_t>(std::clamp<int64_t>(
      round_half_even(z), range.i_min(), range.i_max()));
  return p;
}

int32_t quantize_value(float x, const QuantParams& p, IntRange range) {
  if (!std::isfinite(x))
    throw std::domain_error("quantize: non-finite element");
  const int64_t q =
      round_half_even(static_cast<double>(x) / static_cast<double>(p.scale)) +
      p.zeropt;
  return static_cast<int32_t>(
      std::clamp<int64_t>(q, range.i_min(), range.i_max()));
}

std::vector<int32_t> quantize(std::span<const float> x, const QuantParams& p,
                              IntRange range) {
  std::vector<int32_t> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = quantize_value(x[i], p, range);
  return out;
}

float dequantize_value(int32_t q, const QuantParams& p) {
  return p.scale * static_cast<float>(q - p.zeropt);
}

std::vector<float> dequantize(std::span<const int32_t> q, const QuantParams& p) {
  std::vector<float> out(q.size());
  for (size_t i = 0; i < q.size(); ++i) out[i] = dequantize_value(q[i], p);
  return out;
}

RowQuantParams compute_row_params(std::span<const float> row, IntRange range) {
  if (row.empty()) throw std::invalid_argument("compute_row_params: empty row");
  float mn = row[0], mx = row[0];
  for (float v : row) {
    if (!std::isfinite(v))
      throw std::domain_error("compute_row_params: non-finite element");
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  RowQuantParams p;
  p.bias = mn;
  p.scale = (mn == mx)
                ? 1.0
                : (static_cast<double>(mx) - mn) / range.span();
  return p;
}

RowQuantParams stored_row_params(const RowQuantParams& p, IntRange range) {
  RowQuantParams s;
  if (range.bit_width == 4) {
    s.scale = from_half(to_half(static_cast<float>(p.scale)));
    s.bias = from_half(to_half(static_cast<float>(p.bias)));
  } else {
    s.scale = static_cast<float>(p.scale);
    s.bias = static_cast<float>(p.bias);
  }
  return s;
}

std::vector<uint8_t> pack_nibbles(std::span<const uint8_t> nibbles) {
  std::vector<uint8_t> out((nibbles.size() + 1) / 2, 0);
  for (size_t i = 0; i < nibbles.size(); ++i) {
    const uint8_t v = nibbles[i] & 0x0f;
    if (i % 2 == 0)
      out[i / 2] = v;
    else
      out[i / 2] |= static_cast<uint8_t>(v << 4);
  }
  return out;
}

std::vector<uint8_t> unpack_nibbles(std::span<const uint8_t> packed,
                                    size_t count) {
  std::vector<uint8_t> out(count);
  for (size_t i = 0; i < count; ++i) {
    const uint8_t byte = packed[i / 2];
    out[i] = (i % 2 == 0) ? (byte & 0x0f) : (byte >> 4);
  }
  return out;
}

std::vector<uint8_t> quantize_row(std::span<const float> row,
                                  const RowQuantParams& p, IntRange range) {
  std::vector<uint8_t> q(row.size());
  for (size_t i = 0; i < row.size(); ++i) {
    if (!std::isfinite(row[i]))
      throw std::domain_error("quantize_row: non-finite element");
    const int64_t v = round_half_even((row[i] - p.bias) / p.scale);
    q[i] = static_cast<uint8_t>(
        std::clamp<int64_t>(v, range.i_min(), range.i_max()) - range.i_min());
  }
  if (range.bit_width == 4) return pack_nibbles(q);
  return q;
}

std::vector<float> dequantize_row(std::span<const uint8_t> packed, size_t dim,
                                  const RowQuantParams& p, IntRange range) {
  const float scale = static_cast<float>(p.scale);
  const float bias = static_cast<float>(p.bias);
  std::vector<uint8_t> q;
  std::span<const uint8_t> vals = packed;
  if (range.bit_width == 4) {
    q = unpack_nibbles(packed, dim);
    vals = q;
  }
  std::vector<float> out(dim);
  for (size_t i = 0; i < dim; ++i) {
    const int32_t v = static_cast<int32_t>(vals[i]) + range.i_min();
    out[i] = scale * static_cast<float>(v) + bias;
  }
  return out;
}

namespace {

std::pair<float, float> percentile_range(std::span<const float> data, double q) {
  std::vector<float> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  auto quantile = [&](double p) -> float {
    if (n == 1) return sorted[0];
    const double pos = p * static_cast<double>(n - 1);
    const size_t i = static_cast<size_t>(pos);
    if (i + 1 >= n) return sorted[n - 1];
    const double frac = pos - static_cast<double>(i);
    return static_cast<float>(sorted[i] + frac * (sorted[i + 1] - sorted[i]));
  };
  const double tail = (1.0 - q) / 2.0;
  return {quantile(tail), quantile(1.0 - tail)};
}

}  // namespace

std::pair<float, float> select_range(std::span<const float> data,
                                     RangeMethod method, IntRange range) {
  if (data.empty()) throw std::invalid_argument("select_range: empty input");
  switch (method.kind) {
    case RangeMethod::Kind::MinMax: {
      float mn = data[0], mx = data[0];
      for (float v : data) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      return {mn, mx};
    }
    case RangeMethod::Kind::Percentile:
      return percentile_range(data, method.q);
    case RangeMethod::Kind::L2Min: {
      Histogram h;
      h.observe(data);
      return h.derive_range(RangeMethod::l2min(), range);
    }
  }
  throw std::logic_error("select_range: unreachable");
}

float select_symmetric_absmax(std::span<const float> data, RangeMethod method,
                              IntRange range) {
  if (data.empty())
    throw std::invalid_argument("select_symmetric_absmax: empty input");
  float absmax = 0.0f;
  for (float v : data) absmax = std::max(absmax, std::fabs(v));
  if (absmax == 0.0f) return 1.0f;  // constant-zero tensor, any scale works

  switch (method.kind) {
    case RangeMethod::Kind::MinMax:
      return absmax;
    case RangeMethod::Kind::Percentile: {
      std::vector<float> mags(data.size());
      for (size_t i = 0; i < data.size(); ++i) mags[i] = std::fabs(data[i]);
      std::sort(mags.begin(), mags.end());
      const double pos = method.q * static_cast<double>(mags.size() - 1);
      const size_t i = static_cast<size_t>(pos);
      const float v = (i + 1 < mags.size())
                          ? static_cast<float>(mags[i] + (pos - i) * (mags[i + 1] - mags[i]))
                          : mags.back();
      return v > 0.0f ? v : absmax;
    }
    case RangeMethod::Kind::L2Min: {
      // Search symmetric clip candidates a = absmax * i/64 against the
      // modeled error of an |data| histogram mapped to [-a, a].
      Histogram h;
      std::vector<float> both;
      both.reserve(data.size());
      for (float v : data) both.push_back(v);
      h.observe(both);
      double best_a = absmax;
      double best_err = h.modeled_l2_error(-absmax, absmax, range);
      constexpr int kSteps = 64;
      for (int i = 1; i < kSteps; ++i) {
        const double a = absmax * static_cast<double>(i) / kSteps;
        const double err = h.modeled_l2_error(-a, a, range);
        if (err < best_err) {
          best_err = err;
          best_a = a;
        }
      }
      return static_cast<float>(best_a);
    }
  }
  throw std::logic_error("select_symmetric_absmax: unreachable");
}

double quant_error_l2(std::span<const float> x, const QuantParams& p,
                      IntRange range) {
  double acc = 0.0;
  for (float v : x) {
    const double r = static_cast<double>(v) -
                     dequantize_value(quantize_value(v, p, range), p);
    acc += r * r;
  }
  return std::sqrt(acc);
}

}  // namespace lpq
