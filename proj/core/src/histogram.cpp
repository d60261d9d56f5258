// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpq {

Histogram::Histogram(int bins) : counts_(static_cast<size_t>(bins), 0) {
  if (bins < 2) throw std::invalid_argument("Histogram: need at least 2 bins");
}

void Histogram::grow_to_fit(double x) {
  // Double the covered width toward the side that needs it, moving old
  // counts to the bin holding their former midpoint.
  while (x < lo_ || x > hi_) {
    const double width = hi_ - lo_;
    double new_lo = lo_, new_hi = hi_;
    if (x < lo_)
      new_lo = lo_ - width;
    else
      new_hi = hi_ + width;
    const int n = bins();
    std::vector<uint64_t> moved(counts_.size(), 0);
    const double old_step = width / n;
    const double new_step = (new_hi - new_lo) / n;
    for (int i = 0; i < n; ++i) {
      if (counts_[i] == 0) continue;
      const double mid = lo_ + (i + 0.5) * old_step;
      int j = static_cast<int>((mid - new_lo) / new_step);
      j = std::clamp(j, 0, n - 1);
      moved[j] += counts_[i];
    }
    counts_ = std::move(moved);
    lo_ = new_lo;
    hi_ = new_hi;
  }
}

void Histogram::observe(std::span<const float> values) {
  if (values.empty()) return;
  for (float v : values) {
    if (!std::isfinite(v))
      throw std::domain_error("Histogram::observe: non-finite element");
  }
  if (!has_bounds_) {
    float mn = values[0], mx = values[0];
    for (float v : values) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    lo_ = mn;
    hi_ = mx;
    if (lo_ == hi_) hi_ = lo_ + std::max(std::fabs(lo_) * 1e-3, 1e-6);
    running_min_ = mn;
    running_max_ = mx;
    has_bounds_ = true;
  }
  const int n = bins();
  for (float v : values) {
    running_min_ = std::min(running_min_, v);
    running_max_ = std::max(running_max_, v);
    if (v < lo_ || v > hi_) grow_to_fit(v);
    const double step = (hi_ - lo_) / n;
    int i = static_cast<int>((v - lo_) / step);
    i = std::clamp(i, 0, n - 1);
    ++counts_[i];
    ++total_;
  }
}

Histogram Histogram::merge(const Histogram& a, const Histogram& b) {
  if (a.total_ == 0) return b;
  if (b.total_ == 0) return a;
  if (a.bins() != b.bins())
    throw std::invalid_argument("Histogram::merge: bin count mismatch");

  Histogram out(a.bins());
  out.has_bounds_ = true;
  out.lo_ = std::min(a.lo_, b.lo_);
  out.hi_ = std::max(a.hi_, b.hi_);
  out.running_min_ = std::min(a.running_min_, b.running_min_);
  out.running_max_ = std::max(a.running_max_, b.running_max_);
  out.total_ = a.total_ + b.total_;
  const int n = out.bins();
  const double step = (out.hi_ - out.lo_) / n;
  auto add = [&](const Histogram& h) {
    const double hstep = (h.hi_ - h.lo_) / n;
    for (int i = 0; i < n; ++i) {
      if (h.counts_[i] == 0) continue;
      const double mid = h.lo_ + (i + 0.5) * hstep;
      int j = static_cast<int>((mid - out.lo_) / step);
      j = std::clamp(j, 0, n - 1);
      out.counts_[j] += h.counts_[i];
    }
  };
  add(a);
  add(b);
  return out;
}

double Histogram::modeled_l2_error(double w_lo, double w_hi,
                                   IntRange range) const {
  const int n = bins();
  const double step = (hi_ - lo_) / n;
  const double qstep = (w_hi - w_lo) / range.span();
  const double inside = qstep * qstep / 12.0;
  double err = 0.0;
  for (int i = 0; i < n; ++i) {
    if (counts_[i] == 0) continue;
    const double mid = lo_ + (i + 0.5) * step;
    if (mid < w_lo) {
      const double d = w_lo - mid;
      err += static_cast<double>(counts_[i]) * d * d;
    } else if (mid > w_hi) {
      const double d = mid - w_hi;
      err += static_cast<double>(counts_[i]) * d * d;
    } else {
      err += static_cast<double>(counts_[i]) * inside;
    }
  }
  return err;
}

std::pair<float, float> Histogram::derive_range(RangeMethod method,
                                                IntRange range) const {
  if (total_ == 0) throw std::runtime_error("derive_range: empty histogram");

  switch (method.kind) {
    case RangeMethod::Kind::MinMax:
      return {running_min_, running_max_};

    case RangeMethod::Kind::Percentile: {
      const double tail = (1.0 - method.q) / 2.0;
      const double lo_target = tail * static_cast<double>(total_);
      const double hi_target = (1.0 - tail) * static_cast<double>(total_);
      const int n = bins();
      const double step = (hi_ - lo_) / n;
      auto interp = [&](double target) -> double {
        double cum = 0.0;
        for (int i = 0; i < n; ++i) {
          const double next = cum + static_cast<double>(counts_[i]);
          if (next >= target) {
            const double frac =
                counts_[i] == 0 ? 0.0 : (target - cum) / counts_[i];
            return lo_ + (i + frac) * step;
          }
          cum = next;
        }
        return hi_;
      };
      double a = interp(lo_target);
      double b = interp(hi_target);
      a = std::clamp(a, static_cast<double>(running_min_),
                     static_cast<double>(running_max_));
      b = std::clamp(b, static_cast<double>(running_min_),
                     static_cast<double>(running_max_));
      return {static_cast<float>(a), static_cast<float>(b)};
    }

    case RangeMethod::Kind::L2Min: {
      const int n = bins();
      constexpr int kGrid = 64;
      const int stride = std::max(1, n / kGrid);

      double best_lo = running_min_, best_hi = running_max_;
      double best_err = modeled_l2_error(best_lo, best_hi, range);
      double best_width = best_hi - best_lo;
      const double step = (hi_ - lo_) / n;

      for (int s = 0; s < n; s += stride) {
        for (int e = s + stride; e <= n; e += stride) {
          const double w_lo = lo_ + s * step;
          const double w_hi = lo_ + e * step;
          const double err = modeled_l2_error(w_lo, w_hi, range);
          const double width = w_hi - w_lo;
          if (err < best_err ||
              (err == best_err && width > best_width)) {
            best_err = err;
            best_lo = w_lo;
            best_hi = w_hi;
            best_width = width;
          }
        }
      }
      best_lo = std::clamp(best_lo, static_cast<double>(running_min_),
                           static_cast<double>(running_max_));
      best_hi = std::clamp(best_hi, static_cast<double>(running_min_),
                           static_cast<double>(running_max_));
      return {static_cast<float>(best_lo), static_cast<float>(best_hi)};
    }
  }
  throw std::logic_error("derive_range: unreachable");
}

Histogram Histogram::from_state(double lo, double hi,
                                std::vector<uint64_t> counts, float running_min,
                                float running_max, uint64_t total) {
  Histogram h(static_cast<int>(counts.size()));
  h.lo_ = lo;
  h.hi_ = hi;
  h.counts_ = std::move(counts);
  h.running_min_ = running_min;
  h.running_max_ = running_max;
  h.total_ = total;
  h.has_bounds_ = total > 0;
  return h;
}

}  // namespace lpq
