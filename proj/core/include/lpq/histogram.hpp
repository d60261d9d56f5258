// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lpq/quant.hpp"

namespace lpq {

/// Streaming activation histogram with uniform bins. Bounds grow by doubling
/// outward when an element falls outside; existing counts are redistributed
/// by bin midpoint. Exact running extrema are tracked separately so minmax
/// ranges never suffer binning error.
class Histogram {
 public:
  static constexpr int kDefaultBins = 2048;

  explicit Histogram(int bins = kDefaultBins);

  /// Throws on NaN elements; +-inf are rejected too (nothing sane to bin).
  void observe(std::span<const float> values);

  static Histogram merge(const Histogram& a, const Histogram& b);

  /// Derive a quantization range. Throws if the histogram is empty.
  ///   minmax     -> exact running extrema
  ///   percentile -> bin-interpolated quantile bounds, (1-q)/2 per tail
  ///   l2min      -> window minimizing modeled quantization error
  std::pair<float, float> derive_range(RangeMethod method,
                                       IntRange range = IntRange::u8()) const;

  /// Modeled squared error of clipping to [w_lo, w_hi] and quantizing with
  /// `range` levels: in-window bins contribute count * step^2/12, outside
  /// bins count * (midpoint distance to the nearest clip edge)^2.
  double modeled_l2_error(double w_lo, double w_hi, IntRange range) const;

  uint64_t total() const { return total_; }
  float running_min() const { return running_min_; }
  float running_max() const { return running_max_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int bins() const { return static_cast<int>(counts_.size()); }
  const std::vector<uint64_t>& counts() const { return counts_; }

  // Raw-state accessors for (de)serialization.
  static Histogram from_state(double lo, double hi, std::vector<uint64_t> counts,
                              float running_min, float running_max,
                              uint64_t total);

 private:
  void grow_to_fit(double x);

  double lo_ = 0.0, hi_ = 0.0;
  bool has_bounds_ = false;
  std::vector<uint64_t> counts_;
  float running_min_ = 0.0f, running_max_ = 0.0f;
  uint64_t total_ = 0;
};

}  // namespace lpq
