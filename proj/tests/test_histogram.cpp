// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "lpq/histogram.hpp"

using namespace lpq;

TEST_CASE("observe tracks totals and running extrema") {
  Histogram h;
  const float x[] = {1.0f, 2.0f, 3.0f};
  h.observe(x);
  CHECK(h.total() == 3);
  CHECK(h.running_min() == 1.0f);
  CHECK(h.running_max() == 3.0f);
}

TEST_CASE("two observes equal one combined observe") {
  Histogram a;
  const float x1[] = {1.0f, 2.0f};
  const float x2[] = {-4.0f, 9.0f, 2.5f};
  a.observe(x1);
  a.observe(x2);

  Histogram b;
  const float all[] = {1.0f, 2.0f, -4.0f, 9.0f, 2.5f};
  b.observe(all);

  CHECK(a.total() == b.total());
  CHECK(a.running_min() == b.running_min());
  CHECK(a.running_max() == b.running_max());
}

TEST_CASE("minmax derivation returns exact running extrema") {
  std::mt19937 rng(17);
  std::normal_distribution<float> n01(0.0f, 1.0f);
  Histogram h;
  float mn = INFINITY, mx = -INFINITY;
  for (int batch = 0; batch < 100; ++batch) {
    std::vector<float> x(1000);
    for (auto& v : x) {
      v = n01(rng);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    h.observe(x);
  }
  const auto [lo, hi] = h.derive_range(RangeMethod::minmax());
  CHECK(lo == mn);
  CHECK(hi == mx);
}

TEST_CASE("single-bin mass collapses every method to that point") {
  Histogram h;
  std::vector<float> x(100, 2.5f);
  h.observe(x);
  for (auto m : {RangeMethod::minmax(), RangeMethod::percentile(0.99),
                 RangeMethod::l2min()}) {
    const auto [lo, hi] = h.derive_range(m, IntRange::u8());
    CHECK(lo >= 2.5f - 1e-2f);
    CHECK(hi <= 2.5f + 1e-2f);
  }
}

TEST_CASE("l2min narrows the window when the bulk dominates") {
  std::mt19937 rng(23);
  std::normal_distribution<float> n01(0.0f, 1.0f);
  Histogram h;
  std::vector<float> x(100000);
  for (int batch = 0; batch < 10; ++batch) {
    for (auto& v : x) v = n01(rng);
    h.observe(x);
  }
  const float outlier[] = {15.0f};
  h.observe(outlier);

  const auto [lo, hi] = h.derive_range(RangeMethod::l2min(), IntRange::u8());
  CHECK(hi <= 8.0f);
  CHECK(h.modeled_l2_error(lo, hi, IntRange::u8()) <=
        h.modeled_l2_error(h.running_min(), h.running_max(), IntRange::u8()));
}

TEST_CASE("percentile quantiles on a uniform histogram") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Histogram h;
  std::vector<float> x(200000);
  for (auto& v : x) v = u(rng);
  h.observe(x);

  const auto [lo, hi] = h.derive_range(RangeMethod::percentile(0.99));
  const double bin_w = (h.hi() - h.lo()) / h.bins();
  CHECK(std::fabs(lo - 0.005) <= bin_w + 2e-3);
  CHECK(std::fabs(hi - 0.995) <= bin_w + 2e-3);
}

TEST_CASE("out-of-range growth keeps totals") {
  Histogram h;
  const float x[] = {0.0f, 1.0f};
  h.observe(x);
  const float far[] = {1000.0f, -1000.0f};
  h.observe(far);
  CHECK(h.total() == 4);
  CHECK(h.lo() <= -1000.0);
  CHECK(h.hi() >= 1000.0);
  const auto [lo, hi] = h.derive_range(RangeMethod::minmax());
  CHECK(lo == -1000.0f);
  CHECK(hi == 1000.0f);
}

TEST_CASE("merge adds totals exactly and stays within a bin of streaming") {
  std::mt19937 rng(37);
  std::normal_distribution<float> d1(0.0f, 1.0f), d2(3.0f, 0.5f);
  Histogram a, b, combined;
  std::vector<float> xa(5000), xb(5000);
  for (auto& v : xa) v = d1(rng);
  for (auto& v : xb) v = d2(rng);
  a.observe(xa);
  b.observe(xb);
  combined.observe(xa);
  combined.observe(xb);

  const Histogram m = Histogram::merge(a, b);
  CHECK(m.total() == a.total() + b.total());
  CHECK(m.running_min() == combined.running_min());
  CHECK(m.running_max() == combined.running_max());

  const auto [mlo, mhi] = m.derive_range(RangeMethod::percentile(0.98));
  const auto [clo, chi] = combined.derive_range(RangeMethod::percentile(0.98));
  const double bin_w = (m.hi() - m.lo()) / m.bins() +
                       (combined.hi() - combined.lo()) / combined.bins();
  CHECK(std::fabs(mlo - clo) <= bin_w);
  CHECK(std::fabs(mhi - chi) <= bin_w);
}

TEST_CASE("merge is commutative") {
  std::mt19937 rng(41);
  std::normal_distribution<float> d(0.0f, 2.0f);
  Histogram a, b;
  std::vector<float> xa(1000), xb(3000);
  for (auto& v : xa) v = d(rng);
  for (auto& v : xb) v = d(rng) + 1.0f;
  a.observe(xa);
  b.observe(xb);
  const Histogram ab = Histogram::merge(a, b);
  const Histogram ba = Histogram::merge(b, a);
  CHECK(ab.counts() == ba.counts());
  CHECK(ab.lo() == ba.lo());
  CHECK(ab.hi() == ba.hi());
}

TEST_CASE("l2min never loses to the min-max window") {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    std::normal_distribution<float> d(0.0f, 1.0f + trial * 0.3f);
    Histogram h;
    std::vector<float> x(2000);
    for (auto& v : x) v = d(rng);
    if (trial % 2) x.push_back(50.0f * (trial % 3 ? 1.0f : -1.0f));
    h.observe(x);
    const auto [lo, hi] = h.derive_range(RangeMethod::l2min(), IntRange::u8());
    REQUIRE(lo <= hi);
    REQUIRE(lo >= h.running_min());
    REQUIRE(hi <= h.running_max());
    REQUIRE(h.modeled_l2_error(lo, hi, IntRange::u8()) <=
            h.modeled_l2_error(h.running_min(), h.running_max(),
                               IntRange::u8()));
  }
}

TEST_CASE("error paths") {
  Histogram h;
  CHECK_THROWS(h.derive_range(RangeMethod::minmax()));
  const float bad[] = {1.0f, NAN};
  CHECK_THROWS_AS(h.observe(bad), std::domain_error);
}
