// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "lpq/histogram.hpp"
#include "lpq/kernels.hpp"

#include "lpq/half.hpp"
#include "lpq/quant.hpp"

using namespace lpq;

namespace {
float ulp_of(float x) {
  return std::nextafterf(std::fabs(x), INFINITY) - std::fabs(x);
}
}  // namespace

TEST_CASE("compute_qparams on a symmetric range") {
  const QuantParams p = compute_qparams(-1.0f, 1.0f, IntRange::u8());
  CHECK(p.scale == doctest::Approx(2.0 / 255).epsilon(1e-7));
  CHECK(p.zeropt == 128);
  CHECK(dequantize_value(p.zeropt, p) == 0.0f);
}

TEST_CASE("compute_qparams degenerate range") {
  const QuantParams p = compute_qparams(0.0f, 0.0f, IntRange::u8());
  CHECK(p.scale == 1.0f);
  CHECK(p.zeropt == 255);
  CHECK(quantize_value(0.0f, p, IntRange::u8()) == 255);
  CHECK(dequantize_value(200, p) == doctest::Approx(-55.0));
}

TEST_CASE("compute_qparams identity mapping") {
  const QuantParams p = compute_qparams(0.0f, 255.0f, IntRange::u8());
  CHECK(p.scale == 1.0f);
  CHECK(p.zeropt == 0);
}

TEST_CASE("quantize examples") {
  const QuantParams p{static_cast<float>(2.0 / 255), 128};
  CHECK(quantize_value(0.0f, p, IntRange::u8()) == 128);
  CHECK(quantize_value(1.0f, p, IntRange::u8()) == 255);  // clipped at i_max
  CHECK(quantize_value(-3.0f, p, IntRange::u8()) == 0);
  CHECK_THROWS_AS(quantize_value(NAN, p, IntRange::u8()), std::domain_error);
  CHECK_THROWS_AS(quantize_value(INFINITY, p, IntRange::u8()),
                  std::domain_error);
}

TEST_CASE("dequantize examples") {
  const QuantParams p{static_cast<float>(2.0 / 255), 128};
  CHECK(dequantize_value(128, p) == 0.0f);
  CHECK(dequantize_value(255, p) == doctest::Approx(0.99608).epsilon(1e-4));
  CHECK(dequantize_value(0, p) == doctest::Approx(-1.00392).epsilon(1e-4));
}

TEST_CASE("row params") {
  {
    const float row[] = {0.0f, 0.5f, 1.0f};
    const RowQuantParams p = compute_row_params(row, IntRange::u8());
    CHECK(p.scale == doctest::Approx(1.0 / 255).epsilon(1e-12));
    CHECK(p.bias == 0.0);
  }
  {
    const float row[] = {3.25f, 3.25f, 3.25f};
    const RowQuantParams p = compute_row_params(row, IntRange::u8());
    CHECK(p.scale == 1.0);
    CHECK(p.bias == 3.25);
    const auto q = quantize_row(row, p, IntRange::u8());
    CHECK(q == std::vector<uint8_t>{0, 0, 0});
    const auto back = dequantize_row(q, 3, p, IntRange::u8());
    for (float v : back) CHECK(v == 3.25f);
  }
  {
    const float row[] = {0.0f, 1.0f};
    const RowQuantParams p = compute_row_params(row, IntRange::u4());
    CHECK(p.scale == doctest::Approx(1.0 / 15).epsilon(1e-12));
    CHECK(p.bias == 0.0);
  }
}

TEST_CASE("quantize_row produces the expected codes and packing") {
  {
    const float row[] = {0.0f, 0.5f, 1.0f};
    const RowQuantParams p = compute_row_params(row, IntRange::u8());
    const auto q = quantize_row(row, p, IntRange::u8());
    CHECK(q == std::vector<uint8_t>{0, 128, 255});
    const auto sp = stored_row_params(p, IntRange::u8());
    const auto back = dequantize_row(q, 3, sp, IntRange::u8());
    CHECK(back[0] == 0.0f);  // row minimum reconstructs the stored bias
    CHECK(back[1] == doctest::Approx(0.50196).epsilon(1e-4));
    CHECK(back[2] == doctest::Approx(1.0).epsilon(1e-6));
  }
  {
    const float row[] = {0.0f, 1.0f};
    const RowQuantParams p = compute_row_params(row, IntRange::u4());
    const auto q = quantize_row(row, p, IntRange::u4());
    REQUIRE(q.size() == 1);
    CHECK(q[0] == 0xf0);  // low nibble = element 0
    const auto sp = stored_row_params(p, IntRange::u4());
    const auto back = dequantize_row(q, 2, sp, IntRange::u4());
    CHECK(back[0] == 0.0f);
    CHECK(back[1] == doctest::Approx(1.0).epsilon(1e-3));  // fp16 metadata
  }
}

TEST_CASE("row minimum always reconstructs the stored bias bitwise") {
  std::mt19937 rng(11);
  std::normal_distribution<float> dist(0.0f, 2.0f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> row(17);
    for (auto& v : row) v = dist(rng);
    for (IntRange range : {IntRange::u8(), IntRange::u4()}) {
      const RowQuantParams p = compute_row_params(row, range);
      const RowQuantParams sp = stored_row_params(p, range);
      const auto q = quantize_row(row, p, range);
      const auto back = dequantize_row(q, row.size(), sp, range);
      const size_t argmin =
          std::min_element(row.begin(), row.end()) - row.begin();
      REQUIRE(back[argmin] == static_cast<float>(sp.bias));
      // Max reconstructs within the metadata rounding budget: one step each
      // for the stored scale and bias.
      const size_t argmax =
          std::max_element(row.begin(), row.end()) - row.begin();
      const float mn = row[argmin], mx = row[argmax];
      const float rel = range.bit_width == 4 ? (1.0f / 1024) : (3.0f / (1 << 23));
      const float tol = ((mx - mn) + std::fabs(mn)) * rel + 1e-6f;
      REQUIRE(std::fabs(back[argmax] - mx) <= tol);
    }
  }
}

TEST_CASE("nibble packing is a bijection") {
  std::mt19937 rng(5);
  std::vector<uint8_t> nibbles(4096);
  for (auto& n : nibbles) n = static_cast<uint8_t>(rng() & 0xf);
  const auto packed = pack_nibbles(nibbles);
  const auto back = unpack_nibbles(packed, nibbles.size());
  CHECK(back == nibbles);
  const auto repacked = pack_nibbles(back);
  CHECK(repacked == packed);
  // Odd length leaves the final high nibble clear.
  const uint8_t odd[] = {0xa, 0xb, 0xc};
  const auto p = pack_nibbles(odd);
  CHECK(p == std::vector<uint8_t>{0xba, 0x0c});
}

TEST_CASE("select_range") {
  const float data[] = {-2.0f, 0.0f, 7.0f};
  const auto [lo, hi] = select_range(data, RangeMethod::minmax());
  CHECK(lo == -2.0f);
  CHECK(hi == 7.0f);

  std::mt19937 rng(9);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> with_outlier(10000);
  for (auto& v : with_outlier) v = u(rng);
  with_outlier.push_back(100.0f);
  const auto [plo, phi] =
      select_range(with_outlier, RangeMethod::percentile(0.99));
  CHECK(phi < 2.0f);
  CHECK(plo >= 0.0f);
}

TEST_CASE("l2min clips an outlier once the bulk outweighs the clip cost") {
  // With squared-error weighting, a lone far outlier is cheap to keep and
  // expensive to clip; the window narrows only when the resolution gain
  // over the bulk beats the outlier's squared clip distance.
  std::mt19937 rng(13);
  std::normal_distribution<float> n01(0.0f, 1.0f);
  std::vector<float> data(1000000);
  for (auto& v : data) v = n01(rng);
  data.push_back(15.0f);

  const auto [lo, hi] = select_range(data, RangeMethod::l2min(), IntRange::u8());
  CHECK(hi <= 8.0f);
  CHECK(lo >= -8.0f);

  // The chosen window's modeled error cannot exceed the min-max window's,
  // here and in the lone-extreme-outlier regime.
  Histogram h;
  h.observe(data);
  CHECK(h.modeled_l2_error(lo, hi, IntRange::u8()) <=
        h.modeled_l2_error(h.running_min(), h.running_max(), IntRange::u8()));

  std::vector<float> small(10000);
  for (auto& v : small) v = n01(rng);
  small.push_back(100.0f);
  const auto [slo, shi] =
      select_range(small, RangeMethod::l2min(), IntRange::u8());
  Histogram hs;
  hs.observe(small);
  CHECK(hs.modeled_l2_error(slo, shi, IntRange::u8()) <=
        hs.modeled_l2_error(hs.running_min(), hs.running_max(), IntRange::u8()));
}

TEST_CASE("quant_error_l2") {
  const QuantParams p{0.25f, 128};
  {
    const float grid[] = {-1.0f, -0.25f, 0.0f, 0.5f, 2.0f};
    CHECK(quant_error_l2(grid, p, IntRange::u8()) == 0.0);
  }
  {
    std::mt19937 rng(21);
    std::uniform_real_distribution<float> u(-20.0f, 20.0f);
    std::vector<float> data(4096);
    for (auto& v : data) v = u(rng);
    const double err = quant_error_l2(data, p, IntRange::u8());
    CHECK(err <= 0.25 / 2 * std::sqrt(4096.0) + 1e-3);
  }
  {
    const float out_of_range[] = {100.0f};
    // i_max=255 maps to 0.25*(255-128) = 31.75; the clip residual dominates.
    const double err = quant_error_l2(out_of_range, p, IntRange::u8());
    CHECK(err >= 100.0 - 31.75 - 1e-6);
  }
}

TEST_CASE("roundtrip bound and monotonicity") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<float> bound(-50.0f, 50.0f);
  for (int trial = 0; trial < 300; ++trial) {
    float a = bound(rng), b = bound(rng);
    if (a > b) std::swap(a, b);
    if (a == b) b = a + 1.0f;
    for (IntRange range :
         {IntRange::u8(), IntRange::s8(), IntRange::u4(), IntRange::s4()}) {
      const QuantParams p = compute_qparams(a, b, range);
      std::uniform_real_distribution<float> in(std::min(a, 0.0f),
                                               std::max(b, 0.0f));
      float prev_x = std::min(a, 0.0f);
      int32_t prev_q = quantize_value(prev_x, p, range);
      for (int i = 0; i < 50; ++i) {
        const float x = in(rng);
        const int32_t q = quantize_value(x, p, range);
        const float back = dequantize_value(q, p);
        REQUIRE(std::fabs(x - back) <=
                p.scale / 2 + 2 * ulp_of(x) + 1e-7f);
        if (x >= prev_x)
          REQUIRE(q >= prev_q);
        else
          REQUIRE(q <= prev_q);
        prev_x = x;
        prev_q = q;
      }
    }
  }
}

TEST_CASE("per-channel params equal per-tensor params of each slice") {
  std::mt19937 rng(41);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  const int64_t n = 24, k = 6;
  std::vector<float> w(static_cast<size_t>(n * k));
  for (auto& v : w) v = dist(rng);

  using kernels::Int8Weights;
  const auto per_channel = Int8Weights::quantize(w, n, k, Granularity::PerChannel,
                                                 RangeMethod::minmax());
  for (int64_t j = 0; j < k; ++j) {
    const std::span<const float> slice{w.data() + j * n,
                                       static_cast<size_t>(n)};
    const auto solo = Int8Weights::quantize(slice, n, 1, Granularity::PerTensor,
                                            RangeMethod::minmax());
    REQUIRE(per_channel.scales[static_cast<size_t>(j)] == solo.scales[0]);
    for (int64_t t = 0; t < n; ++t)
      REQUIRE(per_channel.data[static_cast<size_t>(j * n + t)] ==
              solo.data[static_cast<size_t>(t)]);
  }
}
