// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "lpq/metrics.hpp"

using namespace lpq;

namespace {

EvalDataset make_ds(const std::vector<int>& labels,
                    const std::vector<float>& weights = {}) {
  EvalDataset ds;
  for (size_t i = 0; i < labels.size(); ++i) {
    LabeledSample s;
    s.label = labels[i];
    s.weight = weights.empty() ? 1.0f : weights[i];
    ds.push_back(s);
  }
  return ds;
}

}  // namespace

TEST_CASE("cross entropy of single samples") {
  CHECK(cross_entropy_sample(0.5, 1, 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy_sample(0.8, 1, 1.0) ==
        doctest::Approx(0.223144).epsilon(1e-5));
  CHECK(cross_entropy_sample(1.0, 0, 1.0) ==
        doctest::Approx(16.118).epsilon(1e-3));  // clamp at 1 - 1e-7
  CHECK(cross_entropy_sample(0.3, 0, 2.0) ==
        doctest::Approx(-2.0 * std::log(0.7)).epsilon(1e-9));
}

TEST_CASE("constant best-rate predictor scores NE = 1") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> wdist(0.1f, 5.0f);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<int> labels(200);
    std::vector<float> weights(200);
    int pos = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
      labels[i] = (rng() & 1) != 0;
      pos += labels[i];
      weights[i] = wdist(rng);
    }
    if (pos == 0 || pos == 200) continue;
    const EvalDataset ds = make_ds(labels, weights);
    double wy = 0, w = 0;
    for (const auto& s : ds) {
      wy += static_cast<double>(s.weight) * s.label;
      w += s.weight;
    }
    std::vector<float> preds(ds.size(), static_cast<float>(wy / w));
    const NEResult r = normalized_entropy(preds, ds);
    REQUIRE(std::fabs(r.ne - 1.0) <= 1e-6);  // float ne; fp64 ratio below
    REQUIRE(std::fabs(r.numerator / r.denominator - 1.0) <= 1e-12);
  }
}

TEST_CASE("hand-computed NE") {
  const EvalDataset ds = make_ds({1, 1, 0, 0});
  const std::vector<float> preds = {0.8f, 0.7f, 0.3f, 0.2f};
  const NEResult r = normalized_entropy(preds, ds);
  CHECK(r.p_star == doctest::Approx(0.5));
  CHECK(r.numerator == doctest::Approx(1.159637).epsilon(1e-5));
  CHECK(r.denominator == doctest::Approx(2.772589).epsilon(1e-6));
  CHECK(r.ne == doctest::Approx(0.418248).epsilon(1e-5));
}

TEST_CASE("near-perfect predictor drives NE toward zero") {
  const EvalDataset ds = make_ds({1, 0, 1, 0, 1, 0});
  std::vector<float> preds;
  for (const auto& s : ds) preds.push_back(s.label ? 1.0f : 0.0f);
  const NEResult r = normalized_entropy(preds, ds);
  CHECK(r.ne < 1e-5);
}

TEST_CASE("single-class dataset is rejected") {
  const EvalDataset ds = make_ds({1, 1, 1});
  const std::vector<float> preds = {0.5f, 0.5f, 0.5f};
  CHECK_THROWS(normalized_entropy(preds, ds));
}

TEST_CASE("ne_diff") {
  NEResult a, b;
  a.ne = 0.418248f;
  b.ne = 0.418248f;
  CHECK(ne_diff(a, b).ne_diff == 0.0f);

  NEResult lowp;
  lowp.ne = 0.41900f;
  const NEComparison c = ne_diff(lowp, a);
  CHECK(c.ne_diff == doctest::Approx(0.001798).epsilon(1e-3));

  // Gate arithmetic at the deployment threshold.
  CHECK(0.0004f <= 0.0005f);
  CHECK_FALSE(0.0006f <= 0.0005f);

  NEResult better;
  better.ne = 0.41f;
  CHECK(ne_diff(better, a).ne_diff < 0.0f);  // sign preserved
}

TEST_CASE("NE numerator equals the ordered sum of per-sample CE") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> p(0.01f, 0.99f);
  std::uniform_real_distribution<float> w(0.5f, 2.0f);
  std::vector<int> labels(333);
  std::vector<float> weights(333);
  for (size_t i = 0; i < labels.size(); ++i) {
    labels[i] = (rng() & 1) != 0;
    weights[i] = w(rng);
  }
  labels[0] = 0;
  labels[1] = 1;
  const EvalDataset ds = make_ds(labels, weights);
  std::vector<float> preds(ds.size());
  for (auto& v : preds) v = p(rng);

  const NEResult r = normalized_entropy(preds, ds);
  double acc = 0.0;
  for (size_t i = 0; i < ds.size(); ++i)
    acc += cross_entropy_sample(preds[i], ds[i].label, ds[i].weight);
  CHECK(r.numerator == acc);  // bitwise: same fp64 order
}

TEST_CASE("NE is invariant under uniform weight rescaling") {
  const EvalDataset ds = make_ds({1, 0, 1, 1, 0}, {1, 2, 3, 4, 5});
  EvalDataset scaled = ds;
  for (auto& s : scaled) s.weight *= 7.5f;
  const std::vector<float> preds = {0.7f, 0.2f, 0.9f, 0.6f, 0.4f};
  const NEResult a = normalized_entropy(preds, ds);
  const NEResult b = normalized_entropy(preds, scaled);
  CHECK(a.ne == doctest::Approx(b.ne).epsilon(1e-6));
}
