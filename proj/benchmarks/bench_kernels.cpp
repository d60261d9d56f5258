// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the reference kernels. These kernels are deliberately
// scalar; the numbers here are for tracking regressions, not for publishing.

#include <benchmark/benchmark.h>

#include <random>

#include "lpq/histogram.hpp"
#include "lpq/kernels.hpp"
#include "lpq/quant.hpp"

using namespace lpq;

namespace {

Tensor random_tensor(int64_t m, int64_t n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  Tensor t{m, n};
  for (auto& v : t.data) v = d(rng);
  return t;
}

void BM_fc_fp32(benchmark::State& state) {
  const int64_t m = state.range(0), n = 512, k = 256;
  const Tensor x = random_tensor(m, n, 1);
  const Tensor w = random_tensor(k, n, 2);
  std::vector<float> bias(static_cast<size_t>(k), 0.1f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::fc_fp32(x, w.data, bias, n, k));
  }
  state.SetItemsProcessed(state.iterations() * m * n * k * 2);
}
BENCHMARK(BM_fc_fp32)->Arg(1)->Arg(16)->Arg(64);

void BM_fc_int8(benchmark::State& state) {
  const int64_t m = state.range(0), n = 512, k = 256;
  const Tensor x = random_tensor(m, n, 3);
  const Tensor w = random_tensor(k, n, 4);
  std::vector<float> bias(static_cast<size_t>(k), 0.1f);
  const QuantParams act = compute_qparams(-4.0f, 4.0f, IntRange::u8());
  const QTensor xq = kernels::quantize_op(x, act, IntRange::u8());
  const auto wq = kernels::Int8Weights::quantize(
      w.data, n, k, Granularity::PerChannel, RangeMethod::minmax());
  const QuantParams out = compute_qparams(-8.0f, 8.0f, IntRange::u8());
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::fc_int8_requant(xq, wq, bias, out));
  }
  state.SetItemsProcessed(state.iterations() * m * n * k * 2);
}
BENCHMARK(BM_fc_int8)->Arg(1)->Arg(16)->Arg(64);

void BM_fc_fp16_compute(benchmark::State& state) {
  const int64_t m = 4, n = 512, k = 64;
  const Tensor x = random_tensor(m, n, 5);
  const Tensor w = random_tensor(k, n, 6);
  std::vector<uint16_t> wh(w.data.size());
  for (size_t i = 0; i < wh.size(); ++i) wh[i] = to_half(w.data[i]).bits;
  std::vector<float> bias(static_cast<size_t>(k), 0.1f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::fc_fp16_compute(
        x, wh, bias, n, k, kernels::AccumMode::Fp32));
  }
}
BENCHMARK(BM_fc_fp16_compute);

void BM_rowwise_quantize(benchmark::State& state) {
  const Tensor table = random_tensor(4096, 32, 7);
  const IntRange range = state.range(0) == 4 ? IntRange::u4() : IntRange::u8();
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::RowwiseTable::quantize(table, range));
  }
  state.SetItemsProcessed(state.iterations() * table.numel());
}
BENCHMARK(BM_rowwise_quantize)->Arg(8)->Arg(4);

void BM_sls_rowwise(benchmark::State& state) {
  const Tensor table = random_tensor(8192, 32, 8);
  const auto q = kernels::RowwiseTable::quantize(
      table, state.range(0) == 4 ? IntRange::u4() : IntRange::u8());
  std::mt19937 rng(9);
  std::vector<std::vector<int32_t>> ids(64);
  for (auto& sample : ids) {
    sample.resize(20);
    for (auto& id : sample) id = static_cast<int32_t>(rng() % 8192);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::sls_rowwise(q, ids));
  }
  state.SetItemsProcessed(state.iterations() * 64 * 20 * 32);
}
BENCHMARK(BM_sls_rowwise)->Arg(8)->Arg(4);

void BM_histogram_observe(benchmark::State& state) {
  const Tensor data = random_tensor(1, 65536, 10);
  for (auto _ : state) {
    Histogram h;
    h.observe(data.data);
    benchmark::DoNotOptimize(h);
  }
  state.SetItemsProcessed(state.iterations() * data.numel());
}
BENCHMARK(BM_histogram_observe);

void BM_l2min_derive(benchmark::State& state) {
  std::mt19937 rng(11);
  std::normal_distribution<float> d(0.0f, 1.0f);
  Histogram h;
  std::vector<float> vals(100000);
  for (auto& v : vals) v = d(rng);
  h.observe(vals);
  for (auto _ : state) {
    benchmark::DoNotOptimize(h.derive_range(RangeMethod::l2min(), IntRange::u8()));
  }
}
BENCHMARK(BM_l2min_derive);

void BM_sigmoid_lut(benchmark::State& state) {
  const kernels::Lut& lut = kernels::Lut::sigmoid({-12.0f, 12.0f, 2048});
  const Tensor x = random_tensor(1, 4096, 12);
  for (auto _ : state) {
    float acc = 0.0f;
    for (float v : x.data) acc += lut.eval(v);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_sigmoid_lut);

}  // namespace

BENCHMARK_MAIN();
