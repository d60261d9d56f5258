// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lpq/dataset.hpp"
#include "lpq/graph.hpp"

namespace lpq {

/// Deterministic RNG helpers: all transforms are spelled out so generated
/// artifacts are identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform();                       // [0, 1)
  double normal(double mean, double stddev);
  bool bernoulli(double p) { return uniform() < p; }
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive bounds
  uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Inverse-CDF sampler for a zipf(s) distribution over ranks 0..n-1.
class ZipfSampler {
 public:
  ZipfSampler(int64_t n, double s);
  int64_t sample(Rng& rng) const;

 private:
  std::vector<double> cdf_;
};

struct FaultSpec {
  enum class Kind { OutlierWeights, WideDynamicRange };
  std::string layer;  // FC node name
  Kind kind = Kind::OutlierWeights;
  float magnitude = 10.0f;  // outlier value (OutlierWeights)
  int count = 32;           // outlier entries (OutlierWeights)
  float sigma_mult = 16.0f; // channel scale spread (WideDynamicRange)
};

struct ModelGenConfig {
  // Table sizes are deliberately skewed; mixed-precision embedding studies
  // need a meaningful "largest half".
  std::vector<int64_t> rows_per_table = {64000, 32000, 16000, 8000,
                                         4000,  2000,  1000, 1000};
  int64_t embedding_dim = 32;
  int64_t dense_dim = 32;
  std::vector<int64_t> bottom_mlp = {64, 32};       // last entry = bottom output
  std::vector<int64_t> top_mlp = {512, 256, 1};     // last entry must be 1
  enum class Interaction { Concat, Dot };
  Interaction interaction = Interaction::Concat;
  double width_mult = 1.0;   // scales every hidden MLP width
  double weight_sigma = 0.0; // 0 -> 1/sqrt(fan_in) per layer
  double table_sigma = 0.1;
  double target_logit_stddev = 1.5;  // last FC rescaled to hit this
  std::vector<FaultSpec> faults;
  uint64_t seed = 1;

  int num_tables() const { return static_cast<int>(rows_per_table.size()); }
};

struct DataGenConfig {
  int64_t n = 10000;
  double zipf_s = 1.2;
  int ids_per_slot = 20;
  double dense_mean = 0.0;
  enum class BatchSampler { Fixed, TypicalMix };
  BatchSampler batch_sampler = BatchSampler::TypicalMix;
  int64_t fixed_batch = 1;
  uint64_t seed = 2;
};

/// Seeded synthetic recommendation model: bottom MLP + embedding lookups +
/// interaction + top MLP + Sigmoid. Always passes validation.
ModelGraph gen_model(const ModelGenConfig& cfg);

/// Features per cfg, prediction from the fp64 teacher pass, labels drawn
/// Bernoulli(p), unit weights.
EvalDataset gen_dataset(const ModelGraph& teacher, const DataGenConfig& cfg);

/// Double-precision forward pass used for label generation.
std::vector<double> predict_fp64(const ModelGraph& g, const Batch& batch);

struct DriftSpec {
  enum class Kind { None, WeightWalk, ActivationShift };
  Kind kind = Kind::None;
  double step = 0.0;  // sigma per snapshot (WeightWalk) or mean shift (ActivationShift)
};

/// Writes snap-000.., each as model (json+bin) plus calibration and eval
/// slices (snap-XXX.calib.jsonl / snap-XXX.eval.jsonl). Snapshot k carries
/// the cumulative drift of k steps.
void gen_snapshots(const ModelGenConfig& model_cfg, const DataGenConfig& data_cfg,
                   int count, const DriftSpec& drift, const std::string& dir,
                   int64_t calib_n = 2048, int64_t eval_n = 2048);

/// Seeded draws from the configured batch-size sampler.
std::vector<int64_t> gen_batch_sizes(const DataGenConfig& cfg, int count);

}  // namespace lpq
