// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpq/calibration.hpp"
#include "lpq/dataset.hpp"
#include "lpq/graph.hpp"
#include "lpq/metrics.hpp"

namespace lpq {

struct SearchConfig {
  float ne_diff_max = 0.0005f;        // accuracy gate
  float max_skip_flops_ratio = 0.2f;  // skip budget, fraction of FC flops
  size_t small_eval_size = 2000;
  size_t calib_size = 5120;
  float small_full_gap_max = 0.0001f;
  int max_iterations = 24;
  int max_confirm_retries = 3;
  size_t probe_batch = 256;  // samples used for per-layer error ranking
  uint64_t seed = 7;
  int jobs = 1;
};

/// Line-delimited audit log: every candidate, every refinement step.
class SearchLog {
 public:
  void record(std::string json_line) { lines_.push_back(std::move(json_line)); }
  const std::vector<std::string>& lines() const { return lines_; }
  void write(const std::string& path) const;

 private:
  std::vector<std::string> lines_;
};

struct SearchDatasets {
  EvalDataset calibration;
  EvalDataset small_eval;
};

/// Seeded uniform sampling without replacement. The eval sample is redrawn
/// (up to 10 times) until both label classes are present.
SearchDatasets sample_datasets(const EvalDataset& train_source,
                               const EvalDataset& eval_source,
                               const SearchConfig& cfg);

/// The fixed global candidate set: act range x weight range x granularity x
/// skip-last (24 candidates), cheapest variants first.
std::vector<GlobalScheme> enumerate_global_schemes();

struct CandidateEval {
  GlobalScheme scheme;
  NEComparison cmp;
  double skipped_ratio = 0.0;
};

/// Everything global_search and iterative_refine share: the fused graph, its
/// calibration histograms, and the small-eval reference run.
struct SearchContext {
  ModelGraph fused;
  CalibrationData calib;
  EvalDataset small_eval;
  NEResult ne_ref;
};

SearchContext make_search_context(const ModelGraph& g,
                                  const SearchDatasets& ds,
                                  const SearchConfig& cfg);

struct GlobalSearchOutcome {
  GlobalScheme best;
  NEComparison cmp;
  bool gate_passed = false;
  std::vector<CandidateEval> candidates;
};

/// Stage 1: enumerate global schemes, evaluate each on the small eval set.
/// Candidates whose skip-last cost already breaches the skip budget are
/// excluded. Among gate-passing candidates the cheapest (fewest skipped
/// flops) wins; otherwise plain argmin ne_diff.
GlobalSearchOutcome global_search(const SearchContext& ctx,
                                  const SearchConfig& cfg, SearchLog* log);

enum class SearchStatus { Pass, Fail };

struct SearchResult {
  QuantScheme scheme;
  SearchStatus status = SearchStatus::Fail;
  float ne_diff_small = 0.0f;
  float ne_diff_full = 0.0f;
  double skipped_ratio = 0.0;
  int iterations = 0;
  int resamples = 0;
  std::string failure_reason;
  ModelGraph quantized;
};

/// Stage 2: repeatedly escalate the worst-offending layer through
/// per-channel -> percentile acts -> l2min acts -> skip, re-evaluating after
/// each step. Fails when the skip budget or the iteration budget runs out.
SearchResult iterative_refine(const SearchContext& ctx,
                              const GlobalScheme& best,
                              const SearchConfig& cfg, SearchLog* log);

/// Full-eval confirmation: recompute ne_diff on the complete eval set and
/// flag a small-vs-full gap beyond cfg.small_full_gap_max.
struct ConfirmOutcome {
  SearchResult result;
  bool needs_retry = false;
};
ConfirmOutcome confirm_on_full_eval(SearchResult result, const ModelGraph& g,
                                    const EvalDataset& full_eval,
                                    const SearchConfig& cfg, SearchLog* log);

/// End-to-end workflow: sample -> global -> iterative -> confirm, doubling
/// the small datasets and repeating when the confirmation gap trips.
SearchResult run_search(const ModelGraph& g, const EvalDataset& train_source,
                        const EvalDataset& full_eval, const SearchConfig& cfg,
                        SearchLog* log = nullptr);

}  // namespace lpq
