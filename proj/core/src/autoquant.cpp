// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/autoquant.hpp"

#include <algorithm>
#include <future>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "lpq/executor.hpp"
#include "lpq/io_util.hpp"

namespace lpq {

using json = nlohmann::ordered_json;

void SearchLog::write(const std::string& path) const {
  std::string text;
  for (const auto& l : lines_) {
    text += l;
    text += '\n';
  }
  write_text_file(path, text);
}

namespace {

void log_entry(SearchLog* log, json j) {
  if (log) log->record(j.dump());
}

std::vector<size_t> sample_without_replacement(size_t population, size_t want,
                                               std::mt19937_64& rng) {
  if (want > population)
    throw std::runtime_error("sample_datasets: requested more samples than available");
  std::vector<size_t> idx(population);
  std::iota(idx.begin(), idx.end(), size_t{0});
  // Partial Fisher-Yates: only the first `want` positions matter.
  for (size_t i = 0; i < want; ++i) {
    const size_t j = i + rng() % (population - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(want);
  std::sort(idx.begin(), idx.end());  // keep source order within the sample
  return idx;
}

EvalDataset take(const EvalDataset& src, const std::vector<size_t>& idx) {
  EvalDataset out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(src[i]);
  return out;
}

bool both_classes(const EvalDataset& ds) {
  bool pos = false, neg = false;
  for (const auto& s : ds) (s.label ? pos : neg) = true;
  return pos && neg;
}

int fancy_count(const GlobalScheme& s) {
  int c = 0;
  if (s.act_range.kind != RangeMethod::Kind::MinMax) ++c;
  if (s.weight_range.kind != RangeMethod::Kind::MinMax) ++c;
  return c;
}

}  // namespace

SearchDatasets sample_datasets(const EvalDataset& train_source,
                               const EvalDataset& eval_source,
                               const SearchConfig& cfg) {
  if (train_source.empty() || eval_source.empty())
    throw std::runtime_error("sample_datasets: empty source");
  std::mt19937_64 rng(cfg.seed);

  SearchDatasets out;
  const size_t calib_n = std::min(cfg.calib_size, train_source.size());
  out.calibration = take(
      train_source, sample_without_replacement(train_source.size(), calib_n, rng));

  const size_t eval_n = std::min(cfg.small_eval_size, eval_source.size());
  for (int attempt = 0;; ++attempt) {
    out.small_eval = take(
        eval_source, sample_without_replacement(eval_source.size(), eval_n, rng));
    if (both_classes(out.small_eval)) break;
    if (attempt >= 10)
      throw std::runtime_error(
          "sample_datasets: could not draw an eval sample with both classes");
  }
  return out;
}

std::vector<GlobalScheme> enumerate_global_schemes() {
  std::vector<GlobalScheme> out;
  const RangeMethod acts[] = {RangeMethod::minmax(), RangeMethod::percentile(0.99),
                              RangeMethod::l2min()};
  const RangeMethod weights[] = {RangeMethod::minmax(), RangeMethod::l2min()};
  for (bool skip_last : {false, true})
    for (const auto& act : acts)
      for (const auto& wr : weights)
        for (Granularity gran : {Granularity::PerTensor, Granularity::PerChannel}) {
          GlobalScheme s;
          s.act_range = act;
          s.weight_range = wr;
          s.weight_granularity = gran;
          s.skip_last_fc = skip_last;
          out.push_back(s);
        }
  return out;
}

SearchContext make_search_context(const ModelGraph& g, const SearchDatasets& ds,
                                  const SearchConfig& cfg) {
  (void)cfg;
  SearchContext ctx;
  ctx.fused = fuse_fc_relu(g);
  ctx.calib = collect_calibration(ctx.fused, ds.calibration);
  ctx.small_eval = ds.small_eval;
  const auto preds = run_dataset(ctx.fused, ctx.small_eval);
  ctx.ne_ref = normalized_entropy(preds, ctx.small_eval);
  return ctx;
}

namespace {

CandidateEval evaluate_candidate(const SearchContext& ctx,
                                 const GlobalScheme& scheme) {
  CandidateEval ce;
  ce.scheme = scheme;
  QuantScheme qs;
  qs.global = scheme;
  const ModelGraph q = apply_scheme(ctx.fused, qs, ctx.calib);
  const auto preds = run_dataset(q, ctx.small_eval);
  ce.cmp = ne_diff(normalized_entropy(preds, ctx.small_eval), ctx.ne_ref);
  ce.skipped_ratio = skipped_flops_ratio(ctx.fused, qs);
  return ce;
}

}  // namespace

GlobalSearchOutcome global_search(const SearchContext& ctx,
                                  const SearchConfig& cfg, SearchLog* log) {
  std::vector<GlobalScheme> schemes;
  for (const auto& s : enumerate_global_schemes()) {
    QuantScheme qs;
    qs.global = s;
    if (skipped_flops_ratio(ctx.fused, qs) > cfg.max_skip_flops_ratio) continue;
    schemes.push_back(s);
  }
  if (schemes.empty())
    throw std::runtime_error("global_search: no candidate fits the skip budget");

  GlobalSearchOutcome out;
  out.candidates.resize(schemes.size());
  const int jobs = std::max(1, cfg.jobs);
  for (size_t begin = 0; begin < schemes.size();
       begin += static_cast<size_t>(jobs)) {
    const size_t end =
        std::min(schemes.size(), begin + static_cast<size_t>(jobs));
    std::vector<std::future<CandidateEval>> futs;
    for (size_t i = begin; i < end; ++i)
      futs.push_back(std::async(jobs > 1 ? std::launch::async
                                         : std::launch::deferred,
                                evaluate_candidate, std::cref(ctx),
                                schemes[i]));
    for (size_t i = begin; i < end; ++i)
      out.candidates[i] = futs[i - begin].get();
  }

  for (const auto& ce : out.candidates)
    log_entry(log, json{{"stage", "global"},
                        {"scheme", ce.scheme.label()},
                        {"ne_diff", ce.cmp.ne_diff},
                        {"ne_lowp", ce.cmp.ne_lowp},
                        {"ne_fp32", ce.cmp.ne_fp32},
                        {"skipped_ratio", ce.skipped_ratio}});

  // Selection: a gate-passing candidate with the fewest skipped flops wins
  // (performance is the point of quantizing); without a passing candidate,
  // lowest ne_diff seeds the iterative stage.
  const CandidateEval* best = nullptr;
  bool best_passes = false;
  auto better = [&](const CandidateEval& a, const CandidateEval& b,
                    bool passing) {
    if (passing && a.skipped_ratio != b.skipped_ratio)
      return a.skipped_ratio < b.skipped_ratio;
    if (a.cmp.ne_diff != b.cmp.ne_diff) return a.cmp.ne_diff < b.cmp.ne_diff;
    return fancy_count(a.scheme) < fancy_count(b.scheme);
  };
  for (const auto& ce : out.candidates) {
    const bool passes = ce.cmp.ne_diff <= cfg.ne_diff_max;
    if (!best || (passes && !best_passes) ||
        (passes == best_passes && better(ce, *best, best_passes))) {
      best = &ce;
      best_passes = passes;
    }
  }
  out.best = best->scheme;
  out.cmp = best->cmp;
  out.gate_passed = best_passes;
  log_entry(log, json{{"stage", "global-selected"},
                      {"scheme", out.best.label()},
                      {"ne_diff", out.cmp.ne_diff},
                      {"gate_passed", out.gate_passed}});
  return out;
}

namespace {

enum class Ladder { None = 0, PerChannel = 1, Percentile = 2, L2Min = 3, Skip = 4 };

Ladder next_step(Ladder done, const GlobalScheme& global) {
  int step = static_cast<int>(done) + 1;
  // Steps the global scheme already provides are no-ops; move past them.
  while (step < static_cast<int>(Ladder::Skip)) {
    if (step == static_cast<int>(Ladder::PerChannel) &&
        global.weight_granularity != Granularity::PerChannel)
      break;
    if (step == static_cast<int>(Ladder::Percentile) &&
        global.act_range.kind != RangeMethod::Kind::Percentile)
      break;
    if (step == static_cast<int>(Ladder::L2Min) &&
        global.act_range.kind != RangeMethod::Kind::L2Min)
      break;
    ++step;
  }
  return static_cast<Ladder>(step);
}

LayerOverride make_override(const std::string& node, Ladder step) {
  LayerOverride o;
  o.node = node;
  switch (step) {
    case Ladder::PerChannel:
      o.action = LayerOverride::Action::PerChannelWeights;
      break;
    case Ladder::Percentile:
      o.action = LayerOverride::Action::PercentileActs;
      o.q = 0.99;
      break;
    case Ladder::L2Min:
      o.action = LayerOverride::Action::L2MinActs;
      break;
    default:
      o.action = LayerOverride::Action::Skip;
      break;
  }
  return o;
}

}  // namespace

SearchResult iterative_refine(const SearchContext& ctx,
                              const GlobalScheme& best,
                              const SearchConfig& cfg, SearchLog* log) {
  SearchResult res;
  res.scheme.global = best;

  const std::string last_fc = ctx.fused.last_fc_name();
  std::map<std::string, Ladder> progress;

  const size_t probe_n = std::min(cfg.probe_batch, ctx.small_eval.size());
  const Batch probe = to_batch(ctx.small_eval, 0, probe_n);

  auto evaluate = [&](const QuantScheme& qs) {
    res.quantized = apply_scheme(ctx.fused, qs, ctx.calib);
    const auto preds = run_dataset(res.quantized, ctx.small_eval);
    return ne_diff(normalized_entropy(preds, ctx.small_eval), ctx.ne_ref);
  };

  NEComparison cmp = evaluate(res.scheme);
  res.ne_diff_small = cmp.ne_diff;

  while (true) {
    if (cmp.ne_diff <= cfg.ne_diff_max) {
      res.status = SearchStatus::Pass;
      break;
    }
    if (res.iterations >= cfg.max_iterations) {
      res.status = SearchStatus::Fail;
      res.failure_reason = "iteration budget exhausted";
      break;
    }

    // Rank the still-quantized layers by shadow error.
    const auto errors = per_layer_error(res.quantized, ctx.fused, probe);
    std::string worst;
    double worst_err = -1.0;
    for (const auto& name : ctx.fused.fc_names()) {
      if (resolve_layer(res.scheme, name, name == last_fc).skip) continue;
      const auto it = errors.find(name);
      if (it != errors.end() && it->second > worst_err) {
        worst_err = it->second;
        worst = name;
      }
    }
    if (worst.empty()) {
      res.status = SearchStatus::Fail;
      res.failure_reason = "accuracy gate unmet with every layer skipped or clean";
      break;
    }

    const Ladder step = next_step(progress[worst], best);
    progress[worst] = step;

    if (step == Ladder::Skip) {
      QuantScheme tentative = res.scheme;
      tentative.overrides.push_back(make_override(worst, step));
      const double ratio = skipped_flops_ratio(ctx.fused, tentative);
      if (ratio > cfg.max_skip_flops_ratio) {
        res.status = SearchStatus::Fail;
        res.failure_reason = "skip budget exceeded at layer " + worst;
        log_entry(log, json{{"stage", "iterative"},
                            {"iteration", res.iterations},
                            {"layer", worst},
                            {"action", "skip"},
                            {"rejected", "skip budget"},
                            {"skipped_ratio", ratio}});
        break;
      }
      res.scheme = std::move(tentative);
    } else {
      res.scheme.overrides.push_back(make_override(worst, step));
    }

    cmp = evaluate(res.scheme);
    res.ne_diff_small = cmp.ne_diff;
    ++res.iterations;
    log_entry(log,
              json{{"stage", "iterative"},
                   {"iteration", res.iterations},
                   {"layer", worst},
                   {"layer_error", worst_err},
                   {"action", to_string(res.scheme.overrides.back().action)},
                   {"ne_diff", cmp.ne_diff}});
  }

  res.skipped_ratio = skipped_flops_ratio(ctx.fused, res.scheme);
  return res;
}

ConfirmOutcome confirm_on_full_eval(SearchResult result, const ModelGraph& g,
                                    const EvalDataset& full_eval,
                                    const SearchConfig& cfg, SearchLog* log) {
  const ModelGraph fused = fuse_fc_relu(g);
  const auto ref_preds = run_dataset(fused, full_eval);
  const NEResult ne_ref = normalized_entropy(ref_preds, full_eval);
  const auto preds = run_dataset(result.quantized, full_eval);
  const NEComparison cmp =
      ne_diff(normalized_entropy(preds, full_eval), ne_ref);
  result.ne_diff_full = cmp.ne_diff;

  ConfirmOutcome out;
  const float gap = std::fabs(result.ne_diff_full - result.ne_diff_small);
  out.needs_retry = gap > cfg.small_full_gap_max;
  log_entry(log, json{{"stage", "confirm"},
                      {"ne_diff_small", result.ne_diff_small},
                      {"ne_diff_full", result.ne_diff_full},
                      {"gap", gap},
                      {"needs_retry", out.needs_retry}});
  out.result = std::move(result);
  return out;
}

SearchResult run_search(const ModelGraph& g, const EvalDataset& train_source,
                        const EvalDataset& full_eval, const SearchConfig& cfg,
                        SearchLog* log) {
  SearchConfig round_cfg = cfg;
  SearchResult result;

  for (int round = 0;; ++round) {
    const SearchDatasets ds = sample_datasets(train_source, full_eval, round_cfg);
    const SearchContext ctx = make_search_context(g, ds, round_cfg);

    const GlobalSearchOutcome global = global_search(ctx, round_cfg, log);
    if (global.gate_passed) {
      result = SearchResult{};
      result.scheme.global = global.best;
      result.status = SearchStatus::Pass;
      result.ne_diff_small = global.cmp.ne_diff;
      result.quantized = apply_scheme(ctx.fused, result.scheme, ctx.calib);
      result.skipped_ratio = skipped_flops_ratio(ctx.fused, result.scheme);
    } else {
      result = iterative_refine(ctx, global.best, round_cfg, log);
    }
    result.resamples = round;

    if (result.status == SearchStatus::Fail) return result;

    ConfirmOutcome confirmed =
        confirm_on_full_eval(std::move(result), g, full_eval, round_cfg, log);
    result = std::move(confirmed.result);
    if (!confirmed.needs_retry) return result;
    if (round >= cfg.max_confirm_retries) {
      result.status = SearchStatus::Fail;
      result.failure_reason =
          "small/full eval gap persisted after " +
          std::to_string(cfg.max_confirm_retries) + " resamples";
      return result;
    }
    round_cfg.small_eval_size *= 2;
    round_cfg.calib_size *= 2;
  }
}

}  // namespace lpq
