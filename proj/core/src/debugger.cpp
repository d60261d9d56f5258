// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/debugger.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lpq/io_util.hpp"

namespace lpq {

using json = nlohmann::ordered_json;

namespace {

std::vector<size_t> pick_indices(size_t population, size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<size_t> idx(population);
  for (size_t i = 0; i < population; ++i) idx[i] = i;
  for (size_t i = 0; i < n; ++i) {
    const size_t j = i + rng() % (population - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b,
                   size_t& first_diff, size_t& count, double& max_abs) {
  first_diff = a.size();
  count = 0;
  max_abs = 0.0;
  if (a.size() != b.size()) {
    first_diff = 0;
    count = std::max(a.size(), b.size());
    return false;
  }
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<uint32_t>(a[i]) != std::bit_cast<uint32_t>(b[i])) {
      if (count == 0) first_diff = i;
      ++count;
      max_abs = std::max(max_abs,
                         std::fabs(static_cast<double>(a[i]) - b[i]));
    }
  }
  return count == 0;
}

}  // namespace

DebugBundle extract_bundle(const ModelGraph& model, const EvalDataset& ds,
                           size_t n, uint64_t seed) {
  if (n == 0 || n > ds.size())
    throw std::invalid_argument("extract_bundle: bad sample count");

  DebugBundle b;
  b.seed = seed;
  for (size_t i : pick_indices(ds.size(), n, seed)) b.samples.push_back(ds[i]);
  {
    std::string concat;
    for (const auto& s : b.samples) {
      concat += std::to_string(s.label);
      for (float v : s.dense) concat += std::to_string(v);
    }
    b.source_hash = to_hex(
        fnv1a64({reinterpret_cast<const uint8_t*>(concat.data()), concat.size()}));
  }

  // Referenced row ids per table (slots map onto tables via SLS nodes).
  std::vector<std::set<int32_t>> used(model.tables.size());
  std::vector<int> slot_table(static_cast<size_t>(model.io.num_slots), -1);
  for (const auto& node : model.nodes)
    if (node.kind == OpKind::SparseLengthsSum)
      slot_table[static_cast<size_t>(node.slot)] = model.table_index(node.table);
  for (const auto& s : b.samples)
    for (size_t slot = 0; slot < s.ids.size(); ++slot) {
      const int ti = slot_table[slot];
      if (ti < 0) continue;
      for (int32_t id : s.ids[slot]) used[static_cast<size_t>(ti)].insert(id);
    }

  // Shrink tables and build the id remap.
  b.model = model;
  b.kept_rows.resize(model.tables.size());
  std::vector<std::map<int32_t, int32_t>> remap(model.tables.size());
  for (size_t ti = 0; ti < model.tables.size(); ++ti) {
    auto& table = b.model.tables[ti];
    b.kept_rows[ti].assign(used[ti].begin(), used[ti].end());
    int32_t next = 0;
    for (int32_t old : b.kept_rows[ti]) remap[ti][old] = next++;

    const int64_t new_rows = static_cast<int64_t>(b.kept_rows[ti].size());
    if (table.mode == EmbeddingTable::Mode::F32) {
      Tensor shrunk{new_rows, table.dim};
      for (int64_t r = 0; r < new_rows; ++r)
        std::copy_n(table.f32.data.data() +
                        static_cast<int64_t>(b.kept_rows[ti][static_cast<size_t>(r)]) *
                            table.dim,
                    table.dim, shrunk.data.data() + r * table.dim);
      table.f32 = std::move(shrunk);
    } else {
      kernels::RowwiseTable shrunk;
      shrunk.rows = new_rows;
      shrunk.dim = table.dim;
      shrunk.range = table.qdata.range;
      const size_t rb = table.qdata.row_bytes();
      shrunk.data.resize(static_cast<size_t>(new_rows) * rb);
      shrunk.params.resize(static_cast<size_t>(new_rows));
      for (int64_t r = 0; r < new_rows; ++r) {
        const auto old = static_cast<size_t>(b.kept_rows[ti][static_cast<size_t>(r)]);
        std::copy_n(table.qdata.data.data() + old * rb, rb,
                    shrunk.data.data() + static_cast<size_t>(r) * rb);
        shrunk.params[static_cast<size_t>(r)] = table.qdata.params[old];
      }
      table.qdata = std::move(shrunk);
    }
    table.rows = new_rows;
  }

  // Rewrite sample ids into the shrunken tables.
  for (auto& s : b.samples)
    for (size_t slot = 0; slot < s.ids.size(); ++slot) {
      const int ti = slot_table[slot];
      if (ti < 0) continue;
      for (auto& id : s.ids[slot]) id = remap[static_cast<size_t>(ti)].at(id);
    }

  // Bitwise equivalence guard: the shrink must be invisible to inference.
  EvalDataset original(n);
  {
    const auto idx = pick_indices(ds.size(), n, seed);
    for (size_t i = 0; i < n; ++i) original[i] = ds[idx[i]];
  }
  const auto before = run(model, to_batch(original));
  const auto after = run(b.model, to_batch(b.samples));
  size_t fd, cnt;
  double mad;
  if (!bitwise_equal(before, after, fd, cnt, mad))
    throw std::runtime_error(
        "extract_bundle: shrink changed predictions (internal bug), first at " +
        std::to_string(fd));
  return b;
}

void save_bundle(const DebugBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_model(b.model, dir + "/model");
  save_dataset(b.samples, dir + "/dataset.jsonl");
  json j;
  j["kept_rows"] = b.kept_rows;
  write_text_file(dir + "/remap.json", j.dump() + "\n");
  json prov;
  prov["seed"] = b.seed;
  prov["source_hash"] = b.source_hash;
  prov["samples"] = b.samples.size();
  write_text_file(dir + "/provenance.json", prov.dump(2) + "\n");
}

DebugBundle load_bundle(const std::string& dir) {
  DebugBundle b;
  b.model = load_model(dir + "/model");
  b.samples = load_dataset(dir + "/dataset.jsonl");
  const json j = json::parse(read_text_file(dir + "/remap.json"));
  b.kept_rows = j.at("kept_rows").get<std::vector<std::vector<int32_t>>>();
  const json prov = json::parse(read_text_file(dir + "/provenance.json"));
  b.seed = prov.at("seed").get<uint64_t>();
  b.source_hash = prov.at("source_hash").get<std::string>();
  return b;
}

std::vector<SampleRank> rank_samples(const DebugBundle& bundle,
                                     const ModelGraph& g_lowp,
                                     const ModelGraph& g_fp32,
                                     const Backend& backend) {
  const Batch batch = to_batch(bundle.samples);
  const auto p_lowp = run(g_lowp, batch, backend);
  const auto p_fp32 = run(g_fp32, batch, backend);

  std::vector<SampleRank> ranks(bundle.samples.size());
  for (size_t i = 0; i < bundle.samples.size(); ++i) {
    const auto& s = bundle.samples[i];
    ranks[i].index = i;
    ranks[i].ce_lowp = cross_entropy_sample(p_lowp[i], s.label, s.weight);
    ranks[i].ce_fp32 = cross_entropy_sample(p_fp32[i], s.label, s.weight);
    ranks[i].delta = ranks[i].ce_lowp - ranks[i].ce_fp32;
  }
  std::stable_sort(ranks.begin(), ranks.end(),
                   [](const SampleRank& a, const SampleRank& b) {
                     return a.delta > b.delta;
                   });
  return ranks;
}

std::vector<OpErrorRecord> shadow_run(const DebugBundle& bundle,
                                      const ModelGraph& g_lowp,
                                      const ModelGraph& g_fp32,
                                      const Backend& backend) {
  auto records =
      shadow_compare(g_lowp, g_fp32, to_batch(bundle.samples), backend);
  std::stable_sort(records.begin(), records.end(),
                   [](const OpErrorRecord& a, const OpErrorRecord& b) {
                     return a.rel_l2_error > b.rel_l2_error;
                   });
  return records;
}

namespace {

std::vector<float> value_bits(const Value& v) {
  if (std::holds_alternative<Tensor>(v)) return std::get<Tensor>(v).data;
  // Compare quantized wires through their dequantized views plus params so a
  // params mismatch also shows up.
  const QTensor& q = std::get<QTensor>(v);
  std::vector<float> out;
  out.reserve(q.data.size() + 2);
  out.push_back(q.params.scale);
  out.push_back(static_cast<float>(q.params.zeropt));
  for (uint8_t b : q.data) out.push_back(static_cast<float>(b));
  return out;
}

std::string dump_values(const ModelGraph& g, const Node& node,
                        const ExecutionTrace& ta, const ExecutionTrace& tb,
                        size_t first_diff) {
  std::ostringstream ss;
  ss << "divergence at node '" << node.name << "' (" << to_string(node.kind)
     << "), element " << first_diff << "\n";
  for (const auto& in : node.inputs) {
    if (in.rfind("ids:", 0) == 0) continue;
    const auto va = value_bits(ta.tensors.at(in));
    ss << "  input " << in << " [";
    for (size_t i = 0; i < std::min<size_t>(8, va.size()); ++i)
      ss << (i ? ", " : "") << va[i];
    ss << (va.size() > 8 ? ", ...]" : "]") << "\n";
  }
  const auto va = value_bits(ta.tensors.at(node.output()));
  const auto vb = value_bits(tb.tensors.at(node.output()));
  const size_t lo = first_diff > 3 ? first_diff - 3 : 0;
  ss << "  output[" << lo << "..]: a=";
  for (size_t i = lo; i < std::min(va.size(), lo + 7); ++i)
    ss << (i != lo ? ", " : "") << va[i];
  ss << "\n              b=";
  for (size_t i = lo; i < std::min(vb.size(), lo + 7); ++i)
    ss << (i != lo ? ", " : "") << vb[i];
  ss << "\n";
  (void)g;
  return ss.str();
}

}  // namespace

BackendDiffReport compare_backends(const ModelGraph& g, const Backend& a,
                                   const Backend& b, const Batch& batch) {
  const ExecutionTrace ta = run_traced(g, batch, a);
  const ExecutionTrace tb = run_traced(g, batch, b);

  BackendDiffReport rep;
  for (const auto& n : g.nodes) {
    NodeDiff d;
    d.node = n.name;
    d.kind = to_string(n.kind);
    const auto va = value_bits(ta.tensors.at(n.output()));
    const auto vb = value_bits(tb.tensors.at(n.output()));
    d.bitwise_equal =
        bitwise_equal(va, vb, d.first_diff_index, d.diff_count, d.max_abs_diff);
    if (!d.bitwise_equal && rep.identical) {
      rep.identical = false;
      rep.first_divergence = n.name;
      rep.operand_dump = dump_values(g, n, ta, tb, d.first_diff_index);
    }
    rep.nodes.push_back(std::move(d));
  }
  return rep;
}

std::vector<std::pair<std::string, double>> backend_layer_diff(
    const ModelGraph& g, const Batch& batch, const Backend& a,
    const Backend& b) {
  const ExecutionTrace ta = run_traced(g, batch, a);
  const ExecutionTrace tb = run_traced(g, batch, b);
  std::vector<std::pair<std::string, double>> out;
  for (const auto& n : g.nodes) {
    const auto va = value_bits(ta.tensors.at(n.output()));
    const auto vb = value_bits(tb.tensors.at(n.output()));
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < std::min(va.size(), vb.size()); ++i) {
      const double d = static_cast<double>(va[i]) - vb[i];
      num += d * d;
      den += static_cast<double>(vb[i]) * vb[i];
    }
    out.emplace_back(n.name, std::sqrt(num) / (std::sqrt(den) + 1e-12));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  return out;
}

namespace {

json records_to_json(const std::vector<OpErrorRecord>& records,
                     const std::vector<SampleRank>& samples,
                     const DebugReportOptions& opts) {
  json j;
  j["version"] = 1;
  j["top_ops"] = json::array();
  const int nops = std::min<int>(opts.top_ops, static_cast<int>(records.size()));
  for (int i = 0; i < nops; ++i) {
    const auto& r = records[static_cast<size_t>(i)];
    json jr;
    jr["node"] = r.node;
    jr["kind"] = r.kind;
    jr["rel_l2_error"] = r.rel_l2_error;
    auto stats = [](const TensorStats& s) {
      return json{{"min", s.min},   {"max", s.max}, {"mean", s.mean},
                  {"stddev", s.stddev}, {"p1", s.p1},  {"p99", s.p99},
                  {"hist", s.hist}};
    };
    jr["input"] = stats(r.input);
    jr["output"] = stats(r.output);
    if (r.has_weights) jr["weights"] = stats(r.weights);
    j["top_ops"].push_back(std::move(jr));
  }
  j["top_samples"] = json::array();
  const int ns = std::min<int>(opts.top_samples, static_cast<int>(samples.size()));
  for (int i = 0; i < ns; ++i) {
    const auto& s = samples[static_cast<size_t>(i)];
    j["top_samples"].push_back({{"index", s.index},
                                {"ce_delta", s.delta},
                                {"ce_lowp", s.ce_lowp},
                                {"ce_fp32", s.ce_fp32}});
  }
  j["suggestions"] = json::array();
  for (int i = 0; i < nops; ++i) {
    const auto& r = records[static_cast<size_t>(i)];
    if (r.rel_l2_error >= opts.skip_suggestion_threshold)
      j["suggestions"].push_back("skip " + r.node);
    else if (r.rel_l2_error >= opts.tune_suggestion_threshold)
      j["suggestions"].push_back(
          "tune " + r.node +
          ": per-channel weights, then percentile(0.99) acts, then l2min acts");
  }
  return j;
}

}  // namespace

std::string debug_report_json(const std::vector<OpErrorRecord>& records,
                              const std::vector<SampleRank>& samples,
                              const DebugReportOptions& opts) {
  return records_to_json(records, samples, opts).dump(2) + "\n";
}

std::string debug_report_text(const std::vector<OpErrorRecord>& records,
                              const std::vector<SampleRank>& samples,
                              const DebugReportOptions& opts) {
  const json j = records_to_json(records, samples, opts);
  std::ostringstream ss;
  ss << "top operators by shadow error\n";
  for (const auto& r : j["top_ops"]) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "  %-24s %-16s rel_l2=%.6g\n",
                  r["node"].get<std::string>().c_str(),
                  r["kind"].get<std::string>().c_str(),
                  r["rel_l2_error"].get<double>());
    ss << buf;
    const auto& in = r["input"];
    char buf2[256];
    std::snprintf(buf2, sizeof(buf2),
                  "      input  min=%.4g max=%.4g mean=%.4g std=%.4g "
                  "p1=%.4g p99=%.4g\n",
                  in["min"].get<double>(), in["max"].get<double>(),
                  in["mean"].get<double>(), in["stddev"].get<double>(),
                  in["p1"].get<double>(), in["p99"].get<double>());
    ss << buf2;
  }
  ss << "top samples by cross-entropy delta\n";
  for (const auto& s : j["top_samples"]) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  sample %-6zu delta=%.6g lowp=%.6g fp32=%.6g\n",
                  s["index"].get<size_t>(), s["ce_delta"].get<double>(),
                  s["ce_lowp"].get<double>(), s["ce_fp32"].get<double>());
    ss << buf;
  }
  ss << "suggestions\n";
  for (const auto& sug : j["suggestions"])
    ss << "  - " << sug.get<std::string>() << "\n";
  return ss.str();
}

}  // namespace lpq
