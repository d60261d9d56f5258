// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "lpq/executor.hpp"

namespace lpq {

double Rng::uniform() {
  // 53 random bits into [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = uniform(), u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return mean + stddev * r * std::cos(a);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int64_t>(engine_() % span);
}

ZipfSampler::ZipfSampler(int64_t n, double s) {
  cdf_.resize(static_cast<size_t>(n));
  double acc = 0.0;
  for (int64_t r = 0; r < n; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -s);
    cdf_[static_cast<size_t>(r)] = acc;
  }
  for (double& v : cdf_) v /= acc;
}

int64_t ZipfSampler::sample(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<int64_t>(it - cdf_.begin());
}

namespace {

struct GraphBuilder {
  ModelGraph g;
  int next_id = 0;

  std::string add_fc(const std::string& name, const std::string& input,
                     int64_t n, int64_t k, Rng& rng, double sigma) {
    WeightBlob w;
    w.kind = WeightBlob::Kind::F32;
    w.dims = {k, n};
    w.f32.resize(static_cast<size_t>(n * k));
    const double s = sigma > 0.0 ? sigma : 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : w.f32) v = static_cast<float>(rng.normal(0.0, s));
    WeightBlob b;
    b.kind = WeightBlob::Kind::F32;
    b.dims = {k};
    b.f32.resize(static_cast<size_t>(k));
    for (auto& v : b.f32) v = static_cast<float>(rng.normal(0.0, 0.01));
    g.weights.emplace("w:" + name, std::move(w));
    g.weights.emplace("b:" + name, std::move(b));

    Node node;
    node.name = name;
    node.kind = OpKind::FullyConnected;
    node.inputs = {input};
    node.outputs = {name + ".out"};
    node.weight = "w:" + name;
    node.bias = "b:" + name;
    node.in_features = n;
    node.out_features = k;
    g.nodes.push_back(std::move(node));
    return name + ".out";
  }

  std::string add_relu(const std::string& name, const std::string& input) {
    Node node;
    node.name = name;
    node.kind = OpKind::Relu;
    node.inputs = {input};
    node.outputs = {name + ".out"};
    g.nodes.push_back(std::move(node));
    return name + ".out";
  }
};

int64_t scaled(int64_t w, double mult) {
  return std::max<int64_t>(1, static_cast<int64_t>(std::llround(w * mult)));
}

void apply_fault(ModelGraph& g, const FaultSpec& f, Rng& rng) {
  Node* n = g.find_node(f.layer);
  if (!n || (n->kind != OpKind::FullyConnected && n->kind != OpKind::FCRelu))
    throw std::invalid_argument("fault targets unknown FC layer: " + f.layer);
  WeightBlob& w = g.weights.at(n->weight);
  const int64_t k = n->out_features, nn = n->in_features;
  if (f.kind == FaultSpec::Kind::OutlierWeights) {
    // Spread outliers over distinct channels so per-channel params cannot
    // absorb the damage into a single output.
    for (int i = 0; i < f.count; ++i) {
      const int64_t ch = (k <= f.count)
                             ? i % k
                             : (i * std::max<int64_t>(1, k / f.count)) % k;
      const int64_t t = rng.uniform_int(0, nn - 1);
      const float sign = rng.bernoulli(0.5) ? 1.0f : -1.0f;
      w.f32[static_cast<size_t>(ch * nn + t)] = sign * f.magnitude;
    }
  } else {
    // Geometric per-channel scale spread: channel magnitudes range over
    // [1/sqrt(mult), sqrt(mult)].
    for (int64_t ch = 0; ch < k; ++ch) {
      const double e = k > 1 ? static_cast<double>(ch) / (k - 1) - 0.5 : 0.0;
      const float m = static_cast<float>(std::pow(f.sigma_mult, e));
      for (int64_t t = 0; t < nn; ++t)
        w.f32[static_cast<size_t>(ch * nn + t)] *= m;
    }
  }
}

EvalDataset gen_features_only(const IoSpec& io,
                              const std::vector<int64_t>& table_rows,
                              const DataGenConfig& cfg, int64_t n, Rng& rng) {
  std::vector<ZipfSampler> samplers;
  samplers.reserve(table_rows.size());
  for (int64_t rows : table_rows) samplers.emplace_back(rows, cfg.zipf_s);

  EvalDataset ds(static_cast<size_t>(n));
  for (auto& s : ds) {
    s.dense.resize(static_cast<size_t>(io.dense_dim));
    for (auto& v : s.dense)
      v = static_cast<float>(rng.normal(cfg.dense_mean, 1.0));
    s.ids.resize(table_rows.size());
    for (size_t slot = 0; slot < table_rows.size(); ++slot) {
      s.ids[slot].resize(static_cast<size_t>(cfg.ids_per_slot));
      for (auto& id : s.ids[slot])
        id = static_cast<int32_t>(samplers[slot].sample(rng));
    }
    s.label = 0;
    s.weight = 1.0f;
  }
  return ds;
}

}  // namespace

ModelGraph gen_model(const ModelGenConfig& cfg) {
  if (cfg.rows_per_table.empty())
    throw std::invalid_argument("gen_model: need at least one table");
  if (cfg.top_mlp.empty() || cfg.top_mlp.back() != 1)
    throw std::invalid_argument("gen_model: top MLP must end in width 1");
  if (cfg.interaction == ModelGenConfig::Interaction::Dot &&
      (cfg.bottom_mlp.empty() || cfg.bottom_mlp.back() != cfg.embedding_dim))
    throw std::invalid_argument(
        "gen_model: dot interaction needs bottom output = embedding dim");

  Rng rng(cfg.seed);
  GraphBuilder b;
  b.g.io.dense_dim = cfg.dense_dim;
  b.g.io.num_slots = cfg.num_tables();
  b.g.io.output = "prob";

  // Embedding tables.
  for (int t = 0; t < cfg.num_tables(); ++t) {
    EmbeddingTable table;
    table.name = "table" + std::to_string(t);
    table.rows = cfg.rows_per_table[static_cast<size_t>(t)];
    table.dim = cfg.embedding_dim;
    table.f32 = Tensor{table.rows, table.dim};
    for (auto& v : table.f32.data)
      v = static_cast<float>(rng.normal(0.0, cfg.table_sigma));
    b.g.tables.push_back(std::move(table));
  }

  // Bottom MLP over dense features; Relu after every layer.
  std::string wire = b.g.io.dense_name;
  int64_t width = cfg.dense_dim;
  for (size_t i = 0; i < cfg.bottom_mlp.size(); ++i) {
    const bool last = i + 1 == cfg.bottom_mlp.size();
    const int64_t out =
        last ? cfg.bottom_mlp[i] : scaled(cfg.bottom_mlp[i], cfg.width_mult);
    const std::string name = "bot_fc" + std::to_string(i);
    wire = b.add_fc(name, wire, width, out, rng, cfg.weight_sigma);
    wire = b.add_relu("bot_relu" + std::to_string(i), wire);
    width = out;
  }
  const std::string bottom_out = wire;
  const int64_t bottom_width = width;

  // Embedding lookups.
  std::vector<std::string> sls_outs;
  for (int t = 0; t < cfg.num_tables(); ++t) {
    Node node;
    node.name = "sls" + std::to_string(t);
    node.kind = OpKind::SparseLengthsSum;
    node.inputs = {"ids:" + std::to_string(t)};
    node.outputs = {node.name + ".out"};
    node.table = "table" + std::to_string(t);
    node.slot = t;
    node.pool_hint = 20.0;
    sls_outs.push_back(node.outputs[0]);
    b.g.nodes.push_back(std::move(node));
  }

  // Interaction.
  std::string interaction_out;
  int64_t interaction_width = 0;
  if (cfg.interaction == ModelGenConfig::Interaction::Concat) {
    Node cat;
    cat.name = "interaction";
    cat.kind = OpKind::Concat;
    cat.inputs.push_back(bottom_out);
    for (const auto& s : sls_outs) cat.inputs.push_back(s);
    cat.outputs = {"interaction.out"};
    interaction_out = cat.outputs[0];
    interaction_width =
        bottom_width + cfg.embedding_dim * cfg.num_tables();
    b.g.nodes.push_back(std::move(cat));
  } else {
    Node st;
    st.name = "stack";
    st.kind = OpKind::Concat;
    st.stack = true;
    st.inputs.push_back(bottom_out);
    for (const auto& s : sls_outs) st.inputs.push_back(s);
    st.outputs = {"stack.out"};
    const int64_t s_count = static_cast<int64_t>(st.inputs.size());
    b.g.nodes.push_back(std::move(st));

    Node bmm;
    bmm.name = "pairwise";
    bmm.kind = OpKind::BatchMatMul;
    bmm.inputs = {"stack.out", "stack.out"};
    bmm.outputs = {"pairwise.out"};
    bmm.transpose_b = true;
    bmm.flatten_output = true;
    b.g.nodes.push_back(std::move(bmm));

    Node cat;
    cat.name = "interaction";
    cat.kind = OpKind::Concat;
    cat.inputs = {bottom_out, "pairwise.out"};
    cat.outputs = {"interaction.out"};
    interaction_out = cat.outputs[0];
    interaction_width = bottom_width + s_count * s_count;
    b.g.nodes.push_back(std::move(cat));
  }

  // Top MLP; Relu after every hidden layer, Sigmoid last.
  wire = interaction_out;
  width = interaction_width;
  for (size_t i = 0; i < cfg.top_mlp.size(); ++i) {
    const bool last = i + 1 == cfg.top_mlp.size();
    const int64_t out = last ? 1 : scaled(cfg.top_mlp[i], cfg.width_mult);
    const std::string name = "top_fc" + std::to_string(i);
    wire = b.add_fc(name, wire, width, out, rng, cfg.weight_sigma);
    if (!last) wire = b.add_relu("top_relu" + std::to_string(i), wire);
    width = out;
  }
  Node sig;
  sig.name = "output_sigmoid";
  sig.kind = OpKind::Sigmoid;
  sig.inputs = {wire};
  sig.outputs = {b.g.io.output};
  b.g.nodes.push_back(std::move(sig));

  // Rescale the final FC so the probe logits hit the target spread; keeps
  // labels informative instead of coin flips.
  if (cfg.target_logit_stddev > 0.0) {
    DataGenConfig probe_cfg;
    probe_cfg.seed = cfg.seed ^ 0xabcdef12345678ull;
    Rng probe_rng(probe_cfg.seed);
    const EvalDataset probe = gen_features_only(
        b.g.io, cfg.rows_per_table, probe_cfg, 256, probe_rng);
    const auto trace = run_traced(b.g, to_batch(probe));
    const Node* last_fc = b.g.find_node(b.g.last_fc_name());
    const Tensor& logits =
        std::get<Tensor>(trace.tensors.at(last_fc->output()));
    double sum = 0.0, sum2 = 0.0;
    for (float v : logits.data) {
      sum += v;
      sum2 += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(logits.data.size());
    const double var = std::max(1e-12, sum2 / n - (sum / n) * (sum / n));
    const float gain =
        static_cast<float>(cfg.target_logit_stddev / std::sqrt(var));
    for (auto& v : b.g.weights.at(last_fc->weight).f32) v *= gain;
    for (auto& v : b.g.weights.at(last_fc->bias).f32) v *= gain;
  }

  for (const auto& f : cfg.faults) apply_fault(b.g, f, rng);

  validate_or_throw(b.g);
  return b.g;
}

std::vector<double> predict_fp64(const ModelGraph& g, const Batch& batch) {
  // Double-precision walker covering the generator's op set.
  std::map<std::string, std::pair<std::vector<int64_t>, std::vector<double>>>
      vals;
  const int64_t B = batch.size();
  {
    std::vector<double> dense(batch.dense.data.begin(),
                              batch.dense.data.end());
    vals[g.io.dense_name] = {{B, g.io.dense_dim}, std::move(dense)};
  }
  for (const Node& n : g.nodes) {
    switch (n.kind) {
      case OpKind::FullyConnected:
      case OpKind::FCRelu: {
        const auto& [xd, x] = vals.at(n.inputs[0]);
        const auto& w = g.weights.at(n.weight).f32;
        const auto& bias = g.weights.at(n.bias).f32;
        const int64_t nf = n.in_features, k = n.out_features;
        std::vector<double> y(static_cast<size_t>(B * k));
        for (int64_t i = 0; i < B; ++i)
          for (int64_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < nf; ++t)
              acc += x[static_cast<size_t>(i * nf + t)] *
                     static_cast<double>(w[static_cast<size_t>(j * nf + t)]);
            acc += bias[static_cast<size_t>(j)];
            if (n.kind == OpKind::FCRelu && acc < 0.0) acc = 0.0;
            y[static_cast<size_t>(i * k + j)] = acc;
          }
        vals[n.output()] = {{B, k}, std::move(y)};
        break;
      }
      case OpKind::Relu: {
        auto v = vals.at(n.inputs[0]);
        for (double& x : v.second)
          if (x < 0.0) x = 0.0;
        vals[n.output()] = std::move(v);
        break;
      }
      case OpKind::Sigmoid: {
        auto v = vals.at(n.inputs[0]);
        for (double& x : v.second) x = 1.0 / (1.0 + std::exp(-x));
        vals[n.output()] = std::move(v);
        break;
      }
      case OpKind::Swish: {
        auto v = vals.at(n.inputs[0]);
        for (double& x : v.second) x = x / (1.0 + std::exp(-x));
        vals[n.output()] = std::move(v);
        break;
      }
      case OpKind::SparseLengthsSum: {
        const auto& table =
            g.tables[static_cast<size_t>(g.table_index(n.table))];
        const auto& ids = batch.ids.at(static_cast<size_t>(n.slot));
        const int64_t d = table.dim;
        std::vector<double> y(static_cast<size_t>(B * d), 0.0);
        for (int64_t i = 0; i < B; ++i)
          for (int32_t id : ids[static_cast<size_t>(i)])
            for (int64_t c = 0; c < d; ++c)
              y[static_cast<size_t>(i * d + c)] += table.f32.at(id, c);
        vals[n.output()] = {{B, d}, std::move(y)};
        break;
      }
      case OpKind::Concat: {
        if (n.stack) {
          const int64_t s = static_cast<int64_t>(n.inputs.size());
          const int64_t e = vals.at(n.inputs[0]).first[1];
          std::vector<double> y(static_cast<size_t>(B * s * e));
          for (int64_t i = 0; i < B; ++i)
            for (int64_t si = 0; si < s; ++si) {
              const auto& v = vals.at(n.inputs[static_cast<size_t>(si)]).second;
              for (int64_t c = 0; c < e; ++c)
                y[static_cast<size_t>((i * s + si) * e + c)] =
                    v[static_cast<size_t>(i * e + c)];
            }
          vals[n.output()] = {{B, s, e}, std::move(y)};
        } else {
          int64_t total = 0;
          for (const auto& in : n.inputs) total += vals.at(in).first[1];
          std::vector<double> y(static_cast<size_t>(B * total));
          for (int64_t i = 0; i < B; ++i) {
            int64_t off = 0;
            for (const auto& in : n.inputs) {
              const auto& [vd, v] = vals.at(in);
              for (int64_t c = 0; c < vd[1]; ++c)
                y[static_cast<size_t>(i * total + off + c)] =
                    v[static_cast<size_t>(i * vd[1] + c)];
              off += vd[1];
            }
          }
          vals[n.output()] = {{B, total}, std::move(y)};
        }
        break;
      }
      case OpKind::BatchMatMul: {
        const auto& [ad, a] = vals.at(n.inputs[0]);
        const auto& [bd, bv] = vals.at(n.inputs[1]);
        const int64_t p = ad[1], q = ad[2];
        const int64_t r = n.transpose_b ? bd[1] : bd[2];
        std::vector<double> y(static_cast<size_t>(B * p * r));
        for (int64_t bi = 0; bi < B; ++bi)
          for (int64_t i = 0; i < p; ++i)
            for (int64_t j = 0; j < r; ++j) {
              double acc = 0.0;
              for (int64_t t = 0; t < q; ++t) {
                const double cv =
                    n.transpose_b
                        ? bv[static_cast<size_t>((bi * bd[1] + j) * bd[2] + t)]
                        : bv[static_cast<size_t>((bi * bd[1] + t) * bd[2] + j)];
                acc += a[static_cast<size_t>((bi * p + i) * q + t)] * cv;
              }
              y[static_cast<size_t>((bi * p + i) * r + j)] = acc;
            }
        if (n.flatten_output)
          vals[n.output()] = {{B, p * r}, std::move(y)};
        else
          vals[n.output()] = {{B, p, r}, std::move(y)};
        break;
      }
      default:
        throw std::logic_error("predict_fp64: unsupported op kind " +
                               to_string(n.kind));
    }
  }
  return vals.at(g.io.output).second;
}

EvalDataset gen_dataset(const ModelGraph& teacher, const DataGenConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<int64_t> rows;
  for (const auto& t : teacher.tables) rows.push_back(t.rows);
  EvalDataset ds =
      gen_features_only(teacher.io, rows, cfg, cfg.n, rng);

  // Labels from the fp64 teacher pass, separate stream.
  Rng label_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  constexpr size_t kChunk = 1024;
  for (size_t begin = 0; begin < ds.size(); begin += kChunk) {
    const size_t end = std::min(ds.size(), begin + kChunk);
    const auto p = predict_fp64(teacher, to_batch(ds, begin, end));
    for (size_t i = 0; i < p.size(); ++i)
      ds[begin + i].label = label_rng.bernoulli(p[i]) ? 1 : 0;
  }
  return ds;
}

void gen_snapshots(const ModelGenConfig& model_cfg,
                   const DataGenConfig& data_cfg, int count,
                   const DriftSpec& drift, const std::string& dir,
                   int64_t calib_n, int64_t eval_n) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  ModelGraph g = gen_model(model_cfg);
  Rng walk_rng(model_cfg.seed ^ 0x5bd1e995u);

  for (int k = 0; k < count; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "snap-%03d", k);
    const std::string stem = dir + "/" + name;

    if (k > 0 && drift.kind == DriftSpec::Kind::WeightWalk) {
      for (auto& [wname, blob] : g.weights) {
        if (blob.kind != WeightBlob::Kind::F32 || wname[0] != 'w') continue;
        for (auto& v : blob.f32)
          v += static_cast<float>(walk_rng.normal(0.0, drift.step));
      }
    }
    save_model(g, stem);

    DataGenConfig slice = data_cfg;
    if (drift.kind == DriftSpec::Kind::ActivationShift)
      slice.dense_mean = data_cfg.dense_mean + drift.step * k;
    slice.seed = data_cfg.seed + 1000003ull * static_cast<uint64_t>(k);
    slice.n = calib_n;
    save_dataset(gen_dataset(g, slice), stem + ".calib.jsonl");
    slice.seed ^= 0xc0ffee;
    slice.n = eval_n;
    save_dataset(gen_dataset(g, slice), stem + ".eval.jsonl");
  }
}

std::vector<int64_t> gen_batch_sizes(const DataGenConfig& cfg, int count) {
  std::vector<int64_t> out(static_cast<size_t>(count));
  if (cfg.batch_sampler == DataGenConfig::BatchSampler::Fixed) {
    std::fill(out.begin(), out.end(), cfg.fixed_batch);
    return out;
  }
  // Typical mix: 44% at m=1, 42% spread over [2, 24], 14% over [25, 100].
  Rng rng(cfg.seed ^ 0xbadc0de);
  for (auto& m : out) {
    const double u = rng.uniform();
    if (u < 0.44) {
      m = 1;
    } else if (u < 0.86) {
      const double f = rng.uniform();
      m = 2 + static_cast<int64_t>(f * 23.0);
    } else {
      const double f = rng.uniform();
      m = 25 + static_cast<int64_t>(f * 76.0);
    }
  }
  return out;
}

}  // namespace lpq
