// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "lpq/graph.hpp"

namespace lpq {

namespace {

std::unordered_map<std::string, int> consumer_counts(const ModelGraph& g) {
  std::unordered_map<std::string, int> counts;
  for (const auto& n : g.nodes)
    for (const auto& in : n.inputs) ++counts[in];
  if (!g.io.output.empty()) ++counts[g.io.output];  // the graph output is used
  return counts;
}

}  // namespace

ModelGraph fuse_fc_relu(const ModelGraph& g) {
  ModelGraph out = g;
  const auto counts = consumer_counts(g);

  std::vector<Node> fused;
  std::unordered_set<std::string> dropped_relus;
  for (size_t i = 0; i < out.nodes.size(); ++i) {
    Node n = out.nodes[i];
    if (dropped_relus.count(n.name)) continue;
    if (n.kind == OpKind::FullyConnected) {
      // Fusable only when the Relu is the sole consumer of the FC output.
      const Node* relu = nullptr;
      for (size_t k = i + 1; k < out.nodes.size(); ++k) {
        const Node& c = out.nodes[k];
        if (c.kind == OpKind::Relu && c.inputs.size() == 1 &&
            c.inputs[0] == n.output()) {
          relu = &c;
          break;
        }
      }
      auto it = counts.find(n.output());
      if (relu && it != counts.end() && it->second == 1) {
        dropped_relus.insert(relu->name);
        Node f = n;
        f.kind = OpKind::FCRelu;
        f.source = n.name + "+" + relu->name;
        f.outputs = relu->outputs;
        fused.push_back(std::move(f));
        continue;
      }
    }
    fused.push_back(std::move(n));
  }
  out.nodes = std::move(fused);
  return out;
}

ModelGraph elide_dq_q(const ModelGraph& g) {
  ModelGraph out = g;

  // Pair each Quantize with a Dequantize producer of its input.
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, size_t> producer;
    for (size_t i = 0; i < out.nodes.size(); ++i)
      producer[out.nodes[i].output()] = i;

    for (size_t qi = 0; qi < out.nodes.size(); ++qi) {
      Node& q = out.nodes[qi];
      if (q.kind != OpKind::Quantize || q.inputs.size() != 1) continue;
      auto p = producer.find(q.inputs[0]);
      if (p == producer.end()) continue;
      Node& dq = out.nodes[p->second];
      if (dq.kind != OpKind::Dequantize) continue;

      if (dq.qparams == q.qparams && !q.dynamic_input) {
        // Identical params: the pair is an identity on the quantized wire.
        const std::string replacement = dq.inputs[0];
        const std::string removed = q.output();
        for (auto& n : out.nodes)
          for (auto& in : n.inputs)
            if (in == removed) in = replacement;
        out.nodes.erase(out.nodes.begin() + static_cast<ptrdiff_t>(qi));
      } else {
        // Fold into a single requantizing Quantize fed by the quantized wire.
        q.inputs[0] = dq.inputs[0];
      }
      // Drop the Dequantize if nothing consumes it anymore.
      const auto counts = consumer_counts(out);
      const std::string dq_name = dq.name;
      auto it = std::find_if(out.nodes.begin(), out.nodes.end(),
                             [&](const Node& n) { return n.name == dq_name; });
      if (it != out.nodes.end()) {
        auto c = counts.find(it->output());
        if (c == counts.end() || c->second == 0) out.nodes.erase(it);
      }
      changed = true;
      break;
    }
  }
  return out;
}

namespace {

QuantParams derive_act_params(const CalibrationData& calib,
                              const std::string& tensor, RangeMethod method) {
  const Histogram& h = calib.at(tensor);
  const auto [lo, hi] = h.derive_range(method, IntRange::u8());
  return compute_qparams(lo, hi, IntRange::u8());
}

}  // namespace

ModelGraph apply_scheme(const ModelGraph& g, const QuantScheme& scheme,
                        const CalibrationData& calib) {
  ModelGraph out = g;
  out.nodes.clear();

  const std::string last_fc = g.last_fc_name();
  for (const auto& o : scheme.overrides) {
    if (o.node == "*") continue;
    const Node* n = g.find_node(o.node);
    if (!n || (n->kind != OpKind::FullyConnected && n->kind != OpKind::FCRelu))
      throw std::invalid_argument("scheme override names a non-FC node: " +
                                  o.node);
  }

  for (const Node& n : g.nodes) {
    const bool is_fc =
        n.kind == OpKind::FullyConnected || n.kind == OpKind::FCRelu;
    if (!is_fc) {
      out.nodes.push_back(n);
      continue;
    }

    const LayerQuantConfig cfg =
        resolve_layer(scheme, n.name, n.name == last_fc);

    if (cfg.skip) {
      Node fallback = n;
      fallback.precision = scheme.global.fallback_precision;
      if (fallback.precision == Precision::Fp16) {
        auto& blob = out.weights.at(n.weight);
        if (blob.kind == WeightBlob::Kind::F32) {
          WeightBlob half;
          half.kind = WeightBlob::Kind::F16;
          half.dims = blob.dims;
          half.f16.reserve(blob.f32.size());
          for (float v : blob.f32) half.f16.push_back(to_half(v).bits);
          blob = std::move(half);
        }
      }
      if (fallback.source.empty()) fallback.source = n.name;
      out.nodes.push_back(std::move(fallback));
      continue;
    }

    // Quantized layer: weights to int8, activation params from calibration,
    // explicit Quantize/Dequantize at the boundaries.
    auto& blob = out.weights.at(n.weight);
    if (blob.kind != WeightBlob::Kind::F32)
      throw std::runtime_error("apply_scheme: weights for '" + n.name +
                               "' are not fp32");
    WeightBlob qblob;
    qblob.kind = WeightBlob::Kind::I8;
    qblob.dims = blob.dims;
    qblob.i8 = kernels::Int8Weights::quantize(
        blob.f32, n.in_features, n.out_features, cfg.weight_granularity,
        cfg.weight_range);
    blob = std::move(qblob);

    Node fc = n;
    fc.precision = Precision::Int8;
    fc.in_qp = derive_act_params(calib, n.inputs[0], cfg.act_range);
    fc.out_qp = derive_act_params(calib, n.output(), cfg.act_range);
    if (fc.source.empty()) fc.source = n.name;

    Node quant;
    quant.name = "q:" + n.name;
    quant.kind = OpKind::Quantize;
    quant.inputs = {n.inputs[0]};
    quant.outputs = {n.name + ".in_q"};
    quant.qparams = fc.in_qp;
    quant.source = n.name;

    Node dequant;
    dequant.name = "dq:" + n.name;
    dequant.kind = OpKind::Dequantize;
    dequant.inputs = {n.name + ".out_q"};
    dequant.outputs = {n.output()};
    dequant.qparams = fc.out_qp;
    dequant.source = n.name;

    fc.inputs = {quant.outputs[0]};
    fc.outputs = {dequant.inputs[0]};

    out.nodes.push_back(std::move(quant));
    out.nodes.push_back(std::move(fc));
    out.nodes.push_back(std::move(dequant));
  }

  out = elide_dq_q(out);
  validate_or_throw(out);
  return out;
}

ModelGraph quantize_tables(const ModelGraph& g, TableQuantMode mode) {
  ModelGraph out = g;
  if (mode == TableQuantMode::None) return out;

  // Rank tables by fp32 payload size to pick the "top half" for 4-bit.
  std::vector<size_t> order(out.tables.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return out.tables[a].rows * out.tables[a].dim >
           out.tables[b].rows * out.tables[b].dim;
  });

  for (size_t rank = 0; rank < order.size(); ++rank) {
    EmbeddingTable& t = out.tables[order[rank]];
    if (t.mode != EmbeddingTable::Mode::F32)
      throw std::runtime_error("quantize_tables: table '" + t.name +
                               "' is already quantized");
    const bool four_bit =
        mode == TableQuantMode::Int4 ||
        (mode == TableQuantMode::Int4TopHalf && rank < order.size() / 2);
    const IntRange range = four_bit ? IntRange::u4() : IntRange::u8();
    t.qdata = kernels::RowwiseTable::quantize(t.f32, range);
    t.mode = four_bit ? EmbeddingTable::Mode::Int4Row
                      : EmbeddingTable::Mode::Int8Row;
    t.f32 = Tensor{};
  }
  return out;
}

}  // namespace lpq
