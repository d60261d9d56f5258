// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace lpq {

double cross_entropy_sample(double p, int label, double weight) {
  p = std::clamp(p, kCeEpsilon, 1.0 - kCeEpsilon);
  const double y = label;
  return -weight * (y * std::log(p) + (1.0 - y) * std::log1p(-p));
}

NEResult normalized_entropy(std::span<const float> preds,
                            const EvalDataset& ds) {
  if (preds.size() != ds.size())
    throw std::invalid_argument("normalized_entropy: size mismatch");
  if (ds.empty()) throw std::invalid_argument("normalized_entropy: empty set");

  double wy = 0.0, w = 0.0;
  for (const auto& s : ds) {
    wy += static_cast<double>(s.weight) * s.label;
    w += s.weight;
  }
  const double p_star = wy / w;
  if (p_star <= 0.0 || p_star >= 1.0)
    throw std::runtime_error(
        "normalized_entropy: single-class dataset, denominator degenerate");

  NEResult r;
  r.p_star = static_cast<float>(p_star);
  for (size_t i = 0; i < ds.size(); ++i) {
    r.numerator += cross_entropy_sample(preds[i], ds[i].label, ds[i].weight);
    r.denominator += cross_entropy_sample(p_star, ds[i].label, ds[i].weight);
  }
  r.ne = static_cast<float>(r.numerator / r.denominator);
  return r;
}

NEComparison ne_diff(const NEResult& lowp, const NEResult& fp32) {
  if (!(fp32.ne > 0.0f))
    throw std::invalid_argument("ne_diff: reference NE must be positive");
  NEComparison c;
  c.ne_lowp = lowp.ne;
  c.ne_fp32 = fp32.ne;
  c.ne_diff = (lowp.ne - fp32.ne) / fp32.ne;
  return c;
}

TensorStats compute_stats(std::span<const float> values) {
  TensorStats s;
  if (values.empty()) return s;
  std::vector<float> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  double sum = 0.0, sum2 = 0.0;
  for (float v : values) {
    sum += v;
    sum2 += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(values.size());
  s.mean = sum / n;
  s.stddev = std::sqrt(std::max(0.0, sum2 / n - s.mean * s.mean));
  auto quant = [&](double p) {
    const double pos = p * (n - 1);
    const size_t i = static_cast<size_t>(pos);
    if (i + 1 >= sorted.size()) return static_cast<double>(sorted.back());
    return sorted[i] + (pos - i) * (static_cast<double>(sorted[i + 1]) - sorted[i]);
  };
  s.p1 = quant(0.01);
  s.p99 = quant(0.99);
  s.hist.assign(16, 0);
  const double width = s.max - s.min;
  for (float v : values) {
    int b = width == 0.0 ? 0 : static_cast<int>((v - s.min) / width * 16.0);
    b = std::clamp(b, 0, 15);
    ++s.hist[static_cast<size_t>(b)];
  }
  return s;
}

namespace {

Tensor value_as_fp32(const Value& v) {
  if (std::holds_alternative<Tensor>(v)) return std::get<Tensor>(v);
  return kernels::dequantize_op(std::get<QTensor>(v));
}

bool shadow_comparable(OpKind k) {
  switch (k) {
    case OpKind::FullyConnected:
    case OpKind::FCRelu:
    case OpKind::SparseLengthsSum:
    case OpKind::Sigmoid:
    case OpKind::Swish:
    case OpKind::BatchMatMul:
      return true;
    default:
      return false;
  }
}

double rel_l2(std::span<const float> got, std::span<const float> ref) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < got.size(); ++i) {
    const double d = static_cast<double>(got[i]) - ref[i];
    num += d * d;
    den += static_cast<double>(ref[i]) * ref[i];
  }
  return std::sqrt(num) / (std::sqrt(den) + 1e-12);
}

/// Run the reference twin of `ref_node` on the given fp32 inputs.
Tensor run_reference_node(const ModelGraph& g_ref, const Node& ref_node,
                          const std::vector<Tensor>& inputs,
                          const Batch& batch) {
  switch (ref_node.kind) {
    case OpKind::FullyConnected:
    case OpKind::FCRelu: {
      const auto& wb = g_ref.weights.at(ref_node.weight);
      const auto& bias = g_ref.weights.at(ref_node.bias).f32;
      const bool fused = ref_node.kind == OpKind::FCRelu;
      if (wb.kind == WeightBlob::Kind::F16)
        return kernels::fc_fp16_storage(inputs[0], wb.f16, bias,
                                        ref_node.in_features,
                                        ref_node.out_features, fused);
      return kernels::fc_fp32(inputs[0], wb.f32, bias, ref_node.in_features,
                              ref_node.out_features, fused);
    }
    case OpKind::SparseLengthsSum: {
      const auto& table =
          g_ref.tables[static_cast<size_t>(g_ref.table_index(ref_node.table))];
      const auto& ids = batch.ids.at(static_cast<size_t>(ref_node.slot));
      if (table.mode == EmbeddingTable::Mode::F32)
        return kernels::sls_fp32(table.f32, ids);
      return kernels::sls_rowwise(table.qdata, ids);
    }
    case OpKind::Sigmoid:
      return kernels::sigmoid(inputs[0]);
    case OpKind::Swish:
      return kernels::swish(inputs[0]);
    case OpKind::BatchMatMul: {
      Tensor out = kernels::batchmatmul_fp32(inputs[0], inputs[1],
                                             ref_node.transpose_b);
      if (ref_node.flatten_output && out.dims.size() == 3)
        out.dims = {out.dims[0], out.dims[1] * out.dims[2]};
      return out;
    }
    default:
      throw std::logic_error("run_reference_node: unsupported kind");
  }
}

}  // namespace

std::vector<OpErrorRecord> shadow_compare(const ModelGraph& g_lowp,
                                          const ModelGraph& g_ref,
                                          const Batch& batch,
                                          const Backend& backend) {
  const ExecutionTrace trace = run_traced(g_lowp, batch, backend);

  std::vector<OpErrorRecord> records;
  for (const Node& n : g_lowp.nodes) {
    if (!shadow_comparable(n.kind)) continue;
    const Node* ref = g_ref.find_node(n.name);
    if (!ref || ref->kind == OpKind::Quantize || ref->kind == OpKind::Dequantize)
      throw std::runtime_error("shadow_compare: no aligned reference node for '" +
                               n.name + "'");

    std::vector<Tensor> inputs;
    for (const auto& in : n.inputs) {
      if (in.rfind("ids:", 0) == 0) continue;  // sparse input, via batch
      inputs.push_back(value_as_fp32(trace.tensors.at(in)));
    }
    const Tensor y_ref = run_reference_node(g_ref, *ref, inputs, batch);
    const Tensor y_got = value_as_fp32(trace.tensors.at(n.output()));

    OpErrorRecord rec;
    rec.node = n.name;
    rec.kind = to_string(n.kind);
    rec.rel_l2_error = rel_l2(y_got.data, y_ref.data);
    if (!inputs.empty()) rec.input = compute_stats(inputs[0].data);
    rec.output = compute_stats(y_got.data);
    if (n.kind == OpKind::FullyConnected || n.kind == OpKind::FCRelu) {
      const auto& wb = g_ref.weights.at(ref->weight);
      if (wb.kind == WeightBlob::Kind::F32) {
        rec.weights = compute_stats(wb.f32);
        rec.has_weights = true;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::map<std::string, double> per_layer_error(const ModelGraph& g_lowp,
                                              const ModelGraph& g_ref,
                                              const Batch& batch,
                                              const Backend& backend) {
  std::map<std::string, double> out;
  for (const auto& rec : shadow_compare(g_lowp, g_ref, batch, backend))
    out[rec.node] = rec.rel_l2_error;
  return out;
}

namespace {

// Minimal shape propagation, enough to size BatchMatMul operands.
std::unordered_map<std::string, std::vector<int64_t>> infer_shapes(
    const ModelGraph& g) {
  std::unordered_map<std::string, std::vector<int64_t>> shapes;
  shapes[g.io.dense_name] = {g.io.dense_dim};
  for (const auto& n : g.nodes) {
    switch (n.kind) {
      case OpKind::FullyConnected:
      case OpKind::FCRelu:
        shapes[n.output()] = {n.out_features};
        break;
      case OpKind::SparseLengthsSum: {
        const int ti = g.table_index(n.table);
        shapes[n.output()] = {ti < 0 ? 0 : g.tables[static_cast<size_t>(ti)].dim};
        break;
      }
      case OpKind::Concat: {
        if (n.stack) {
          const auto& first = shapes[n.inputs[0]];
          shapes[n.output()] = {static_cast<int64_t>(n.inputs.size()),
                                first.empty() ? 0 : first[0]};
        } else {
          int64_t total = 0;
          for (const auto& in : n.inputs) {
            const auto& s = shapes[in];
            total += s.empty() ? 0 : s[0];
          }
          shapes[n.output()] = {total};
        }
        break;
      }
      case OpKind::BatchMatMul: {
        const auto a = shapes[n.inputs[0]];
        const auto b = shapes[n.inputs[1]];
        if (a.size() == 2 && b.size() == 2) {
          const int64_t r = n.transpose_b ? b[0] : b[1];
          if (n.flatten_output)
            shapes[n.output()] = {a[0] * r};
          else
            shapes[n.output()] = {a[0], r};
        }
        break;
      }
      default:
        if (!n.inputs.empty()) shapes[n.output()] = shapes[n.inputs[0]];
        break;
    }
  }
  return shapes;
}

}  // namespace

double graph_flops(const ModelGraph& g) {
  const auto shapes = infer_shapes(g);
  double flops = 0.0;
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::FullyConnected || n.kind == OpKind::FCRelu) {
      flops += 2.0 * static_cast<double>(n.in_features) *
               static_cast<double>(n.out_features);
    } else if (n.kind == OpKind::BatchMatMul) {
      const auto a = shapes.at(n.inputs[0]);
      const auto b = shapes.at(n.inputs[1]);
      if (a.size() == 2 && b.size() == 2) {
        const double p = static_cast<double>(a[0]);
        const double q = static_cast<double>(a[1]);
        const double r = static_cast<double>(n.transpose_b ? b[0] : b[1]);
        flops += 2.0 * p * q * r;  // one stacked matmul per sample
      }
    }
  }
  return flops;
}

double skipped_flops_ratio(const ModelGraph& g, const QuantScheme& scheme) {
  const std::string last = g.last_fc_name();
  double total = 0.0, skipped = 0.0;
  for (const auto& name : g.fc_names()) {
    const Node* n = g.find_node(name);
    const double f = 2.0 * static_cast<double>(n->in_features) *
                     static_cast<double>(n->out_features);
    total += f;
    if (resolve_layer(scheme, name, name == last).skip) skipped += f;
  }
  return total == 0.0 ? 0.0 : skipped / total;
}

}  // namespace lpq
