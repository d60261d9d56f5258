// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/executor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lpq {

Backend Backend::cpu_reference() {
  Backend b;
  b.name = "cpu-reference";
  return b;
}

Backend Backend::accel_emulation() {
  Backend b;
  b.name = "accel-emulation";
  b.fp16_mode = Fp16Mode::Compute;
  b.sls_accum = kernels::AccumMode::Fp16;
  b.nonlinear = Nonlinear::Lut;
  return b;
}

namespace {

using kernels::AccumMode;

const Tensor& as_tensor(const Value& v, const std::string& what) {
  if (!std::holds_alternative<Tensor>(v))
    throw std::runtime_error(what + ": expected an fp32 tensor");
  return std::get<Tensor>(v);
}

const QTensor& as_qtensor(const Value& v, const std::string& what) {
  if (!std::holds_alternative<QTensor>(v))
    throw std::runtime_error(what + ": expected a quantized tensor");
  return std::get<QTensor>(v);
}

// Right-to-left fp32 FC used by the reordered-accumulation test backend.
Tensor fc_fp32_reversed(const Tensor& x, std::span<const float> w,
                        std::span<const float> bias, int64_t n, int64_t k,
                        bool fused_relu) {
  const int64_t m = x.rows();
  Tensor y{m, k};
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      const float* wj = w.data() + j * n;
      const float* xi = x.data.data() + i * n;
      float acc = 0.0f;
      for (int64_t t = n - 1; t >= 0; --t) acc += xi[t] * wj[t];
      acc += bias[j];
      if (fused_relu && acc < 0.0f) acc = 0.0f;
      y.at(i, j) = acc;
    }
  }
  return y;
}

struct Evaluator {
  const ModelGraph& g;
  const Batch& batch;
  const Backend& backend;
  std::map<std::string, Value> values;

  void execute_node(const Node& n) {
    switch (n.kind) {
      case OpKind::FullyConnected:
      case OpKind::FCRelu: {
        const bool fused = n.kind == OpKind::FCRelu;
        const auto& wb = g.weights.at(n.weight);
        const auto& bias = g.weights.at(n.bias).f32;
        if (n.precision == Precision::Int8) {
          const QTensor& x = as_qtensor(values.at(n.inputs[0]), n.name);
          values[n.output()] =
              kernels::fc_int8_requant(x, wb.i8, bias, n.out_qp, fused);
          return;
        }
        const Tensor& x = as_tensor(values.at(n.inputs[0]), n.name);
        if (n.precision == Precision::Fp16) {
          if (backend.fp16_mode == Backend::Fp16Mode::Compute) {
            values[n.output()] = kernels::fc_fp16_compute(
                x, wb.f16, bias, n.in_features, n.out_features, n.fp16_accum,
                fused, backend.half_policy);
          } else {
            values[n.output()] = kernels::fc_fp16_storage(
                x, wb.f16, bias, n.in_features, n.out_features, fused);
          }
          return;
        }
        if (backend.reversed_accumulation) {
          values[n.output()] = fc_fp32_reversed(x, wb.f32, bias, n.in_features,
                                                n.out_features, fused);
        } else {
          values[n.output()] = kernels::fc_fp32(x, wb.f32, bias, n.in_features,
                                                n.out_features, fused);
        }
        return;
      }
      case OpKind::Relu: {
        Tensor t = as_tensor(values.at(n.inputs[0]), n.name);
        kernels::relu_inplace(t);
        values[n.output()] = std::move(t);
        return;
      }
      case OpKind::Sigmoid:
      case OpKind::Swish: {
        const Tensor& x = as_tensor(values.at(n.inputs[0]), n.name);
        const kernels::Lut* lut = nullptr;
        if (backend.nonlinear == Backend::Nonlinear::Lut) {
          const kernels::LutSpec spec = n.lut ? *n.lut : backend.default_lut;
          lut = n.kind == OpKind::Sigmoid ? &kernels::Lut::sigmoid(spec)
                                          : &kernels::Lut::swish(spec);
        }
        values[n.output()] = n.kind == OpKind::Sigmoid ? kernels::sigmoid(x, lut)
                                                       : kernels::swish(x, lut);
        return;
      }
      case OpKind::Concat: {
        std::vector<const Tensor*> ins;
        for (const auto& in : n.inputs)
          ins.push_back(&as_tensor(values.at(in), n.name));
        const int64_t b = ins[0]->rows();
        if (n.stack) {
          const int64_t e = ins[0]->cols();
          Tensor out{b, static_cast<int64_t>(ins.size()), e};
          for (int64_t r = 0; r < b; ++r)
            for (size_t s = 0; s < ins.size(); ++s)
              std::copy_n(ins[s]->data.data() + r * e, e,
                          out.data.data() + (r * static_cast<int64_t>(ins.size()) +
                                             static_cast<int64_t>(s)) *
                                                e);
          values[n.output()] = std::move(out);
        } else {
          int64_t total = 0;
          for (auto* t : ins) total += t->cols();
          Tensor out{b, total};
          for (int64_t r = 0; r < b; ++r) {
            int64_t off = 0;
            for (auto* t : ins) {
              std::copy_n(t->data.data() + r * t->cols(), t->cols(),
                          out.data.data() + r * total + off);
              off += t->cols();
            }
          }
          values[n.output()] = std::move(out);
        }
        return;
      }
      case OpKind::SparseLengthsSum: {
        const int slot = n.slot;
        if (slot < 0 || static_cast<size_t>(slot) >= batch.ids.size())
          throw std::runtime_error(n.name + ": sparse slot out of range");
        const auto& ids = batch.ids[static_cast<size_t>(slot)];
        const int ti = g.table_index(n.table);
        if (ti < 0) throw std::runtime_error(n.name + ": missing table");
        const auto& table = g.tables[static_cast<size_t>(ti)];
        if (table.mode == EmbeddingTable::Mode::F32)
          values[n.output()] =
              kernels::sls_fp32(table.f32, ids, backend.sls_accum);
        else
          values[n.output()] =
              kernels::sls_rowwise(table.qdata, ids, backend.sls_accum);
        return;
      }
      case OpKind::BatchMatMul: {
        const Tensor& a = as_tensor(values.at(n.inputs[0]), n.name);
        const Tensor& b = as_tensor(values.at(n.inputs[1]), n.name);
        Tensor out;
        if (n.precision == Precision::Fp16 &&
            backend.fp16_mode == Backend::Fp16Mode::Compute) {
          out = kernels::batchmatmul_fp16(a, b, n.fp16_accum, n.transpose_b,
                                          backend.half_policy);
        } else {
          out = kernels::batchmatmul_fp32(a, b, n.transpose_b);
        }
        if (n.flatten_output && out.dims.size() == 3)
          out.dims = {out.dims[0], out.dims[1] * out.dims[2]};
        values[n.output()] = std::move(out);
        return;
      }
      case OpKind::Quantize: {
        const Value& in = values.at(n.inputs[0]);
        if (std::holds_alternative<QTensor>(in)) {
          // Requantize: dequantize-then-quantize folded into one node.
          const QTensor& x = std::get<QTensor>(in);
          QTensor out;
          out.dims = x.dims;
          out.params = n.qparams;
          out.data.resize(x.data.size());
          for (size_t i = 0; i < x.data.size(); ++i) {
            const float real =
                dequantize_value(static_cast<int32_t>(x.data[i]), x.params);
            out.data[i] = static_cast<uint8_t>(
                quantize_value(real, n.qparams, IntRange::u8()));
          }
          values[n.output()] = std::move(out);
          return;
        }
        const Tensor& x = std::get<Tensor>(in);
        QuantParams p = n.qparams;
        if (n.dynamic_input) {
          float mn = 0.0f, mx = 0.0f;
          if (!x.data.empty()) {
            mn = mx = x.data[0];
            for (float v : x.data) {
              mn = std::min(mn, v);
              mx = std::max(mx, v);
            }
          }
          p = compute_qparams(mn, mx, IntRange::u8());
        }
        values[n.output()] = kernels::quantize_op(x, p, IntRange::u8());
        return;
      }
      case OpKind::Dequantize: {
        const QTensor& x = as_qtensor(values.at(n.inputs[0]), n.name);
        values[n.output()] = kernels::dequantize_op(x);
        return;
      }
    }
    throw std::logic_error("unhandled op kind");
  }

  ExecutionTrace run_all() {
    values.emplace(g.io.dense_name, batch.dense);
    for (const Node& n : g.nodes) execute_node(n);

    ExecutionTrace trace;
    const Tensor& out = as_tensor(values.at(g.io.output), "graph output");
    trace.predictions.assign(out.data.begin(), out.data.end());
    trace.tensors = std::move(values);
    return trace;
  }
};

}  // namespace

ExecutionTrace run_traced(const ModelGraph& g, const Batch& batch,
                          const Backend& backend) {
  Evaluator ev{g, batch, backend, {}};
  return ev.run_all();
}

std::vector<float> run(const ModelGraph& g, const Batch& batch,
                       const Backend& backend) {
  return run_traced(g, batch, backend).predictions;
}

std::vector<float> run_dataset(const ModelGraph& g, const EvalDataset& ds,
                               const Backend& backend, size_t batch_size) {
  std::vector<float> preds;
  preds.reserve(ds.size());
  for (size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const size_t end = std::min(ds.size(), begin + batch_size);
    const auto p = run(g, to_batch(ds, begin, end), backend);
    preds.insert(preds.end(), p.begin(), p.end());
  }
  return preds;
}

CalibrationData collect_calibration(const ModelGraph& g, const EvalDataset& ds,
                                    const Backend& backend,
                                    size_t batch_size) {
  CalibrationData calib;
  std::vector<std::string> watched;
  for (const auto& n : g.nodes) {
    if (n.kind != OpKind::FullyConnected && n.kind != OpKind::FCRelu) continue;
    watched.push_back(n.inputs[0]);
    watched.push_back(n.output());
  }
  for (const auto& name : watched) calib.tensors.emplace(name, Histogram{});

  for (size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const size_t end = std::min(ds.size(), begin + batch_size);
    auto trace = run_traced(g, to_batch(ds, begin, end), backend);
    for (const auto& name : watched) {
      const auto it = trace.tensors.find(name);
      if (it == trace.tensors.end()) continue;
      const Tensor& t = as_tensor(it->second, name);
      calib.tensors.at(name).observe(t.data);
    }
  }
  return calib;
}

}  // namespace lpq
