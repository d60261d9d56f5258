// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/graph.hpp"

#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace lpq {

std::string to_string(OpKind k) {
  switch (k) {
    case OpKind::FullyConnected: return "FullyConnected";
    case OpKind::Relu: return "Relu";
    case OpKind::FCRelu: return "FCRelu";
    case OpKind::Sigmoid: return "Sigmoid";
    case OpKind::Swish: return "Swish";
    case OpKind::Concat: return "Concat";
    case OpKind::SparseLengthsSum: return "SparseLengthsSum";
    case OpKind::BatchMatMul: return "BatchMatMul";
    case OpKind::Quantize: return "Quantize";
    case OpKind::Dequantize: return "Dequantize";
  }
  return "?";
}

OpKind op_kind_from_string(const std::string& s) {
  static const std::unordered_map<std::string, OpKind> m = {
      {"FullyConnected", OpKind::FullyConnected},
      {"Relu", OpKind::Relu},
      {"FCRelu", OpKind::FCRelu},
      {"Sigmoid", OpKind::Sigmoid},
      {"Swish", OpKind::Swish},
      {"Concat", OpKind::Concat},
      {"SparseLengthsSum", OpKind::SparseLengthsSum},
      {"BatchMatMul", OpKind::BatchMatMul},
      {"Quantize", OpKind::Quantize},
      {"Dequantize", OpKind::Dequantize},
  };
  auto it = m.find(s);
  if (it == m.end()) throw std::invalid_argument("unknown op kind: " + s);
  return it->second;
}

std::string to_string(EmbeddingTable::Mode m) {
  switch (m) {
    case EmbeddingTable::Mode::F32: return "f32";
    case EmbeddingTable::Mode::Int8Row: return "i8row";
    case EmbeddingTable::Mode::Int4Row: return "i4row";
  }
  return "f32";
}

size_t EmbeddingTable::storage_bytes() const {
  const size_t r = static_cast<size_t>(rows);
  const size_t d = static_cast<size_t>(dim);
  switch (mode) {
    case Mode::F32: return r * d * 4;
    case Mode::Int8Row: return r * (d + 8);
    case Mode::Int4Row: return r * ((d + 1) / 2 + 4);
  }
  return 0;
}

const Node* ModelGraph::find_node(const std::string& name) const {
  for (const auto& n : nodes)
    if (n.name == name) return &n;
  return nullptr;
}

Node* ModelGraph::find_node(const std::string& name) {
  for (auto& n : nodes)
    if (n.name == name) return &n;
  return nullptr;
}

int ModelGraph::table_index(const std::string& name) const {
  for (size_t i = 0; i < tables.size(); ++i)
    if (tables[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> ModelGraph::fc_names() const {
  std::vector<std::string> out;
  for (const auto& n : nodes)
    if (n.kind == OpKind::FullyConnected || n.kind == OpKind::FCRelu)
      out.push_back(n.name);
  return out;
}

std::string ModelGraph::last_fc_name() const {
  std::string last;
  for (const auto& n : nodes)
    if (n.kind == OpKind::FullyConnected || n.kind == OpKind::FCRelu)
      last = n.name;
  return last;
}

size_t ModelGraph::table_storage_bytes() const {
  size_t total = 0;
  for (const auto& t : tables) total += t.storage_bytes();
  return total;
}

namespace {

struct Shape {
  std::vector<int64_t> dims;  // feature dims, batch axis implicit
  bool quantized = false;
};

}  // namespace

std::vector<ValidationIssue> validate(const ModelGraph& g) {
  std::vector<ValidationIssue> issues;
  auto add = [&](const std::string& node, std::string msg) {
    issues.push_back({node, std::move(msg)});
  };

  std::set<std::string> node_names;
  std::unordered_map<std::string, size_t> producer;  // tensor -> node index
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];
    if (!node_names.insert(n.name).second)
      add(n.name, "duplicate node name");
    if (n.outputs.size() != 1) add(n.name, "nodes must have exactly one output");
    for (const auto& out : n.outputs) {
      if (producer.count(out))
        add(n.name, "tensor '" + out + "' produced more than once");
      producer[out] = i;
    }
  }

  std::unordered_map<std::string, Shape> shapes;
  shapes[g.io.dense_name] = Shape{{g.io.dense_dim}, false};

  for (size_t i = 0; i < g.nodes.size(); ++i) {
    const Node& n = g.nodes[i];

    // Edge discipline: every input must be an io input or an earlier node's
    // output.
    std::vector<Shape> in_shapes;
    bool inputs_ok = true;
    for (const auto& in : n.inputs) {
      if (in.rfind("ids:", 0) == 0) {
        const int slot = std::atoi(in.c_str() + 4);
        if (slot < 0 || slot >= g.io.num_slots)
          add(n.name, "sparse slot out of range: " + in);
        in_shapes.push_back(Shape{});
        continue;
      }
      auto p = producer.find(in);
      if (in != g.io.dense_name && p == producer.end()) {
        add(n.name, "undefined input tensor '" + in + "'");
        inputs_ok = false;
        continue;
      }
      if (p != producer.end() && p->second >= i) {
        add(n.name, "cycle: input '" + in + "' produced by a later node");
        inputs_ok = false;
        continue;
      }
      auto s = shapes.find(in);
      if (s == shapes.end()) {
        inputs_ok = false;  // producer itself failed shape inference
        continue;
      }
      in_shapes.push_back(s->second);
    }
    if (!inputs_ok) continue;

    Shape out;
    switch (n.kind) {
      case OpKind::FullyConnected:
      case OpKind::FCRelu: {
        if (in_shapes.size() != 1 || in_shapes[0].dims.size() != 1) {
          add(n.name, "fc expects one rank-1 input");
          break;
        }
        if (in_shapes[0].dims[0] != n.in_features)
          add(n.name, "fc input width " + std::to_string(in_shapes[0].dims[0]) +
                          " != in_features " + std::to_string(n.in_features));
        auto wb = g.weights.find(n.weight);
        if (wb == g.weights.end()) {
          add(n.name, "missing weight blob '" + n.weight + "'");
        } else {
          const auto& dims = wb->second.dims;
          if (dims.size() != 2 || dims[0] != n.out_features ||
              dims[1] != n.in_features)
            add(n.name, "weight blob shape mismatch");
          if (n.precision == Precision::Int8 &&
              wb->second.kind != WeightBlob::Kind::I8)
            add(n.name, "int8 node with non-int8 weights");
          if (n.precision == Precision::Fp16 &&
              wb->second.kind != WeightBlob::Kind::F16)
            add(n.name, "fp16 node with non-fp16 weights");
        }
        auto bb = g.weights.find(n.bias);
        if (bb == g.weights.end())
          add(n.name, "missing bias blob '" + n.bias + "'");
        else if (bb->second.numel() != n.out_features)
          add(n.name, "bias blob size mismatch");
        if (n.precision == Precision::Int8) {
          if (!in_shapes[0].quantized)
            add(n.name, "int8 fc consumes an unquantized tensor (missing Quantize)");
          if (!(n.in_qp.scale > 0.0f) || !(n.out_qp.scale > 0.0f))
            add(n.name, "int8 fc with non-positive activation scale");
        } else if (in_shapes[0].quantized) {
          add(n.name, "non-int8 fc consumes a quantized tensor (missing Dequantize)");
        }
        out.dims = {n.out_features};
        out.quantized = n.precision == Precision::Int8;
        break;
      }
      case OpKind::Relu:
      case OpKind::Sigmoid:
      case OpKind::Swish: {
        if (in_shapes.size() != 1) {
          add(n.name, "unary op expects one input");
          break;
        }
        if (in_shapes[0].quantized)
          add(n.name, "nonlinearity on a quantized tensor (missing Dequantize)");
        out = in_shapes[0];
        break;
      }
      case OpKind::Concat: {
        if (in_shapes.empty()) {
          add(n.name, "concat with no inputs");
          break;
        }
        for (const auto& s : in_shapes)
          if (s.quantized)
            add(n.name, "concat on a quantized tensor (missing Dequantize)");
        if (n.stack) {
          for (const auto& s : in_shapes)
            if (s.dims != in_shapes[0].dims)
              add(n.name, "stack inputs must agree in shape");
          out.dims = {static_cast<int64_t>(in_shapes.size()),
                      in_shapes[0].dims.empty() ? 0 : in_shapes[0].dims[0]};
        } else {
          int64_t total = 0;
          for (const auto& s : in_shapes) {
            if (s.dims.size() != 1) {
              add(n.name, "concat expects rank-1 inputs");
              break;
            }
            total += s.dims[0];
          }
          out.dims = {total};
        }
        break;
      }
      case OpKind::SparseLengthsSum: {
        const int ti = g.table_index(n.table);
        if (ti < 0) {
          add(n.name, "missing embedding table '" + n.table + "'");
          break;
        }
        if (n.inputs.size() != 1 || n.inputs[0].rfind("ids:", 0) != 0)
          add(n.name, "sls expects one ids:<slot> input");
        out.dims = {g.tables[static_cast<size_t>(ti)].dim};
        break;
      }
      case OpKind::BatchMatMul: {
        if (in_shapes.size() != 2 || in_shapes[0].dims.size() != 2 ||
            in_shapes[1].dims.size() != 2) {
          add(n.name, "batchmatmul expects two rank-2 stacked inputs");
          break;
        }
        const auto& a = in_shapes[0].dims;
        const auto& b = in_shapes[1].dims;
        const int64_t q = n.transpose_b ? b[1] : b[0];
        const int64_t r = n.transpose_b ? b[0] : b[1];
        if (a[1] != q) add(n.name, "batchmatmul inner dim mismatch");
        if (n.flatten_output)
          out.dims = {a[0] * r};
        else
          out.dims = {a[0], r};
        break;
      }
      case OpKind::Quantize: {
        if (in_shapes.size() != 1) {
          add(n.name, "quantize expects one input");
          break;
        }
        if (!n.dynamic_input && !(n.qparams.scale > 0.0f))
          add(n.name, "quantize with non-positive scale");
        out = in_shapes[0];
        out.quantized = true;
        break;
      }
      case OpKind::Dequantize: {
        if (in_shapes.size() != 1) {
          add(n.name, "dequantize expects one input");
          break;
        }
        if (!in_shapes[0].quantized)
          add(n.name, "dequantize on an unquantized tensor");
        out = in_shapes[0];
        out.quantized = false;
        break;
      }
    }
    if (n.kind == OpKind::FCRelu && n.source.empty())
      add(n.name, "FCRelu without fusion provenance");
    shapes[n.output()] = out;
  }

  auto op = producer.find(g.io.output);
  if (op == producer.end()) {
    add("", "graph output '" + g.io.output + "' is not produced");
  } else {
    const Node& last = g.nodes[op->second];
    if (last.kind != OpKind::Sigmoid)
      add(last.name, "graph output must come from a Sigmoid");
    auto s = shapes.find(g.io.output);
    if (s != shapes.end() &&
        !(s->second.dims == std::vector<int64_t>{1}))
      add(last.name, "graph output must be a single probability");
  }

  return issues;
}

void validate_or_throw(const ModelGraph& g) {
  const auto issues = validate(g);
  if (issues.empty()) return;
  std::ostringstream ss;
  ss << "model validation failed (" << issues.size() << " issue(s)):";
  for (size_t i = 0; i < issues.size() && i < 8; ++i)
    ss << "\n  [" << issues[i].node << "] " << issues[i].message;
  throw std::runtime_error(ss.str());
}

}  // namespace lpq
