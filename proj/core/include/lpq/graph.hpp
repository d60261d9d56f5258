// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lpq/calibration.hpp"
#include "lpq/kernels.hpp"
#include "lpq/quant.hpp"
#include "lpq/scheme.hpp"
#include "lpq/tensor.hpp"

namespace lpq {

enum class OpKind {
  FullyConnected,
  Relu,
  FCRelu,  // fusion product of FullyConnected + Relu
  Sigmoid,
  Swish,
  Concat,
  SparseLengthsSum,
  BatchMatMul,
  Quantize,
  Dequantize,
};

std::string to_string(OpKind k);
OpKind op_kind_from_string(const std::string& s);

struct Node {
  std::string name;
  OpKind kind = OpKind::FullyConnected;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  // FullyConnected / FCRelu
  std::string weight, bias;
  int64_t in_features = 0, out_features = 0;
  Precision precision = Precision::Fp32;
  kernels::AccumMode fp16_accum = kernels::AccumMode::Fp32;
  QuantParams in_qp, out_qp;  // int8 only
  bool dynamic_input = false;  // per-batch min-max activation params

  // SparseLengthsSum
  std::string table;
  int slot = 0;
  double pool_hint = 0.0;  // expected lookups per sample, for the perf model

  // Concat
  bool stack = false;  // rank-3 stack instead of axis-1 concat

  // BatchMatMul
  bool transpose_b = false;
  bool flatten_output = false;

  // Quantize / Dequantize
  QuantParams qparams;

  // Sigmoid / Swish
  std::optional<kernels::LutSpec> lut;

  // Name of the node this one was derived from by a transform.
  std::string source;

  const std::string& output() const { return outputs.at(0); }
};

struct WeightBlob {
  enum class Kind { F32, F16, I8 };
  Kind kind = Kind::F32;
  std::vector<int64_t> dims;  // FC: {k, n} output-major
  std::vector<float> f32;
  std::vector<uint16_t> f16;
  kernels::Int8Weights i8;

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : dims) n *= d;
    return n;
  }
};

struct EmbeddingTable {
  enum class Mode { F32, Int8Row, Int4Row };
  std::string name;
  int64_t rows = 0, dim = 0;
  Mode mode = Mode::F32;
  Tensor f32;                   // Mode::F32
  kernels::RowwiseTable qdata;  // rowwise modes

  /// On-disk bytes of the row payloads including per-row metadata:
  /// int8 rows take dim+8 bytes, int4 rows ceil(dim/2)+4, fp32 rows 4*dim.
  size_t storage_bytes() const;
};

std::string to_string(EmbeddingTable::Mode m);

struct IoSpec {
  int64_t dense_dim = 0;
  int64_t num_slots = 0;
  std::string dense_name = "dense";
  std::string output = "prob";
};

/// Operator DAG plus its weight store. Nodes are kept in topological order;
/// transforms return new graphs and never mutate in place.
struct ModelGraph {
  IoSpec io;
  std::vector<Node> nodes;
  std::map<std::string, WeightBlob> weights;
  std::vector<EmbeddingTable> tables;

  const Node* find_node(const std::string& name) const;
  Node* find_node(const std::string& name);
  int table_index(const std::string& name) const;

  /// FC/FCRelu node names in topological order.
  std::vector<std::string> fc_names() const;
  /// Name of the final FC/FCRelu (the usual skip-last target).
  std::string last_fc_name() const;

  size_t table_storage_bytes() const;
};

struct ValidationIssue {
  std::string node;
  std::string message;
};

/// Structural checks: unique names, topological order, shape agreement along
/// every edge, quantization boundaries, single output.
std::vector<ValidationIssue> validate(const ModelGraph& g);
void validate_or_throw(const ModelGraph& g);

// --- persistence ----------------------------------------------------------

/// Writes <stem>.json (manifest) and <stem>.bin (weight blob, little-endian,
/// 64-byte aligned segments, FNV-1a checksum recorded in the manifest).
void save_model(const ModelGraph& g, const std::string& stem);
ModelGraph load_model(const std::string& stem);

// --- transforms (pure: input is untouched) --------------------------------

/// Fuse every FullyConnected whose sole consumer is a Relu into FCRelu.
ModelGraph fuse_fc_relu(const ModelGraph& g);

/// Remove adjacent Dequantize->Quantize pairs with identical params; fold
/// differing params into a single requantizing Quantize.
ModelGraph elide_dq_q(const ModelGraph& g);

/// Apply a quantization scheme: int8 precision + Quantize/Dequantize
/// boundaries for selected FC layers (ranges from `calib`), fallback
/// precision for skipped ones. Expects a graph that already went through
/// fuse_fc_relu if fusion is wanted.
ModelGraph apply_scheme(const ModelGraph& g, const QuantScheme& scheme,
                        const CalibrationData& calib);

enum class TableQuantMode { None, Int8, Int4TopHalf, Int4 };

/// Rowwise-quantize embedding tables. Int4TopHalf applies 4-bit to the
/// largest half of the tables (by row payload bytes) and 8-bit to the rest.
ModelGraph quantize_tables(const ModelGraph& g, TableQuantMode mode);

}  // namespace lpq
