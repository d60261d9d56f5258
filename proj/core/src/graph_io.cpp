// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "lpq/graph.hpp"
#include "lpq/io_util.hpp"

namespace lpq {

using json = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kToolkitVersion = "0.1.0";

json qparams_to_json(const QuantParams& p) {
  return json{{"scale", p.scale}, {"zeropt", p.zeropt}};
}

QuantParams qparams_from_json(const json& j) {
  return QuantParams{j.at("scale").get<float>(), j.at("zeropt").get<int32_t>()};
}

json node_to_json(const Node& n) {
  json j;
  j["name"] = n.name;
  j["kind"] = to_string(n.kind);
  j["inputs"] = n.inputs;
  j["outputs"] = n.outputs;
  switch (n.kind) {
    case OpKind::FullyConnected:
    case OpKind::FCRelu:
      j["weight"] = n.weight;
      j["bias"] = n.bias;
      j["in_features"] = n.in_features;
      j["out_features"] = n.out_features;
      j["precision"] = to_string(n.precision);
      if (n.precision == Precision::Fp16)
        j["fp16_accum"] =
            n.fp16_accum == kernels::AccumMode::Fp16 ? "fp16" : "fp32";
      if (n.precision == Precision::Int8) {
        j["in_qp"] = qparams_to_json(n.in_qp);
        j["out_qp"] = qparams_to_json(n.out_qp);
        if (n.dynamic_input) j["dynamic_input"] = true;
      }
      break;
    case OpKind::SparseLengthsSum:
      j["table"] = n.table;
      j["slot"] = n.slot;
      if (n.pool_hint > 0.0) j["pool_hint"] = n.pool_hint;
      break;
    case OpKind::Concat:
      if (n.stack) j["stack"] = true;
      break;
    case OpKind::BatchMatMul:
      if (n.transpose_b) j["transpose_b"] = true;
      if (n.flatten_output) j["flatten_output"] = true;
      break;
    case OpKind::Quantize:
      j["qparams"] = qparams_to_json(n.qparams);
      if (n.dynamic_input) j["dynamic_input"] = true;
      break;
    case OpKind::Dequantize:
      j["qparams"] = qparams_to_json(n.qparams);
      break;
    case OpKind::Sigmoid:
    case OpKind::Swish:
      if (n.lut) {
        j["lut"] = {{"lo", n.lut->lo},
                    {"hi", n.lut->hi},
                    {"entries", n.lut->entries},
                    {"interp",
                     n.lut->interp == kernels::LutSpec::Interp::Linear
                         ? "linear"
                         : "quadratic"}};
      }
      break;
    case OpKind::Relu:
      break;
  }
  if (!n.source.empty()) j["source"] = n.source;
  return j;
}

Node node_from_json(const json& j) {
  Node n;
  n.name = j.at("name");
  n.kind = op_kind_from_string(j.at("kind"));
  n.inputs = j.at("inputs").get<std::vector<std::string>>();
  n.outputs = j.at("outputs").get<std::vector<std::string>>();
  n.weight = j.value("weight", "");
  n.bias = j.value("bias", "");
  n.in_features = j.value("in_features", int64_t{0});
  n.out_features = j.value("out_features", int64_t{0});
  if (j.contains("precision"))
    n.precision = precision_from_string(j.at("precision"));
  if (j.contains("fp16_accum"))
    n.fp16_accum = j.at("fp16_accum") == "fp16" ? kernels::AccumMode::Fp16
                                                : kernels::AccumMode::Fp32;
  if (j.contains("in_qp")) n.in_qp = qparams_from_json(j.at("in_qp"));
  if (j.contains("out_qp")) n.out_qp = qparams_from_json(j.at("out_qp"));
  n.dynamic_input = j.value("dynamic_input", false);
  n.table = j.value("table", "");
  n.slot = j.value("slot", 0);
  n.pool_hint = j.value("pool_hint", 0.0);
  n.stack = j.value("stack", false);
  n.transpose_b = j.value("transpose_b", false);
  n.flatten_output = j.value("flatten_output", false);
  if (j.contains("qparams")) n.qparams = qparams_from_json(j.at("qparams"));
  if (j.contains("lut")) {
    kernels::LutSpec spec;
    spec.lo = j.at("lut").at("lo").get<float>();
    spec.hi = j.at("lut").at("hi").get<float>();
    spec.entries = j.at("lut").at("entries").get<int>();
    spec.interp = j.at("lut").at("interp") == "quadratic"
                      ? kernels::LutSpec::Interp::Quadratic
                      : kernels::LutSpec::Interp::Linear;
    n.lut = spec;
  }
  n.source = j.value("source", "");
  return n;
}

void pad_to_64(std::vector<uint8_t>& blob) {
  blob.resize(align64(blob.size()), 0);
}

}  // namespace

void save_model(const ModelGraph& g, const std::string& stem) {
  std::vector<uint8_t> blob;
  json j;
  j["format"] = {{"name", "lpq-model"}, {"version", kFormatVersion}};
  j["toolkit_version"] = kToolkitVersion;
  j["io"] = {{"dense_dim", g.io.dense_dim},
             {"num_slots", g.io.num_slots},
             {"dense", g.io.dense_name},
             {"output", g.io.output}};

  j["nodes"] = json::array();
  for (const auto& n : g.nodes) j["nodes"].push_back(node_to_json(n));

  j["weights"] = json::array();
  for (const auto& [name, w] : g.weights) {
    pad_to_64(blob);
    const size_t offset = blob.size();
    json jw;
    jw["name"] = name;
    jw["dims"] = w.dims;
    switch (w.kind) {
      case WeightBlob::Kind::F32:
        jw["kind"] = "f32";
        for (float v : w.f32) put_f32(blob, v);
        break;
      case WeightBlob::Kind::F16:
        jw["kind"] = "f16";
        for (uint16_t v : w.f16) put_u16(blob, v);
        break;
      case WeightBlob::Kind::I8:
        jw["kind"] = "i8";
        jw["scales"] = w.i8.scales;
        for (int8_t v : w.i8.data)
          blob.push_back(static_cast<uint8_t>(v));
        break;
    }
    jw["offset"] = offset;
    jw["bytes"] = blob.size() - offset;
    j["weights"].push_back(std::move(jw));
  }

  j["tables"] = json::array();
  for (const auto& t : g.tables) {
    pad_to_64(blob);
    const size_t offset = blob.size();
    json jt;
    jt["name"] = t.name;
    jt["rows"] = t.rows;
    jt["dim"] = t.dim;
    jt["mode"] = to_string(t.mode);
    if (t.mode == EmbeddingTable::Mode::F32) {
      for (float v : t.f32.data) put_f32(blob, v);
    } else {
      // Row-major rows with trailing (scale, bias) metadata per row.
      const auto& q = t.qdata;
      for (int64_t r = 0; r < t.rows; ++r) {
        const size_t rb = q.row_bytes();
        const uint8_t* row = q.data.data() + static_cast<size_t>(r) * rb;
        blob.insert(blob.end(), row, row + rb);
        const auto& p = q.params[static_cast<size_t>(r)];
        if (t.mode == EmbeddingTable::Mode::Int4Row) {
          put_u16(blob, to_half(static_cast<float>(p.scale)).bits);
          put_u16(blob, to_half(static_cast<float>(p.bias)).bits);
        } else {
          put_f32(blob, static_cast<float>(p.scale));
          put_f32(blob, static_cast<float>(p.bias));
        }
      }
    }
    jt["offset"] = offset;
    jt["bytes"] = blob.size() - offset;
    j["tables"].push_back(std::move(jt));
  }

  // The blob lives next to the manifest as <stem>.bin; only size and
  // checksum are recorded so manifests stay byte-identical across paths.
  j["blob"] = {{"bytes", blob.size()}, {"fnv1a64", to_hex(fnv1a64(blob))}};

  write_text_file(stem + ".json", j.dump(1) + "\n");
  write_file(stem + ".bin", blob);
}

ModelGraph load_model(const std::string& stem) {
  const json j = json::parse(read_text_file(stem + ".json"));
  if (j.at("format").at("name") != "lpq-model")
    throw std::runtime_error("not a model manifest: " + stem + ".json");
  if (j.at("format").at("version").get<int>() != kFormatVersion)
    throw std::runtime_error("unsupported model format version in " + stem);

  const auto blob = read_file(stem + ".bin");
  if (blob.size() != j.at("blob").at("bytes").get<size_t>())
    throw std::runtime_error("weight blob size mismatch for " + stem);
  if (to_hex(fnv1a64(blob)) != j.at("blob").at("fnv1a64").get<std::string>())
    throw std::runtime_error("weight blob checksum mismatch for " + stem);

  ModelGraph g;
  g.io.dense_dim = j.at("io").at("dense_dim").get<int64_t>();
  g.io.num_slots = j.at("io").at("num_slots").get<int64_t>();
  g.io.dense_name = j.at("io").at("dense").get<std::string>();
  g.io.output = j.at("io").at("output").get<std::string>();

  for (const auto& jn : j.at("nodes")) g.nodes.push_back(node_from_json(jn));

  for (const auto& jw : j.at("weights")) {
    WeightBlob w;
    w.dims = jw.at("dims").get<std::vector<int64_t>>();
    const size_t offset = jw.at("offset").get<size_t>();
    const size_t bytes = jw.at("bytes").get<size_t>();
    if (offset + bytes > blob.size())
      throw std::runtime_error("weight blob segment out of range");
    const std::string kind = jw.at("kind");
    const int64_t numel = w.numel();
    if (kind == "f32") {
      w.kind = WeightBlob::Kind::F32;
      w.f32.resize(static_cast<size_t>(numel));
      for (int64_t i = 0; i < numel; ++i)
        w.f32[static_cast<size_t>(i)] =
            get_f32(blob, offset + static_cast<size_t>(i) * 4);
    } else if (kind == "f16") {
      w.kind = WeightBlob::Kind::F16;
      w.f16.resize(static_cast<size_t>(numel));
      for (int64_t i = 0; i < numel; ++i)
        w.f16[static_cast<size_t>(i)] =
            get_u16(blob, offset + static_cast<size_t>(i) * 2);
    } else if (kind == "i8") {
      w.kind = WeightBlob::Kind::I8;
      w.i8.k = w.dims.at(0);
      w.i8.n = w.dims.at(1);
      w.i8.scales = jw.at("scales").get<std::vector<float>>();
      w.i8.data.resize(static_cast<size_t>(numel));
      std::memcpy(w.i8.data.data(), blob.data() + offset,
                  static_cast<size_t>(numel));
      w.i8.col_offsets.resize(static_cast<size_t>(w.i8.k));
      for (int64_t c = 0; c < w.i8.k; ++c) {
        int32_t s = 0;
        for (int64_t t = 0; t < w.i8.n; ++t) s += w.i8.data[c * w.i8.n + t];
        w.i8.col_offsets[static_cast<size_t>(c)] = s;
      }
    } else {
      throw std::runtime_error("unknown weight kind: " + kind);
    }
    g.weights.emplace(jw.at("name").get<std::string>(), std::move(w));
  }

  for (const auto& jt : j.at("tables")) {
    EmbeddingTable t;
    t.name = jt.at("name").get<std::string>();
    t.rows = jt.at("rows").get<int64_t>();
    t.dim = jt.at("dim").get<int64_t>();
    const std::string mode = jt.at("mode");
    const size_t offset = jt.at("offset").get<size_t>();
    const size_t bytes = jt.at("bytes").get<size_t>();
    if (offset + bytes > blob.size())
      throw std::runtime_error("table blob segment out of range");
    if (mode == "f32") {
      t.mode = EmbeddingTable::Mode::F32;
      t.f32 = Tensor{t.rows, t.dim};
      for (int64_t i = 0; i < t.rows * t.dim; ++i)
        t.f32.data[static_cast<size_t>(i)] =
            get_f32(blob, offset + static_cast<size_t>(i) * 4);
    } else {
      t.mode = mode == "i4row" ? EmbeddingTable::Mode::Int4Row
                               : EmbeddingTable::Mode::Int8Row;
      auto& q = t.qdata;
      q.rows = t.rows;
      q.dim = t.dim;
      q.range = t.mode == EmbeddingTable::Mode::Int4Row ? IntRange::u4()
                                                        : IntRange::u8();
      const size_t rb = q.row_bytes();
      const size_t meta = t.mode == EmbeddingTable::Mode::Int4Row ? 4 : 8;
      q.data.resize(static_cast<size_t>(t.rows) * rb);
      q.params.resize(static_cast<size_t>(t.rows));
      size_t pos = offset;
      for (int64_t r = 0; r < t.rows; ++r) {
        std::memcpy(q.data.data() + static_cast<size_t>(r) * rb,
                    blob.data() + pos, rb);
        pos += rb;
        auto& p = q.params[static_cast<size_t>(r)];
        if (t.mode == EmbeddingTable::Mode::Int4Row) {
          p.scale = from_half(Half{get_u16(blob, pos)});
          p.bias = from_half(Half{get_u16(blob, pos + 2)});
        } else {
          p.scale = get_f32(blob, pos);
          p.bias = get_f32(blob, pos + 4);
        }
        pos += meta;
      }
      (void)bytes;
    }
    g.tables.push_back(std::move(t));
  }

  return g;
}

}  // namespace lpq
