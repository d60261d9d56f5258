// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/perfmodel.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lpq/io_util.hpp"

namespace lpq {

using json = nlohmann::ordered_json;

HardwareSpec HardwareSpec::from_json_file(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  HardwareSpec hw;
  hw.name = j.value("name", std::string("custom"));
  hw.peak_flops = j.at("peak_flops").get<double>();
  hw.efficiency = j.at("efficiency").get<double>();
  hw.mem_bandwidth = j.at("mem_bandwidth").get<double>();
  if (!(hw.peak_flops > 0) || !(hw.mem_bandwidth > 0) ||
      !(hw.efficiency > 0 && hw.efficiency <= 1))
    throw std::runtime_error("hardware spec out of range: " + path);
  return hw;
}

FCLatency fc_latency(const FCShape& shape, const HardwareSpec& hw) {
  FCLatency r;
  r.t_comp = 2.0 * static_cast<double>(shape.m) * static_cast<double>(shape.n) *
             static_cast<double>(shape.k) / (hw.peak_flops * hw.efficiency);
  r.t_mem = static_cast<double>(shape.weight_bytes_per_element) *
            static_cast<double>(shape.k) * static_cast<double>(shape.n) /
            hw.mem_bandwidth;
  r.t = std::max(r.t_comp, r.t_mem);
  r.bound = r.t_comp < r.t_mem ? BoundClass::Memory : BoundClass::Compute;
  return r;
}

double batch_threshold(const HardwareSpec& hw, int bytes_per_element) {
  return static_cast<double>(bytes_per_element) * hw.peak_flops *
         hw.efficiency / (2.0 * hw.mem_bandwidth);
}

BatchDistribution BatchDistribution::typical() {
  BatchDistribution d;
  d.points = {{1, 0.44}, {2, 0.07}, {4, 0.07},  {8, 0.07},  {12, 0.07},
              {16, 0.07}, {24, 0.07}, {32, 0.05}, {48, 0.04}, {64, 0.03},
              {100, 0.02}};
  return d;
}

BatchDistribution BatchDistribution::fixed(int64_t m) {
  return BatchDistribution{{{m, 1.0}}};
}

namespace {

int weight_bytes(const WeightBlob& w) {
  switch (w.kind) {
    case WeightBlob::Kind::F32: return 4;
    case WeightBlob::Kind::F16: return 2;
    case WeightBlob::Kind::I8: return 1;
  }
  return 4;
}

}  // namespace

GraphLatencyReport graph_report(const ModelGraph& g, const HardwareSpec& hw,
                                const BatchDistribution& dist) {
  GraphLatencyReport rep;
  double fc_mass = 0.0, fc_memory_mass = 0.0;

  for (const auto& n : g.nodes) {
    OpLatencyRow row;
    row.node = n.name;
    row.kind = to_string(n.kind);
    switch (n.kind) {
      case OpKind::FullyConnected:
      case OpKind::FCRelu: {
        const auto& w = g.weights.at(n.weight);
        FCShape shape;
        shape.n = n.in_features;
        shape.k = n.out_features;
        shape.weight_bytes_per_element = weight_bytes(w);
        row.bytes_moved = static_cast<double>(shape.weight_bytes_per_element) *
                          static_cast<double>(shape.n) *
                          static_cast<double>(shape.k);
        for (const auto& [m, p] : dist.points) {
          shape.m = m;
          const FCLatency lat = fc_latency(shape, hw);
          row.expected_latency += p * lat.t;
          if (lat.bound == BoundClass::Memory) row.memory_bound_fraction += p;
          fc_mass += p;
          if (lat.bound == BoundClass::Memory) fc_memory_mass += p;
        }
        break;
      }
      case OpKind::SparseLengthsSum: {
        const int ti = g.table_index(n.table);
        if (ti < 0) continue;
        const auto& table = g.tables[static_cast<size_t>(ti)];
        const double row_bytes =
            static_cast<double>(table.storage_bytes()) /
            std::max<int64_t>(1, table.rows);
        const double pool = n.pool_hint > 0 ? n.pool_hint : 1.0;
        row.bytes_moved = pool * row_bytes;
        // Bandwidth-only model; scales linearly with batch.
        for (const auto& [m, p] : dist.points)
          row.expected_latency +=
              p * static_cast<double>(m) * row.bytes_moved / hw.mem_bandwidth;
        row.memory_bound_fraction = 1.0;
        break;
      }
      case OpKind::BatchMatMul: {
        // Both operands are activations; count their traffic and the flops.
        // Shapes come from the sibling Concat producer.
        const Node* prod = nullptr;
        for (const auto& cand : g.nodes)
          if (cand.output() == n.inputs[0]) prod = &cand;
        if (!prod || !prod->stack) continue;
        const double s = static_cast<double>(prod->inputs.size());
        const Node* sls = nullptr;
        for (const auto& cand : g.nodes)
          if (cand.output() == prod->inputs.back()) sls = &cand;
        double e = 0.0;
        if (sls && sls->kind == OpKind::SparseLengthsSum) {
          const int ti = g.table_index(sls->table);
          if (ti >= 0) e = static_cast<double>(g.tables[static_cast<size_t>(ti)].dim);
        }
        for (const auto& [m, p] : dist.points) {
          const double md = static_cast<double>(m);
          const double t_comp =
              2.0 * md * s * e * s / (hw.peak_flops * hw.efficiency);
          const double t_mem = md * 2.0 * s * e * 4.0 / hw.mem_bandwidth;
          row.expected_latency += p * std::max(t_comp, t_mem);
          row.memory_bound_fraction += t_comp < t_mem ? p : 0.0;
        }
        row.bytes_moved = 2.0 * s * e * 4.0;
        break;
      }
      default:
        continue;
    }
    rep.expected_latency += row.expected_latency;
    if (n.kind == OpKind::FullyConnected || n.kind == OpKind::FCRelu)
      rep.fc_weight_bytes += row.bytes_moved;
    rep.rows.push_back(std::move(row));
  }
  rep.memory_bound_fraction = fc_mass > 0.0 ? fc_memory_mass / fc_mass : 0.0;
  return rep;
}

std::string GraphLatencyReport::to_text() const {
  std::ostringstream ss;
  ss << "node                          kind               E[latency]      "
        "bytes        mem-bound\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-29s %-18s %11.4g s %12.4g %9.1f%%\n",
                  r.node.c_str(), r.kind.c_str(), r.expected_latency,
                  r.bytes_moved, 100.0 * r.memory_bound_fraction);
    ss << buf;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "total E[latency] %.6g s; FC weight bytes %.6g; FC "
                "evaluations memory-bound %.1f%%\n",
                expected_latency, fc_weight_bytes,
                100.0 * memory_bound_fraction);
  ss << buf;
  return ss.str();
}

std::string GraphLatencyReport::to_json_string() const {
  json j;
  j["rows"] = json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"node", r.node},
                         {"kind", r.kind},
                         {"expected_latency", r.expected_latency},
                         {"bytes_moved", r.bytes_moved},
                         {"memory_bound_fraction", r.memory_bound_fraction}});
  j["expected_latency"] = expected_latency;
  j["fc_weight_bytes"] = fc_weight_bytes;
  j["memory_bound_fraction"] = memory_bound_fraction;
  return j.dump(2) + "\n";
}

}  // namespace lpq
