// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/scheme.hpp"

#include <stdexcept>

#include <json.hpp>

#include "lpq/io_util.hpp"

namespace lpq {

using json = nlohmann::ordered_json;

std::string to_string(Precision p) {
  switch (p) {
    case Precision::Fp32: return "fp32";
    case Precision::Fp16: return "fp16";
    case Precision::Int8: return "int8";
  }
  return "fp32";
}

Precision precision_from_string(const std::string& s) {
  if (s == "fp32") return Precision::Fp32;
  if (s == "fp16") return Precision::Fp16;
  if (s == "int8") return Precision::Int8;
  throw std::invalid_argument("unknown precision: " + s);
}

std::string to_string(LayerOverride::Action a) {
  switch (a) {
    case LayerOverride::Action::PerChannelWeights: return "per-channel-weights";
    case LayerOverride::Action::PercentileActs: return "percentile-acts";
    case LayerOverride::Action::L2MinActs: return "l2min-acts";
    case LayerOverride::Action::Skip: return "skip";
  }
  return "skip";
}

namespace {

LayerOverride::Action action_from_string(const std::string& s) {
  if (s == "per-channel-weights") return LayerOverride::Action::PerChannelWeights;
  if (s == "percentile-acts") return LayerOverride::Action::PercentileActs;
  if (s == "l2min-acts") return LayerOverride::Action::L2MinActs;
  if (s == "skip") return LayerOverride::Action::Skip;
  throw std::invalid_argument("unknown override action: " + s);
}

std::string gran_to_string(Granularity g) {
  return g == Granularity::PerChannel ? "per-channel" : "per-tensor";
}

Granularity gran_from_string(const std::string& s) {
  if (s == "per-tensor") return Granularity::PerTensor;
  if (s == "per-channel") return Granularity::PerChannel;
  throw std::invalid_argument("unknown weight granularity: " + s);
}

}  // namespace

std::string GlobalScheme::label() const {
  std::string s = "acts=" + to_string(act_range) +
                  " weights=" + to_string(weight_range) + "/" +
                  gran_to_string(weight_granularity);
  if (skip_last_fc) s += " skip-last";
  s += " fallback=" + to_string(fallback_precision);
  return s;
}

QuantScheme QuantScheme::all_skip(Precision fallback) {
  QuantScheme s;
  s.global.fallback_precision = fallback;
  s.overrides.push_back({"*", LayerOverride::Action::Skip, 0.99});
  return s;
}

std::string QuantScheme::to_json_string() const {
  json j;
  j["version"] = 1;
  j["global"]["act_range"] = to_string(global.act_range);
  j["global"]["weight_range"] = to_string(global.weight_range);
  j["global"]["weight_granularity"] = gran_to_string(global.weight_granularity);
  j["global"]["skip_last_fc"] = global.skip_last_fc;
  j["global"]["fallback_precision"] = to_string(global.fallback_precision);
  j["overrides"] = json::array();
  for (const auto& o : overrides) {
    json jo;
    jo["node"] = o.node;
    jo["action"] = to_string(o.action);
    if (o.action == LayerOverride::Action::PercentileActs) jo["q"] = o.q;
    j["overrides"].push_back(jo);
  }
  return j.dump(2) + "\n";
}

QuantScheme QuantScheme::from_json_string(const std::string& text) {
  const json j = json::parse(text);
  QuantScheme s;
  const auto& g = j.at("global");
  s.global.act_range = range_method_from_string(g.at("act_range"));
  s.global.weight_range = range_method_from_string(g.at("weight_range"));
  s.global.weight_granularity =
      gran_from_string(g.at("weight_granularity"));
  s.global.skip_last_fc = g.at("skip_last_fc").get<bool>();
  s.global.fallback_precision =
      precision_from_string(g.at("fallback_precision"));
  for (const auto& jo : j.at("overrides")) {
    LayerOverride o;
    o.node = jo.at("node");
    o.action = action_from_string(jo.at("action"));
    o.q = jo.value("q", 0.99);
    s.overrides.push_back(o);
  }
  return s;
}

void QuantScheme::save(const std::string& path) const {
  write_text_file(path, to_json_string());
}

QuantScheme QuantScheme::load(const std::string& path) {
  return from_json_string(read_text_file(path));
}

uint64_t QuantScheme::hash() const {
  const std::string s = to_json_string();
  return fnv1a64({reinterpret_cast<const uint8_t*>(s.data()), s.size()});
}

LayerQuantConfig resolve_layer(const QuantScheme& scheme,
                               const std::string& node, bool is_last_fc) {
  LayerQuantConfig c;
  c.weight_granularity = scheme.global.weight_granularity;
  c.act_range = scheme.global.act_range;
  c.weight_range = scheme.global.weight_range;
  c.skip = is_last_fc && scheme.global.skip_last_fc;
  for (const auto& o : scheme.overrides) {
    if (o.node != node && o.node != "*") continue;
    switch (o.action) {
      case LayerOverride::Action::PerChannelWeights:
        c.weight_granularity = Granularity::PerChannel;
        break;
      case LayerOverride::Action::PercentileActs:
        c.act_range = RangeMethod::percentile(o.q);
        break;
      case LayerOverride::Action::L2MinActs:
        c.act_range = RangeMethod::l2min();
        break;
      case LayerOverride::Action::Skip:
        c.skip = true;
        break;
    }
  }
  return c;
}

}  // namespace lpq
