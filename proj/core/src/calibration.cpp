// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/calibration.hpp"

#include <stdexcept>

#include <json.hpp>

#include "lpq/io_util.hpp"

namespace lpq {

using json = nlohmann::ordered_json;

const Histogram& CalibrationData::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw std::runtime_error("calibration: no histogram for tensor '" + name +
                             "'");
  return it->second;
}

CalibrationData CalibrationData::merge(const CalibrationData& a,
                                       const CalibrationData& b) {
  CalibrationData out = a;
  for (const auto& [name, h] : b.tensors) {
    auto it = out.tensors.find(name);
    if (it == out.tensors.end())
      out.tensors.emplace(name, h);
    else
      it->second = Histogram::merge(it->second, h);
  }
  return out;
}

void CalibrationData::save(const std::string& path) const {
  json j;
  j["format"] = {{"name", "lpq-calibration"}, {"version", 1}};
  json jt = json::object();
  for (const auto& [name, h] : tensors) {
    json rec;
    rec["lo"] = h.lo();
    rec["hi"] = h.hi();
    rec["running_min"] = h.running_min();
    rec["running_max"] = h.running_max();
    rec["total"] = h.total();
    rec["counts"] = h.counts();
    jt[name] = std::move(rec);
  }
  j["tensors"] = std::move(jt);
  write_text_file(path, j.dump() + "\n");
}

CalibrationData CalibrationData::load(const std::string& path) {
  const json j = json::parse(read_text_file(path));
  if (j.at("format").at("version").get<int>() != 1)
    throw std::runtime_error("calibration: unsupported version in " + path);
  CalibrationData out;
  for (const auto& [name, rec] : j.at("tensors").items()) {
    out.tensors.emplace(
        name, Histogram::from_state(
                  rec.at("lo").get<double>(), rec.at("hi").get<double>(),
                  rec.at("counts").get<std::vector<uint64_t>>(),
                  rec.at("running_min").get<float>(),
                  rec.at("running_max").get<float>(),
                  rec.at("total").get<uint64_t>()));
  }
  return out;
}

}  // namespace lpq
