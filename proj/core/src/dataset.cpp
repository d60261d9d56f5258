// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include "lpq/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace lpq {

using nlohmann::json;

void save_dataset(const EvalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& s : ds) {
    json j;
    j["dense"] = s.dense;
    j["ids"] = s.ids;
    j["label"] = s.label;
    j["weight"] = s.weight;
    out << j.dump() << '\n';
  }
}

EvalDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  EvalDataset ds;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad record: " + e.what());
    }
    LabeledSample s;
    s.dense = j.at("dense").get<std::vector<float>>();
    s.ids = j.at("ids").get<std::vector<std::vector<int32_t>>>();
    s.label = j.at("label").get<int>();
    s.weight = j.value("weight", 1.0f);
    if (s.label != 0 && s.label != 1)
      throw std::runtime_error(path + ": label must be 0 or 1");
    if (!(s.weight > 0.0f))
      throw std::runtime_error(path + ": weight must be positive");
    ds.push_back(std::move(s));
  }
  return ds;
}

Batch to_batch(const EvalDataset& ds, size_t begin, size_t end) {
  Batch b;
  if (begin >= end || end > ds.size())
    throw std::invalid_argument("to_batch: bad slice");
  const size_t n = end - begin;
  const size_t dense_dim = ds[begin].dense.size();
  const size_t slots = ds[begin].ids.size();
  b.dense = Tensor{static_cast<int64_t>(n), static_cast<int64_t>(dense_dim)};
  b.ids.resize(slots);
  for (auto& slot : b.ids) slot.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const auto& s = ds[begin + i];
    if (s.dense.size() != dense_dim || s.ids.size() != slots)
      throw std::invalid_argument("to_batch: inconsistent sample shapes");
    std::copy(s.dense.begin(), s.dense.end(),
              b.dense.data.begin() + i * dense_dim);
    for (size_t t = 0; t < slots; ++t) b.ids[t][i] = s.ids[t];
  }
  return b;
}

Batch to_batch(const EvalDataset& ds) { return to_batch(ds, 0, ds.size()); }

}  // namespace lpq
