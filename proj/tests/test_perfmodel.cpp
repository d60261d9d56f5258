// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "lpq/datagen.hpp"
#include "lpq/executor.hpp"
#include "lpq/graph.hpp"
#include "lpq/io_util.hpp"
#include "lpq/perfmodel.hpp"
#include "testutil.hpp"

using namespace lpq;

TEST_CASE("fc_latency on the reference point") {
  const HardwareSpec hw = HardwareSpec::broadwell_like();
  const FCShape shape{1, 512, 512, 4};
  const FCLatency lat = fc_latency(shape, hw);
  CHECK(lat.t_comp == doctest::Approx(0.583e-6).epsilon(1e-3));
  CHECK(lat.t_mem == doctest::Approx(14.98e-6).epsilon(1e-3));
  CHECK(lat.bound == BoundClass::Memory);
  CHECK(lat.t == lat.t_mem);

  FCShape int8 = shape;
  int8.weight_bytes_per_element = 1;
  const FCLatency lat8 = fc_latency(int8, hw);
  CHECK(lat8.t_mem == doctest::Approx(lat.t_mem / 4).epsilon(1e-9));
  CHECK(lat8.t_comp == lat.t_comp);

  FCShape big = shape;
  big.m = 1000000;
  CHECK(fc_latency(big, hw).bound == BoundClass::Compute);
}

TEST_CASE("batch threshold values") {
  const HardwareSpec hw = HardwareSpec::broadwell_like();
  CHECK(batch_threshold(hw, 4) == doctest::Approx(25.714).epsilon(1e-3));
  CHECK(batch_threshold(hw, 1) == doctest::Approx(6.4286).epsilon(1e-3));
  CHECK(batch_threshold(hw, 2) == doctest::Approx(12.857).epsilon(1e-3));

  HardwareSpec infinite = hw;
  infinite.mem_bandwidth = 1e30;
  CHECK(batch_threshold(infinite, 4) < 1e-3);
}

TEST_CASE("memory-bound classification is equivalent to m < threshold") {
  std::mt19937_64 rng(97);
  std::uniform_int_distribution<int64_t> mdist(1, 2000), dim(1, 4096);
  std::uniform_real_distribution<double> fdist(1e11, 1e13), bdist(1e9, 1e12),
      edist(0.05, 1.0);
  const int bytes_options[] = {1, 2, 4};
  for (int trial = 0; trial < 10000; ++trial) {
    HardwareSpec hw;
    hw.peak_flops = fdist(rng);
    hw.mem_bandwidth = bdist(rng);
    hw.efficiency = edist(rng);
    FCShape s;
    s.m = mdist(rng);
    s.n = dim(rng);
    s.k = dim(rng);
    s.weight_bytes_per_element = bytes_options[trial % 3];
    const FCLatency lat = fc_latency(s, hw);
    const double threshold = batch_threshold(hw, s.weight_bytes_per_element);
    REQUIRE((lat.bound == BoundClass::Memory) ==
            (static_cast<double>(s.m) < threshold));
  }
}

TEST_CASE("latency is monotone in shape and inversely in hardware") {
  const HardwareSpec hw = HardwareSpec::broadwell_like();
  const FCShape base{8, 256, 256, 4};
  const double t0 = fc_latency(base, hw).t;
  FCShape larger = base;
  larger.m *= 2;
  CHECK(fc_latency(larger, hw).t >= t0);
  larger = base;
  larger.n *= 2;
  CHECK(fc_latency(larger, hw).t >= t0);
  larger = base;
  larger.weight_bytes_per_element = 1;
  CHECK(fc_latency(larger, hw).t <= t0);

  HardwareSpec faster = hw;
  faster.peak_flops *= 2;
  faster.mem_bandwidth *= 2;
  CHECK(fc_latency(base, faster).t <= t0);
}

TEST_CASE("graph report") {
  const ModelGraph g = gen_model(testutil::tiny_model_config(81));
  const HardwareSpec hw = HardwareSpec::broadwell_like();

  SUBCASE("single-m distribution matches fc_latency per row") {
    const GraphLatencyReport rep =
        graph_report(g, hw, BatchDistribution::fixed(4));
    for (const auto& row : rep.rows) {
      if (row.kind != "FullyConnected" && row.kind != "FCRelu") continue;
      const Node* n = g.find_node(row.node);
      const FCLatency lat =
          fc_latency({4, n->in_features, n->out_features, 4}, hw);
      CHECK(row.expected_latency == doctest::Approx(lat.t).epsilon(1e-9));
    }
  }

  SUBCASE("typical distribution keeps most FC evaluations memory bound") {
    const GraphLatencyReport rep =
        graph_report(g, hw, BatchDistribution::typical());
    CHECK(rep.memory_bound_fraction >= 0.86);
    CHECK_FALSE(rep.to_text().empty());
    CHECK_FALSE(rep.to_json_string().empty());
  }

  SUBCASE("int8 weights move four times fewer bytes") {
    const GraphLatencyReport fp32 =
        graph_report(g, hw, BatchDistribution::typical());
    ModelGraph q = fuse_fc_relu(g);
    const EvalDataset ds =
        gen_dataset(g, testutil::tiny_data_config(400, 82));
    const CalibrationData calib = collect_calibration(q, ds);
    QuantScheme scheme;
    q = apply_scheme(q, scheme, calib);
    const GraphLatencyReport int8 =
        graph_report(q, hw, BatchDistribution::typical());
    CHECK(int8.fc_weight_bytes ==
          doctest::Approx(fp32.fc_weight_bytes / 4).epsilon(1e-9));
  }
}

TEST_CASE("hardware spec file parsing") {
  const std::string dir = testutil::tmp_dir("hw");
  write_text_file(dir + "/hw.json",
                  "{\"name\":\"test\",\"peak_flops\":2e12,"
                  "\"efficiency\":0.8,\"mem_bandwidth\":1e11}\n");
  const HardwareSpec hw = HardwareSpec::from_json_file(dir + "/hw.json");
  CHECK(hw.peak_flops == 2e12);
  CHECK(batch_threshold(hw, 4) == doctest::Approx(32.0));

  write_text_file(dir + "/bad.json",
                  "{\"peak_flops\":2e12,\"efficiency\":1.5,"
                  "\"mem_bandwidth\":1e11}\n");
  CHECK_THROWS(HardwareSpec::from_json_file(dir + "/bad.json"));
}
