// Copyright (c) lpq contributors.
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end exercises of the command-line tool via the built binary.

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "lpq/io_util.hpp"
#include "lpq/scheme.hpp"
#include "testutil.hpp"

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LPQ_BIN) + " " + args + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("cli lifecycle on a tiny model") {
  const std::string dir = testutil::tmp_dir("cli");

  REQUIRE(run_cli("gen-model --out " + dir + "/model --preset tiny --seed 5") == 0);
  REQUIRE(std::filesystem::exists(dir + "/model.json"));
  REQUIRE(std::filesystem::exists(dir + "/model.bin"));
  REQUIRE(std::filesystem::exists(dir + "/model.manifest.json"));

  REQUIRE(run_cli("gen-data --model " + dir + "/model --out " + dir +
                  "/train.jsonl --n 1500 --seed 6 --ids-per-slot 6") == 0);
  REQUIRE(run_cli("gen-data --model " + dir + "/model --out " + dir +
                  "/eval.jsonl --n 1200 --seed 7 --ids-per-slot 6") == 0);

  REQUIRE(run_cli("calibrate --model " + dir + "/model --data " + dir +
                  "/train.jsonl --out " + dir + "/calib.json") == 0);
  REQUIRE(std::filesystem::exists(dir + "/calib.json"));

  REQUIRE(run_cli("search --model " + dir + "/model --data " + dir +
                  "/train.jsonl --eval " + dir + "/eval.jsonl --out-scheme " +
                  dir + "/scheme.json --out-model " + dir +
                  "/quant --small-eval-size 500 --calib-size 600 --seed 8 "
                  "--log " + dir + "/search.jsonl") == 0);
  REQUIRE(std::filesystem::exists(dir + "/scheme.json"));
  REQUIRE(std::filesystem::exists(dir + "/quant.json"));
  REQUIRE(std::filesystem::exists(dir + "/search.jsonl"));

  REQUIRE(run_cli("quantize --model " + dir + "/model --scheme " + dir +
                  "/scheme.json --calib " + dir + "/calib.json --out " + dir +
                  "/quant2 --tables int4-top-half") == 0);

  REQUIRE(run_cli("eval --model-a " + dir + "/quant --model-b " + dir +
                  "/model --data " + dir + "/eval.jsonl --out " + dir +
                  "/report.json") == 0);
  const auto rep = nlohmann::json::parse(lpq::read_text_file(dir + "/report.json"));
  CHECK(rep.contains("ne_diff"));
  CHECK(std::fabs(rep["ne_diff"].get<double>()) < 0.01);

  REQUIRE(run_cli("debug --model-lowp " + dir + "/quant --model-fp32 " + dir +
                  "/model --data " + dir + "/eval.jsonl --out " + dir +
                  "/debug --n 64 --format json") == 0);
  REQUIRE(std::filesystem::exists(dir + "/debug/report.json"));
  REQUIRE(std::filesystem::exists(dir + "/debug/bundle/model.json"));

  REQUIRE(run_cli("roofline --model " + dir + "/model --batch-dist typical "
                  "--out " + dir + "/roofline.json") == 0);
  const auto roof =
      nlohmann::json::parse(lpq::read_text_file(dir + "/roofline.json"));
  CHECK(roof["memory_bound_fraction"].get<double>() >= 0.86);
}

TEST_CASE("cli eval of a model against itself reports zero ne_diff") {
  const std::string dir = testutil::tmp_dir("cli_self");
  REQUIRE(run_cli("gen-model --out " + dir + "/m --preset tiny --seed 9") == 0);
  REQUIRE(run_cli("gen-data --model " + dir + "/m --out " + dir +
                  "/d.jsonl --n 600 --seed 10 --ids-per-slot 6") == 0);
  REQUIRE(run_cli("eval --model-a " + dir + "/m --model-b " + dir +
                  "/m --data " + dir + "/d.jsonl --out " + dir +
                  "/self.json") == 0);
  const auto rep = nlohmann::json::parse(lpq::read_text_file(dir + "/self.json"));
  CHECK(rep["ne_diff"].get<double>() == 0.0);
}

TEST_CASE("cli monitor exits with the accuracy-gate code on alerts") {
  const std::string dir = testutil::tmp_dir("cli_monitor");
  REQUIRE(run_cli("gen-snapshots --out " + dir + "/snaps --count 3 --preset "
                  "tiny --drift activation-shift:2.0 --calib-n 256 "
                  "--eval-n 384") == 0);

  // A passing scheme file first.
  REQUIRE(run_cli("gen-model --out " + dir + "/m --preset tiny") == 0);
  lpq::write_text_file(
      dir + "/scheme.json",
      lpq::QuantScheme().to_json_string());

  const int frozen = run_cli("monitor --snapshots " + dir + "/snaps --scheme " +
                             dir + "/scheme.json --threshold 0.001 "
                             "--no-recalibrate --log " + dir + "/mon.jsonl");
  CHECK(frozen == 4);  // drift fires the alert
  REQUIRE(std::filesystem::exists(dir + "/mon.jsonl"));

  const int fresh = run_cli("monitor --snapshots " + dir + "/snaps --scheme " +
                            dir + "/scheme.json --threshold 0.01 --log " +
                            dir + "/mon2.jsonl");
  CHECK(fresh == 0);
}

TEST_CASE("cli failure classes") {
  const std::string dir = testutil::tmp_dir("cli_errors");
  // Usage error.
  CHECK(run_cli("search") == 2);
  CHECK(run_cli("frobnicate") == 2);
  // Missing input file.
  CHECK(run_cli("eval --model-a " + dir + "/no --model-b " + dir +
                "/no --data " + dir + "/no.jsonl") == 3);
  // Accuracy gate: zero skip budget on a model that needs skips.
  REQUIRE(run_cli("gen-model --out " + dir +
                  "/bad --preset tiny --seed 11 "
                  "--fault top_fc1:outlier:12:16") == 0);
  REQUIRE(run_cli("gen-data --model " + dir + "/bad --out " + dir +
                  "/d.jsonl --n 1600 --seed 12 --ids-per-slot 6") == 0);
  CHECK(run_cli("search --model " + dir + "/bad --data " + dir +
                "/d.jsonl --eval " + dir + "/d.jsonl --out-scheme " + dir +
                "/s.json --small-eval-size 500 --calib-size 500 "
                "--max-skip-flops-ratio 0") == 4);
}

TEST_CASE("cli commands are replayable to identical outputs") {
  const std::string dir = testutil::tmp_dir("cli_replay");
  REQUIRE(run_cli("gen-model --out " + dir + "/a --preset tiny --seed 33") == 0);
  REQUIRE(run_cli("gen-model --out " + dir + "/b --preset tiny --seed 33") == 0);
  CHECK(lpq::read_file(dir + "/a.bin") == lpq::read_file(dir + "/b.bin"));
  CHECK(lpq::read_file(dir + "/a.json") == lpq::read_file(dir + "/b.json"));

  const auto manifest = nlohmann::json::parse(
      lpq::read_text_file(dir + "/a.manifest.json"));
  CHECK(manifest["command"] == "gen-model");
  CHECK(manifest["seeds"][0] == 33);
  CHECK(manifest.contains("config_hash"));
}
