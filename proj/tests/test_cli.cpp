// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "spada/compile.hpp"
#include "spada/emit.hpp"
#include "spada/hostbuf.hpp"
#include "spada/parser.hpp"
#include "spada/pipeline.hpp"
#include "spada/stencil.hpp"

#include "fixture_util.hpp"
#include "sim_util.hpp"

using namespace spada;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  auto p = fs::temp_directory_path() / "spada_cli_tests";
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(SPADA_CLI_PATH) + " " + args + " > " +
                    (tmp_dir() / "stdout.txt").string() + " 2> " +
                    (tmp_dir() / "stderr.txt").string();
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string cli_stdout() {
  std::ifstream in(tmp_dir() / "stdout.txt");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string cli_stderr() {
  std::ifstream in(tmp_dir() / "stderr.txt");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::unique_ptr<CompiledProgram> compile_src(const std::string& src,
                                             ParamMap params, Diagnostics& d) {
  auto k = parse_kernel(src, d);
  if (!k) return nullptr;
  auto a = analyze_kernel(*k, params, d);
  if (!a) return nullptr;
  return compile_kernel(std::move(a), d);
}

}  // namespace

// ---------------------------------------------------------------------------
// Exit code contract: 0 success, 1 program error, 2 usage, 3 simulator fault
// ---------------------------------------------------------------------------

TEST_CASE("check exits zero on the pipelined reduction") {
  CHECK(run_cli("check " + fixture_path("reduce_pipelined.spada") + " -DK=4") ==
        0);
}

TEST_CASE("check rejects same-stream use in both if-else branches") {
  auto path = tmp_dir() / "ifelse.spada";
  std::ofstream(path) <<
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[2] a }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] { stream<f32> s = relative_stream(1, 0) }\n"
      "    compute i32 i, i32 j in [0, 0] {\n"
      "      if (i == 0) { await send(a, s) } else { await send(a, s) }\n"
      "    }\n"
      "    compute i32 i, i32 j in [1, 0] { await receive(a, s) }\n"
      "  }\n"
      "}\n";
  CHECK(run_cli("check " + path.string()) == 1);
  CHECK(cli_stderr().find("sema.if-else-stream") != std::string::npos);
}

TEST_CASE("stencil-generated kernels pass check") {
  CHECK(run_cli("check " + fixture_path("laplacian.stencil") +
                " -DI=6 -DJ=6 -DK=4") == 0);
}

TEST_CASE("usage errors exit with code two") {
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("run") == 2);
}

TEST_CASE("simulator faults exit with code three") {
  CHECK(run_cli("run " + fixture_path("negative/deadlock.spada") +
                " --out-dir " + tmp_dir().string()) == 3);
  CHECK(run_cli("run " + fixture_path("negative/race.spada") +
                " --allow-unsafe --out-dir " + tmp_dir().string()) == 3);
  CHECK(run_cli("run " + fixture_path("negative/conflict.spada") +
                " --allow-unsafe --out-dir " + tmp_dir().string()) == 3);
}

TEST_CASE("static errors exit with code one") {
  CHECK(run_cli("run " + fixture_path("negative/race.spada") + " --out-dir " +
                tmp_dir().string()) == 1);
}

// ---------------------------------------------------------------------------
// End-to-end run through the binary
// ---------------------------------------------------------------------------

TEST_CASE("run computes the reduction from a CSV input") {
  auto csv = tmp_dir() / "ones.csv";
  {
    std::ofstream out(csv);
    for (int i = 0; i < 64; ++i) out << "1.0" << (i % 8 == 7 ? "\n" : ",");
  }
  int rc = run_cli("run " + fixture_path("reduce_pipelined.spada") +
                   " --fabric 8x1 -DK=8 --in a_in=" + csv.string() +
                   " --out-dir " + tmp_dir().string());
  REQUIRE(rc == 0);
  auto out = read_binary((tmp_dir() / "out.spb").string());
  REQUIRE(out.has_value());
  REQUIRE(out->data.size() == 8);
  for (const auto& v : out->data) CHECK(v.f == 8.0f);
}

TEST_CASE("run executes a stencil end to end through the binary") {
  auto csv = tmp_dir() / "field.csv";
  {
    std::ofstream out(csv);
    for (int i = 0; i < 4 * 4 * 2; ++i) out << (i % 7) << ".5\n";
  }
  int rc = run_cli("run " + fixture_path("laplacian.stencil") +
                   " --fabric 4x4 -DI=4 -DJ=4 -DK=2 --in in_field_in=" +
                   csv.string() + " --out-dir " + tmp_dir().string());
  REQUIRE(rc == 0);
  auto out = read_binary((tmp_dir() / "out_field_out.spb").string());
  REQUIRE(out.has_value());
  CHECK(out->data.size() == 4 * 4 * 2);
}

TEST_CASE("binary containers round-trip") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    auto buf = random_f32(1 + rng() % 5, 1 + rng() % 9, rng);
    auto path = (tmp_dir() / ("rt" + std::to_string(t) + ".spb")).string();
    REQUIRE(write_binary(path, buf));
    auto back = read_binary(path);
    REQUIRE(back.has_value());
    REQUIRE(back->slices == buf.slices);
    REQUIRE(back->per_slice == buf.per_slice);
    for (std::size_t i = 0; i < buf.data.size(); ++i)
      REQUIRE(back->data[i].f == buf.data[i].f);
  }
}

// ---------------------------------------------------------------------------
// Metadata and extents
// ---------------------------------------------------------------------------

TEST_CASE("compile metadata is byte-identical across runs") {
  std::string src = read_fixture("reduce_pipelined.spada");
  Diagnostics d1, d2;
  auto p1 = compile_src(src, {{"K", 4}}, d1);
  auto p2 = compile_src(src, {{"K", 4}}, d2);
  REQUIRE(p1 != nullptr);
  REQUIRE(p2 != nullptr);
  CHECK(p1->metadata.dump() == p2->metadata.dump());
}

TEST_CASE("the pipelined reduction maps its arguments to a line and a point") {
  Diagnostics d;
  auto prog = compile_src(read_fixture("reduce_pipelined.spada"), {{"K", 4}}, d);
  REQUIRE(prog != nullptr);
  const ArgExtent* a_in = prog->find_arg("a_in");
  REQUIRE(a_in != nullptr);
  CHECK(a_in->slices == 4);
  CHECK(a_in->per_slice == 4);
  CHECK(a_in->layout == "line");
  CHECK(a_in->origin == PECoord{0, 0});
  CHECK(a_in->step_x == 1);
  CHECK(a_in->step_y == 0);
  CHECK_FALSE(a_in->streamed);

  const ArgExtent* out = prog->find_arg("out");
  REQUIRE(out != nullptr);
  CHECK(out->slices == 1);
  CHECK(out->per_slice == 4);
  CHECK(out->layout == "point");
  CHECK(out->origin == PECoord{0, 0});

  // four channels after the checkerboard
  CHECK(prog->metadata["channels_used"] == 4);
}

TEST_CASE("an argument on disjoint PEs is not rectangular") {
  Diagnostics d;
  auto prog = compile_src(
      "kernel @k<>(stream<f32>[2] readonly a_in) {\n"
      "  place i32 i, i32 j in [0:3, 0] { f32[2] a }\n"
      "  phase {\n"
      "    compute i32 i, i32 j in [0:3:2, 0] { await receive(a, a_in[i / 2]) }\n"
      "  }\n"
      "}\n",
      {}, d);
  CHECK(prog == nullptr);
  CHECK(d.contains_rule("compile.extent-not-rectangular"));
}

TEST_CASE("arguments without a declared extent are streamed") {
  Diagnostics d;
  auto prog = compile_src(
      "kernel @k<>(stream<f32> readonly a_in) {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[4] a }\n"
      "  phase { compute i32 i, i32 j in [0:2, 0] { await receive(a, a_in[i]) } }\n"
      "}\n",
      {}, d);
  REQUIRE(prog != nullptr);
  const ArgExtent* a_in = prog->find_arg("a_in");
  REQUIRE(a_in != nullptr);
  CHECK(a_in->streamed);
  CHECK(a_in->slices == 2);
  CHECK(prog->metadata["args"]["a_in"]["transmission"] == "streamed");
}

TEST_CASE("scalar arguments are placed only in the PEs that use them") {
  Diagnostics d;
  auto prog = compile_src(
      "kernel @k<>(f32 alpha) {\n"
      "  place i32 i, i32 j in [0:4, 0] { f32[2] a }\n"
      "  phase {\n"
      "    compute i32 i, i32 j in [0:2, 0] { a[0] = alpha }\n"
      "    compute i32 i, i32 j in [2:4, 0] { a[0] = 1.0 }\n"
      "  }\n"
      "}\n",
      {}, d);
  REQUIRE(prog != nullptr);
  const ArgExtent* alpha = prog->find_arg("alpha");
  REQUIRE(alpha != nullptr);
  CHECK(alpha->scalar);
  CHECK(alpha->scalar_pes == std::vector<PECoord>{{0, 0}, {1, 0}});
  CHECK(prog->metadata["args"]["alpha"]["transmission"] == "scalar");
}

TEST_CASE("PE equivalence classes are reported for the Laplacian") {
  Diagnostics d;
  auto k = parse_kernel(read_fixture("laplacian.stencil"), d);
  // .stencil goes through the stencil frontend, not the kernel parser
  CHECK_FALSE(k.has_value());
  Diagnostics d2;
  auto spec = parse_stencil(read_fixture("laplacian.stencil"), d2);
  REQUIRE(spec.has_value());
  auto ir = spada::analyze(*spec);
  auto kernel = lower(ir, d2);
  REQUIRE(kernel.has_value());
  Diagnostics d3;
  auto a = analyze_kernel(*kernel, {{"I", 4}, {"J", 4}, {"K", 2}}, d3);
  REQUIRE(a != nullptr);
  auto prog = compile_kernel(std::move(a), d3);
  REQUIRE(prog != nullptr);
  // nine boundary classes, split by parity in both dimensions at 4x4:
  // corners stay whole, edges halve, the interior quarters = 16 programs
  CHECK(prog->pe_classes == 16);
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

TEST_CASE("routing and task graphs are emitted") {
  Diagnostics d;
  auto k = parse_kernel(read_fixture("reduce_pipelined.spada"), d);
  REQUIRE(k.has_value());
  auto a = analyze_kernel(*k, {{"K", 4}}, d);
  REQUIRE(a != nullptr);
  std::string dot = emit_routing_dot(*a);
  CHECK(dot.find("digraph routing") != std::string::npos);
  CHECK(dot.find("blue_odd") != std::string::npos);
  auto j = emit_routing_json(*a);
  REQUIRE(j.contains("paths"));
  CHECK(j["paths"].size() == 3);

  auto prog = compile_kernel(std::move(a), d);
  REQUIRE(prog != nullptr);
  std::string tasks = emit_tasks_dot(*prog);
  CHECK(tasks.find("digraph completion_b0") != std::string::npos);
  CHECK(tasks.find("digraph postwait_b0") != std::string::npos);
  CHECK(tasks.find("digraph tasks_b0") != std::string::npos);
  CHECK(tasks.find("activate") != std::string::npos);
}

TEST_CASE("the emitted lowered stencil is accepted by the frontend") {
  auto out = tmp_dir() / "lap.spada";
  REQUIRE(run_cli("emit " + fixture_path("laplacian.stencil") +
                  " -DI=4 -DJ=4 -DK=2 --spada " + out.string()) == 0);
  REQUIRE(run_cli("check " + out.string() + " -DI=4 -DJ=4 -DK=2") == 0);
}

TEST_CASE("fabric config files set defaults") {
  auto cfg = tmp_dir() / "spada.toml";
  std::ofstream(cfg) << "fabric.width = 8\nfabric.height = 1\n"
                     << "fabric.bulk_op_throughput = 4\n";
  auto csv = tmp_dir() / "two.csv";
  {
    std::ofstream out(csv);
    for (int i = 0; i < 4; ++i) out << "2.0\n";
  }
  CHECK(run_cli("run " + fixture_path("copy.spada") +
                " -DP=2 -DL=2 --config " + cfg.string() +
                " --in a_in=" + csv.string() + " --out-dir " +
                tmp_dir().string()) == 0);
}
