// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <iostream>
#include <random>

#include "spada/parser.hpp"
#include "spada/pipeline.hpp"
#include "spada/printer.hpp"

#include "fixture_util.hpp"
#include "phase_gen.hpp"

using namespace spada;

namespace {

std::unique_ptr<AnalyzedKernel> analyze_src(const std::string& src,
                                            ParamMap params, Diagnostics& d,
                                            AnalyzeOptions opts = {}) {
  auto k = parse_kernel(src, d);
  if (!k) {
    d.print(std::cerr);
    return nullptr;
  }
  return analyze_kernel(*k, params, d, opts);
}

}  // namespace

// ---------------------------------------------------------------------------
// Routing graph construction
// ---------------------------------------------------------------------------

TEST_CASE("single-hop default route") {
  Diagnostics d;
  auto a = analyze_src(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:4, 0] { f32[2] a }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:4, 0] { stream<f32> s = relative_stream(-1, 0) }\n"
      "    compute i32 i, i32 j in [3, 0] { await send(a, s) }\n"
      "    compute i32 i, i32 j in [2, 0] { await receive(a, s) }\n"
      "  }\n"
      "}\n",
      {}, d);
  REQUIRE(a != nullptr);
  REQUIRE(a->routing.size() == 1);
  REQUIRE(a->routing[0].paths.size() == 1);
  const auto& p = a->routing[0].paths[0];
  CHECK(p.nodes == std::vector<PECoord>{{3, 0}, {2, 0}});
}

TEST_CASE("declared hops route around the corner") {
  Diagnostics d;
  auto a = analyze_src(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0:2] { f32[2] a }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0:2] {\n"
      "      stream<f32> s = relative_stream(1, 1) { hops = [(1, 0), (0, 1)], channel = 3 }\n"
      "    }\n"
      "    compute i32 i, i32 j in [0, 0] { await send(a, s) }\n"
      "    compute i32 i, i32 j in [1, 1] { await receive(a, s) }\n"
      "  }\n"
      "}\n",
      {}, d);
  if (!a) d.print(std::cerr);
  REQUIRE(a != nullptr);
  const auto& p = a->routing[0].paths[0];
  CHECK(p.nodes == std::vector<PECoord>{{0, 0}, {1, 0}, {1, 1}});
  CHECK(p.channel == 3);
}

TEST_CASE("hops that do not sum to the offset are rejected") {
  Diagnostics d;
  auto a = analyze_src(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0:2] { f32[2] a }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0:2] {\n"
      "      stream<f32> s = relative_stream(0, 1) { hops = [(1, 0)], channel = 0 }\n"
      "    }\n"
      "    compute i32 i, i32 j in [0, 0] { await send(a, s) }\n"
      "    compute i32 i, i32 j in [0, 1] { await receive(a, s) }\n"
      "  }\n"
      "}\n",
      {}, d);
  CHECK(a == nullptr);
  CHECK(d.contains_rule("routing.hop-sum-mismatch"));
}

TEST_CASE("diagonal hops are illegal") {
  Diagnostics d;
  auto a = analyze_src(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0:2] { f32[2] a }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0:2] {\n"
      "      stream<f32> s = relative_stream(1, 1) { hops = [(1, 1)], channel = 0 }\n"
      "    }\n"
      "    compute i32 i, i32 j in [0, 0] { await send(a, s) }\n"
      "    compute i32 i, i32 j in [1, 1] { await receive(a, s) }\n"
      "  }\n"
      "}\n",
      {}, d);
  CHECK(a == nullptr);
  CHECK(d.contains_rule("routing.illegal-hop"));
}

// ---------------------------------------------------------------------------
// Conflicts
// ---------------------------------------------------------------------------

static const char* kManualOverlap =
    "kernel @k<>() {\n"
    "  place i32 i, i32 j in [0:3, 0] { f32[4] a; f32[4] r }\n"
    "  phase {\n"
    "    dataflow i32 i, i32 j in [0:3, 0] {\n"
    "      stream<f32> s1 = relative_stream(-1, 0) { channel = 0 }\n"
    "      stream<f32> s2 = relative_stream(-1, 0) { channel = 0 }\n"
    "    }\n"
    "    compute i32 i, i32 j in [2, 0] { await send(a, s1) }\n"
    "    compute i32 i, i32 j in [1, 0] {\n"
    "      completion c = send(a, s2)\n"
    "      await receive(r, s1)\n"
    "      await c\n"
    "    }\n"
    "    compute i32 i, i32 j in [0, 0] { await receive(r, s2) }\n"
    "  }\n"
    "}\n";

TEST_CASE("same-channel overlapping paths without ordering conflict") {
  Diagnostics d;
  auto a = analyze_src(kManualOverlap, {}, d);
  CHECK(a == nullptr);
  CHECK(d.contains_rule("routing.conflict"));
}

TEST_CASE("allow-unsafe keeps the conflicting program analyzable") {
  Diagnostics d;
  AnalyzeOptions opts;
  opts.allow_unsafe = true;
  auto a = analyze_src(kManualOverlap, {}, d, opts);
  REQUIRE(a != nullptr);
  REQUIRE_FALSE(a->conflicts.empty());
  CHECK(a->conflicts[0].shared == PECoord{1, 0});
}

TEST_CASE("phase boundaries induce empties-before, resolving the conflict") {
  Diagnostics d;
  auto a = analyze_src(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:3, 0] { f32[4] a; f32[4] r }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:3, 0] { stream<f32> s1 = relative_stream(-1, 0) { channel = 0 } }\n"
      "    compute i32 i, i32 j in [2, 0] { await send(a, s1) }\n"
      "    compute i32 i, i32 j in [1, 0] { await receive(r, s1) }\n"
      "  }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:3, 0] { stream<f32> s2 = relative_stream(-1, 0) { channel = 0 } }\n"
      "    compute i32 i, i32 j in [1, 0] { await send(a, s2) }\n"
      "    compute i32 i, i32 j in [0, 0] { await receive(r, s2) }\n"
      "  }\n"
      "}\n",
      {}, d);
  if (!a) d.print(std::cerr);
  REQUIRE(a != nullptr);
  CHECK(a->conflicts.empty());
}

TEST_CASE("a single stream edge cannot conflict") {
  Diagnostics d;
  auto a = analyze_src(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[4] a }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] { stream<f32> s = relative_stream(-1, 0) { channel = 5 } }\n"
      "    compute i32 i, i32 j in [1, 0] { await send(a, s) }\n"
      "    compute i32 i, i32 j in [0, 0] { await receive(a, s) }\n"
      "  }\n"
      "}\n",
      {}, d);
  REQUIRE(a != nullptr);
  CHECK(a->conflicts.empty());
}

// ---------------------------------------------------------------------------
// Stream selection
// ---------------------------------------------------------------------------

TEST_CASE("select_stream reproduces the worked example") {
  // westward stream: sender (3,0) and receiver (2,0) agree on odd,
  // sender (2,0) picks even
  CHECK(select_stream(-1, 0, 3, 0, false) == Parity::Odd);
  CHECK(select_stream(-1, 0, 2, 0, true) == Parity::Odd);
  CHECK(select_stream(-1, 0, 2, 0, false) == Parity::Even);
}

TEST_CASE("select_stream on a northward offset") {
  CHECK(select_stream(0, 1, 0, 0, false) == Parity::Odd);
}

TEST_CASE("sender and receiver of one hop always pick the same variant") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 2000; ++t) {
    int dir = (int)(rng() % 4);
    int dx = dir == 0 ? 1 : dir == 1 ? -1 : 0;
    int dy = dir == 2 ? 1 : dir == 3 ? -1 : 0;
    int64_t i = (int64_t)(rng() % 64);
    int64_t j = (int64_t)(rng() % 64);
    REQUIRE(select_stream(dx, dy, i, j, false) ==
            select_stream(dx, dy, i + dx, j + dy, true));
  }
}

// ---------------------------------------------------------------------------
// Checkerboard
// ---------------------------------------------------------------------------

TEST_CASE("pipelined reduction is checkerboarded into four conflict-free streams") {
  Diagnostics d;
  auto a = analyze_src(read_fixture("reduce_pipelined.spada"), {{"K", 6}}, d);
  if (!a) d.print(std::cerr);
  REQUIRE(a != nullptr);
  CHECK(a->checkerboard_applied);
  CHECK(a->conflicts.empty());

  std::set<std::string> streams;
  for (const auto& pi : a->ix.phases)
    for (const auto& [name, sd] : pi.streams) streams.insert(name);
  CHECK(streams == std::set<std::string>{"red_even", "red_odd", "blue_even",
                                         "blue_odd"});
  // one channel per duplicated stream
  std::set<int64_t> chans;
  for (const auto& sc : a->channels.streams) chans.insert(sc.channel);
  CHECK(chans.size() == 4);
}

TEST_CASE("a phase without streams is left untouched") {
  Diagnostics d;
  std::string src =
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[2] a }\n"
      "  phase { compute i32 i, i32 j in [0:2, 0] { a[0] = 1.0 } }\n"
      "}\n";
  auto k = parse_kernel(src, d);
  REQUIRE(k.has_value());
  std::string before = print_kernel(*k);
  auto a = analyze_kernel(*k, {}, d);
  REQUIRE(a != nullptr);
  CHECK(print_kernel(a->kernel) == before);
}

TEST_CASE("two active dimensions split blocks into four parity classes") {
  // full 6x6 halo exchange: every PE sends its buffer to each existing
  // neighbor and receives from each, in nine boundary classes
  const int N = 6;
  std::string src =
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:6, 0:6] { f32[2] a; f32[2] rw; f32[2] re; "
      "f32[2] rn; f32[2] rs }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:6, 0:6] {\n"
      "      stream<f32> w = relative_stream(-1, 0)\n"
      "      stream<f32> e = relative_stream(1, 0)\n"
      "      stream<f32> n = relative_stream(0, -1)\n"
      "      stream<f32> s = relative_stream(0, 1)\n"
      "    }\n";
  struct Zone {
    int lo, hi;
    bool has_lo_nb, has_hi_nb;
  };
  Zone zones[3] = {{0, 1, false, true}, {1, N - 1, true, true},
                   {N - 1, N, true, false}};
  for (const auto& zx : zones) {
    for (const auto& zy : zones) {
      std::string body;
      // stream e flows east: received from the west neighbor
      if (zx.has_lo_nb) body += "      completion c1 = receive(rw, e)\n";
      if (zx.has_hi_nb) body += "      completion c2 = receive(re, w)\n";
      if (zy.has_lo_nb) body += "      completion c3 = receive(rn, s)\n";
      if (zy.has_hi_nb) body += "      completion c4 = receive(rs, n)\n";
      if (zx.has_hi_nb) body += "      await send(a, e)\n";
      if (zx.has_lo_nb) body += "      await send(a, w)\n";
      if (zy.has_hi_nb) body += "      await send(a, s)\n";
      if (zy.has_lo_nb) body += "      await send(a, n)\n";
      src += "    compute i32 i, i32 j in [" + std::to_string(zx.lo) + ":" +
             std::to_string(zx.hi) + ", " + std::to_string(zy.lo) + ":" +
             std::to_string(zy.hi) + "] {\n" + body + "    }\n";
    }
  }
  src += "  }\n}\n";

  Diagnostics d;
  auto a = analyze_src(src, {}, d);
  if (!a) d.print(std::cerr);
  REQUIRE(a != nullptr);
  CHECK(a->conflicts.empty());
  // 4 streams duplicate to 8; the interior block splits into 4 parity classes
  std::set<std::string> streams;
  for (const auto& pi : a->ix.phases)
    for (const auto& [name, sd] : pi.streams) streams.insert(name);
  CHECK(streams.size() == 8);
  // 4 corners stay whole, 4 edges split in two, the interior splits in four
  CHECK(a->ix.phases[0].computes.size() == 4 * 1 + 4 * 2 + 4);
}

TEST_CASE("checkerboard leaves zero conflicts on generated phases") {
  std::mt19937_64 rng(20260809);
  for (int generated = 0; generated < 120; ++generated) {
    auto g = generate_phase_kernel(rng);
    Diagnostics d;
    auto a = analyze_src(g.source, {}, d);
    if (!a) {
      d.print(std::cerr);
      std::cerr << g.source;
    }
    REQUIRE(a != nullptr);
    REQUIRE(a->conflicts.empty());
  }
}

TEST_CASE("strict happens-before is contained in happens-before") {
  std::mt19937_64 rng(31337);
  for (int t = 0; t < 20; ++t) {
    auto g = generate_phase_kernel(rng, /*max_dim=*/6, /*max_streams=*/3);
    Diagnostics d;
    auto a = analyze_src(g.source, {}, d);
    REQUIRE(a != nullptr);
    // sample site/PE pairs from the derived stream edges
    for (const auto& pe : a->sema.phase_edges) {
      for (const auto& e1 : pe.edges) {
        for (const auto& e2 : pe.edges) {
          bool shb = a->hb->strictly_before(e1.recv_site, e1.dst, e2.send_site,
                                            e2.src);
          bool hb = a->hb->happens_before(e1.recv_site, e1.dst, e2.send_site,
                                          e2.src);
          if (shb) REQUIRE(hb);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Channel allocation
// ---------------------------------------------------------------------------

TEST_CASE("seventeen mutually conflicting streams exceed the budget") {
  std::string src =
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[2] a }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] {\n";
  for (int s = 0; s < 17; ++s)
    src += "      stream<f32> s" + std::to_string(s) +
           " = relative_stream(1, 0) { channel = " + std::to_string(s) + " }\n";
  src += "    }\n  }\n}\n";
  Diagnostics d;
  auto a = analyze_src(src, {}, d);
  CHECK(a == nullptr);
  CHECK(d.contains_rule("routing.channel-budget"));
}

TEST_CASE("streams on disjoint PE sets may share a channel id") {
  Diagnostics d;
  auto a = analyze_src(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:8, 0] { f32[2] a; f32[2] r }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] { stream<f32> s1 = relative_stream(1, 0) }\n"
      "    dataflow i32 i, i32 j in [4:6, 0] { stream<f32> s2 = relative_stream(1, 0) }\n"
      "    compute i32 i, i32 j in [0, 0] { await send(a, s1) }\n"
      "    compute i32 i, i32 j in [1, 0] { completion c = receive(r, s1) }\n"
      "    compute i32 i, i32 j in [4, 0] { await send(a, s2) }\n"
      "    compute i32 i, i32 j in [5, 0] { completion c = receive(r, s2) }\n"
      "  }\n"
      "}\n",
      {}, d);
  if (!a) d.print(std::cerr);
  REQUIRE(a != nullptr);
  std::set<int64_t> c1, c2;
  for (const auto& sc : a->channels.streams) {
    if (sc.stream.rfind("s1", 0) == 0) c1.insert(sc.channel);
    if (sc.stream.rfind("s2", 0) == 0) c2.insert(sc.channel);
  }
  CHECK(c1 == c2);
}
