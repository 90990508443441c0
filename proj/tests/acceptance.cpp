// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: runs every top-level correctness and trend criterion at
// its pinned tolerance and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <random>

#include "spada/bench.hpp"
#include "spada/checkerboard.hpp"
#include "spada/compile.hpp"
#include "spada/parser.hpp"
#include "spada/pipeline.hpp"
#include "spada/printer.hpp"
#include "spada/stencil.hpp"
#include "spada/taskgraph.hpp"

#include "fixture_util.hpp"
#include "phase_gen.hpp"
#include "sim_util.hpp"
#include "stencil_oracle.hpp"

using namespace spada;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& what,
            const std::string& detail = "") {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": "
            << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++failures;
}

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string lowered_stencil(const std::string& fixture, StencilSpec* spec_out,
                            StencilIR* ir_out) {
  Diagnostics d;
  auto spec = parse_stencil(read_fixture(fixture), d);
  if (!spec) {
    d.print(std::cerr);
    return "";
  }
  auto ir = analyze(*spec);
  auto kernel = lower(ir, d);
  if (!kernel) {
    d.print(std::cerr);
    return "";
  }
  if (spec_out) *spec_out = std::move(*spec);
  if (ir_out) *ir_out = std::move(ir);
  return print_kernel(*kernel);
}

// -- criterion 1: Listing-equivalent pipelined reduction correctness ---------

void criterion1() {
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(20260809);
  for (int64_t K : {2, 4, 8, 32}) {
    auto t0 = std::chrono::steady_clock::now();
    int max_ulps = (int)(4 * std::log2((double)K));

    for (int variant = 0; variant < 2 && ok; ++variant) {
      RunHarness h;
      std::map<std::string, HostBuffer> in;
      in["a_in"] = variant == 0 ? random_f32(K, K, rng) : pow2_f32(K, K, rng);
      if (!h.build(read_fixture("reduce_pipelined.spada"), {{"K", K}}, in)) {
        h.dump_errors();
        ok = false;
        detail = "build failed at K=" + std::to_string(K);
        break;
      }
      auto rep = h.run(5);
      if (!rep.faults.empty()) {
        ok = false;
        detail = "fault at K=" + std::to_string(K);
        break;
      }
      auto want = right_fold_reduce(in["a_in"], K, K);
      const auto& out = rep.outputs.at("out");
      for (int64_t k = 0; k < K && ok; ++k) {
        float got = out.get(0, k).f;
        int ulps = ulp_distance(got, want[(std::size_t)k]);
        int bound = variant == 0 ? std::max(max_ulps, 0) : 0;
        if (ulps > bound) {
          ok = false;
          detail = "K=" + std::to_string(K) + " element " + std::to_string(k) +
                   " off by " + std::to_string(ulps) + " ulps";
        }
      }
    }
    double secs = wall_since(t0);
    if (secs >= 5.0) {
      ok = false;
      detail = "K=" + std::to_string(K) + " took " + std::to_string(secs) + "s";
    }
    if (!ok) break;
  }
  report(1, ok,
         "pipelined reduction matches the right fold for K in {2,4,8,32}, "
         "exactly on power-of-two inputs, under 5 s per case",
         detail);
}

// -- criterion 2: checkerboard safety over generated phases ------------------

void criterion2() {
  std::mt19937_64 rng(424242);
  int phases = 0, conflicts = 0, faults = 0, build_failures = 0;
  const int target = 1000;
  for (int t = 0; t < target; ++t) {
    auto g = generate_phase_kernel(rng, /*max_dim=*/16, /*max_streams=*/6);
    RunHarness h;
    if (!h.build(g.source, {}, {})) {
      ++build_failures;
      continue;
    }
    ++phases;
    conflicts += (int)h.prog->analysis->conflicts.size();
    for (uint64_t seed = 1; seed <= 8; ++seed) {
      auto rep = h.run(seed, 500000);
      if (rep.has_fault("channel-conflict")) ++faults;
      if (!rep.faults.empty() && !rep.has_fault("channel-conflict")) ++faults;
    }
  }
  bool ok = phases == target && conflicts == 0 && faults == 0 &&
            build_failures == 0;
  report(2, ok,
         "checkerboard yields zero conflicts and zero runtime faults on " +
             std::to_string(target) + " generated phases x 8 seeds",
         "phases=" + std::to_string(phases) +
             " conflicts=" + std::to_string(conflicts) +
             " faults=" + std::to_string(faults));
}

// -- criterion 3: stream-selection worked example ----------------------------

void criterion3() {
  bool ok = select_stream(-1, 0, 3, 0, false) == Parity::Odd &&
            select_stream(-1, 0, 2, 0, true) == Parity::Odd &&
            select_stream(-1, 0, 2, 0, false) == Parity::Even;
  report(3, ok,
         "select_stream worked example: (3,0) send and (2,0) receive pick "
         "odd, (2,0) send picks even");
}

// -- criterion 4: runtime fault detectors, no false positives ----------------

void criterion4() {
  bool ok = true;
  std::string detail;
  struct Neg {
    const char* fixture;
    const char* fault;
  };
  for (const Neg& n : {Neg{"negative/race.spada", "race"},
                       Neg{"negative/deadlock.spada", "deadlock"},
                       Neg{"negative/conflict.spada", "channel-conflict"}}) {
    RunHarness h;
    if (!h.build(read_fixture(n.fixture), {}, {}, {}, /*allow_unsafe=*/true)) {
      h.dump_errors();
      ok = false;
      detail = std::string(n.fixture) + " failed to build";
      break;
    }
    auto rep = h.run(1, 100000);
    bool exact = rep.faults.size() >= 1 && rep.faults[0].kind == n.fault;
    for (const auto& f : rep.faults)
      if (f.kind != n.fault) exact = false;
    if (!exact) {
      ok = false;
      detail = std::string(n.fixture) + " produced " +
               (rep.faults.empty() ? "no fault" : rep.faults[0].kind);
      break;
    }
  }

  if (ok) {
    // positive fixtures must stay fault free
    std::mt19937_64 rng(7);
    struct Pos {
      std::string src;
      ParamMap params;
      std::map<std::string, HostBuffer> inputs;
    };
    std::vector<Pos> positives;
    positives.push_back({read_fixture("reduce_pipelined.spada"),
                         {{"K", 4}},
                         {{"a_in", random_f32(4, 4, rng)}}});
    positives.push_back({read_fixture("reduce_blocking.spada"),
                         {{"P", 4}, {"L", 8}},
                         {{"a_in", random_f32(4, 8, rng)}}});
    positives.push_back({read_fixture("copy.spada"),
                         {{"P", 3}, {"L", 5}},
                         {{"a_in", random_f32(3, 5, rng)}}});
    for (const char* st :
         {"laplacian.stencil", "vertical_diff.stencil", "uvbke_like.stencil"}) {
      StencilSpec spec;
      StencilIR ir;
      std::string text = lowered_stencil(st, &spec, &ir);
      Pos p;
      p.src = text;
      p.params = {{spec.dims[0], 6}, {spec.dims[1], 6}, {spec.dims[2], 4}};
      for (const auto& f : ir.inputs)
        if (!ir.outputs.count(f))
          p.inputs[f + "_in"] = random_f32(36, 4, rng);
      positives.push_back(std::move(p));
    }
    int idx = 0;
    for (auto& p : positives) {
      RunHarness h;
      if (!h.build(p.src, p.params, p.inputs)) {
        h.dump_errors();
        ok = false;
        detail = "positive fixture " + std::to_string(idx) + " failed to build";
        break;
      }
      auto rep = h.run(11, 500000);
      if (!rep.faults.empty()) {
        ok = false;
        detail = "false positive " + rep.faults[0].kind + " on fixture " +
                 std::to_string(idx);
        break;
      }
      ++idx;
    }
  }
  report(4, ok,
         "negative fixtures raise exactly race / deadlock / channel-conflict; "
         "positive fixtures raise nothing",
         detail);
}

// -- criterion 5: blocking vs pipelined reduction crossover ------------------

void criterion5() {
  auto run_reduce = [&](const char* fixture, int64_t P, int64_t L) -> double {
    std::mt19937_64 rng(2);
    std::map<std::string, HostBuffer> in;
    in["a_in"] = random_f32(P, L, rng);
    RunHarness h;
    if (!h.build(read_fixture(fixture), {{"P", P}, {"L", L}}, in)) {
      h.dump_errors();
      return -1;
    }
    auto rep = h.run(1, 10'000'000);
    if (!rep.faults.empty()) return -1;
    return (double)rep.total_cycles;
  };
  double small_block = run_reduce("reduce_blocking.spada", 4, 16);
  double small_pipe = run_reduce("reduce_pipelined_plen.spada", 4, 16);
  double large_block = run_reduce("reduce_blocking.spada", 64, 2048);
  double large_pipe = run_reduce("reduce_pipelined_plen.spada", 64, 2048);
  bool ran = small_block > 0 && small_pipe > 0 && large_block > 0 &&
             large_pipe > 0;
  double speedup_small = small_block / small_pipe;  // pipelined over blocking
  double speedup_large = large_block / large_pipe;
  bool ok = ran && speedup_small < 1.0 && speedup_large > 1.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "speedup %.2f at (P=4, len=16), %.2f at (P=64, len=2048)",
                speedup_small, speedup_large);
  report(5, ok,
         "blocking reduction wins the small corner, pipelined wins the large "
         "corner, so the speedup crosses 1 inside the sweep",
         ran ? buf : "simulation failed");
}

// -- criteria 6 and 7: weak scaling and vertical dependencies ----------------

void criteria6and7() {
  std::string lap = lowered_stencil("laplacian.stencil", nullptr, nullptr);
  std::vector<double> medians;
  bool built = true;
  for (int64_t N : {4, 8, 16, 32}) {
    std::mt19937_64 rng(1);
    std::map<std::string, HostBuffer> in;
    in["in_field_in"] = random_f32(N * N, 8, rng);
    RunHarness h;
    if (!h.build(lap, {{"I", N}, {"J", N}, {"K", 8}}, in)) {
      h.dump_errors();
      built = false;
      break;
    }
    auto stats = bench(*h.machine, 3);
    if (!stats.ok) {
      built = false;
      break;
    }
    medians.push_back(stats.cycles.median);
  }
  double spread = 0;
  if (built) {
    double lo = *std::min_element(medians.begin(), medians.end());
    double hi = *std::max_element(medians.begin(), medians.end());
    spread = (hi - lo) / lo;
  }
  bool ok6 = built && spread <= 0.10;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "medians %g/%g/%g/%g, spread %.1f%%",
                built ? medians[0] : 0.0, built ? medians[1] : 0.0,
                built ? medians[2] : 0.0, built ? medians[3] : 0.0,
                spread * 100);
  report(6, ok6,
         "Laplacian weak scaling: median cycles within 10% from 4x4 to 32x32 "
         "at fixed per-PE work (K=8)",
         buf);

  // vertical FORWARD stencil grows linearly in K
  std::string vert = lowered_stencil("vertical_diff.stencil", nullptr, nullptr);
  std::vector<double> xs, ys;
  bool vbuilt = true;
  for (int64_t K : {4, 8, 16, 32}) {
    std::mt19937_64 rng(3);
    std::map<std::string, HostBuffer> in;
    in["in_field_in"] = random_f32(64, K, rng);
    RunHarness h;
    if (!h.build(vert, {{"I", 8}, {"J", 8}, {"K", K}}, in)) {
      vbuilt = false;
      break;
    }
    auto stats = bench(*h.machine, 3);
    if (!stats.ok) {
      vbuilt = false;
      break;
    }
    xs.push_back((double)K);
    ys.push_back(stats.cycles.median);
  }
  LinFit fit = vbuilt ? linear_fit(xs, ys) : LinFit{};
  bool ok7 = vbuilt && fit.r2 >= 0.99 && fit.slope > 0 && ok6;
  char buf2[120];
  std::snprintf(buf2, sizeof(buf2), "R^2 %.4f slope %.2f; horizontal spread %.1f%%",
                fit.r2, fit.slope, spread * 100);
  report(7, ok7,
         "vertical FORWARD cycles grow linearly in K (R^2 >= 0.99) while the "
         "horizontal stencil stays flat at fixed per-PE work",
         buf2);
}

// -- criterion 8: task constraints and closure equivalence -------------------

void criterion8() {
  bool ok = true;
  std::string detail;

  auto check_prog = [&](const std::string& src, ParamMap params,
                        const std::string& name) {
    Diagnostics d;
    auto k = parse_kernel(src, d);
    if (!k) {
      ok = false;
      detail = name + " parse failed";
      return;
    }
    auto a = analyze_kernel(*k, params, d);
    if (!a) {
      d.print(std::cerr);
      ok = false;
      detail = name + " analysis failed";
      return;
    }
    auto prog = compile_kernel(std::move(a), d);
    if (!prog) {
      ok = false;
      detail = name + " compile failed";
      return;
    }
    for (const auto& bp : prog->blocks) {
      for (const auto& t : bp.tasks.tasks) {
        int limit = t.kind == Task::Kind::Data ? 1 : 2;
        if ((int)t.preds.size() > limit) {
          ok = false;
          detail = name + " violates the task in-degree limits";
          return;
        }
      }
      auto want = bp.dag->closure();
      auto got = bp.tasks.stmt_closure();
      for (std::size_t x = 0; x < want.size(); ++x)
        for (std::size_t y = 0; y < want.size(); ++y)
          if (want[x][y] != got[x][y]) {
            ok = false;
            detail = name + " changes the happens-before closure";
            return;
          }
    }
  };

  check_prog(read_fixture("reduce_pipelined.spada"), {{"K", 8}}, "pipelined");
  check_prog(read_fixture("reduce_blocking.spada"), {{"P", 6}, {"L", 8}},
             "blocking");
  check_prog(read_fixture("copy.spada"), {{"P", 4}, {"L", 4}}, "copy");
  for (const char* st :
       {"laplacian.stencil", "vertical_diff.stencil", "uvbke_like.stencil"}) {
    if (!ok) break;
    StencilSpec spec;
    std::string text = lowered_stencil(st, &spec, nullptr);
    check_prog(text, {{spec.dims[0], 8}, {spec.dims[1], 8}, {spec.dims[2], 4}},
               st);
  }

  // 500 random DAGs of up to 12 nodes
  std::mt19937_64 rng(20260809);
  for (int trial = 0; trial < 500 && ok; ++trial) {
    int n = 2 + (int)(rng() % 11);
    CompletionDAG dag;
    for (int i = 0; i < n; ++i) {
      bool sync = rng() % 2;
      bool data = !sync && rng() % 5 == 0;
      dag.nodes.push_back({i, nullptr, sync, data});
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng() % 100 < 30)
          dag.edges.push_back({a, b, dag.nodes[a].sync ? -1 : 1000 + a});
    dag.transitive_reduce();
    auto pwg = reduce_indegree(to_post_wait(dag));
    Diagnostics d;
    auto tg = coarsen(pwg, d);
    if (d.has_errors()) {
      ok = false;
      detail = "random DAG coarsening failed";
      break;
    }
    for (const auto& t : tg.tasks) {
      int limit = t.kind == Task::Kind::Data ? 1 : 2;
      if ((int)t.preds.size() > limit) {
        ok = false;
        detail = "random DAG violates in-degree limits";
      }
    }
    auto want = dag.closure();
    auto got = tg.stmt_closure();
    for (int a = 0; a < n && ok; ++a)
      for (int b = 0; b < n; ++b)
        if (want[a][b] != got[a][b]) {
          ok = false;
          detail = "random DAG closure mismatch";
          break;
        }
  }
  report(8, ok,
         "every fixture and 500 random DAGs keep local tasks <= 2 and data "
         "tasks <= 1 predecessors with an unchanged happens-before closure",
         detail);
}

// -- criterion 9: resource budgets -------------------------------------------

void criterion9() {
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
  auto k = parse_kernel(src, d);
  bool rejected = false;
  if (k) {
    auto a = analyze_kernel(*k, {}, d);
    rejected = a == nullptr && d.contains_rule("routing.channel-budget");
  }

  Diagnostics d2;
  auto k2 = parse_kernel(read_fixture("reduce_pipelined.spada"), d2);
  bool four = false;
  if (k2) {
    auto a2 = analyze_kernel(*k2, {{"K", 6}}, d2);
    if (a2) {
      std::set<int64_t> chans;
      for (const auto& sc : a2->channels.streams) chans.insert(sc.channel);
      four = a2->channels.streams.size() == 4 && chans.size() == 4;
    }
  }
  report(9, rejected && four,
         "17 conflicting channels on one PE are rejected with the budget "
         "error; the checkerboarded reduction allocates exactly 4 channels",
         rejected ? (four ? "" : "channel count wrong") : "budget not enforced");
}

// -- criterion 10: stencil oracle equivalence --------------------------------

void criterion10() {
  bool ok = true;
  std::string detail;
  struct Case {
    const char* fixture;
    int64_t I, J, K;
    int max_ulps;
  };
  for (const Case& c : {Case{"laplacian.stencil", 16, 16, 8, 2},
                        Case{"vertical_diff.stencil", 10, 10, 8, 0},
                        Case{"uvbke_like.stencil", 12, 12, 8, 2}}) {
    auto t0 = std::chrono::steady_clock::now();
    StencilSpec spec;
    StencilIR ir;
    std::string text = lowered_stencil(c.fixture, &spec, &ir);
    if (text.empty()) {
      ok = false;
      detail = std::string(c.fixture) + " failed to lower";
      break;
    }
    std::mt19937_64 rng(11);
    std::map<std::string, HostBuffer> inputs;
    DenseOracle oracle(spec, c.I, c.J, c.K);
    for (const auto& fname : ir.inputs) {
      if (ir.outputs.count(fname)) continue;
      auto buf = random_f32(c.I * c.J, c.K, rng);
      for (int64_t i = 0; i < c.I; ++i)
        for (int64_t j = 0; j < c.J; ++j)
          for (int64_t k = 0; k < c.K; ++k)
            oracle.at(fname, i, j, k) = buf.get(i * c.J + j, k).f;
      inputs[fname + "_in"] = std::move(buf);
    }
    oracle.run(spec);

    RunHarness h;
    if (!h.build(text,
                 {{spec.dims[0], c.I}, {spec.dims[1], c.J}, {spec.dims[2], c.K}},
                 inputs)) {
      h.dump_errors();
      ok = false;
      detail = std::string(c.fixture) + " failed to build";
      break;
    }
    auto rep = h.run(9, 2'000'000);
    if (!rep.faults.empty()) {
      ok = false;
      detail = std::string(c.fixture) + " faulted";
      break;
    }
    int worst = 0;
    for (const auto& fname : ir.outputs) {
      const auto& out = rep.outputs.at(fname + "_out");
      for (int64_t i = 0; i < c.I; ++i)
        for (int64_t j = 0; j < c.J; ++j)
          for (int64_t k = 0; k < c.K; ++k)
            worst = std::max(
                worst, ulp_distance(out.get(i * c.J + j, k).f,
                                     oracle.at(fname, i, j, k)));
    }
    double secs = wall_since(t0);
    if (worst > c.max_ulps) {
      ok = false;
      detail = std::string(c.fixture) + " off by " + std::to_string(worst) +
               " ulps";
      break;
    }
    if (secs >= 30.0) {
      ok = false;
      detail = std::string(c.fixture) + " took " + std::to_string(secs) + "s";
      break;
    }
  }
  report(10, ok,
         "Laplacian, vertical difference and momentum-like stencils match the "
         "dense reference end to end in under 30 s each",
         detail);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criteria6and7();
  criterion8();
  criterion9();
  criterion10();
  std::cout << (failures == 0 ? "all criteria passed"
                              : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
