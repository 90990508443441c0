// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <iostream>
#include <random>

#include "spada/parser.hpp"
#include "spada/taskgraph.hpp"
#include "spada/typecheck.hpp"

#include "fixture_util.hpp"

using namespace spada;

namespace {

ast::Kernel load(const std::string& src) {
  Diagnostics d;
  auto k = parse_kernel(src, d);
  if (!k) d.print(std::cerr);
  REQUIRE(k.has_value());
  return std::move(*k);
}

const ast::ComputeBlock* nth_compute(const ast::Kernel& k, int phase, int n) {
  auto ix = build_index(k);
  return ix.phases[phase].computes[n];
}

int count_kind(const PostWaitGraph& g, PostWaitGraph::Node::Kind k) {
  int n = 0;
  for (const auto& node : g.nodes)
    if (node.kind == k) ++n;
  return n;
}

int max_antichain(const std::vector<std::vector<bool>>& closure) {
  int n = (int)closure.size();
  int best = 0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    bool anti = true;
    for (int a = 0; a < n && anti; ++a)
      if (mask & (1 << a))
        for (int b = 0; b < n && anti; ++b)
          if ((mask & (1 << b)) && (closure[a][b] || closure[b][a])) anti = false;
    if (anti) best = std::max(best, __builtin_popcount(mask));
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Completion DAG
// ---------------------------------------------------------------------------

TEST_CASE("the root block's foreach feeds the output send") {
  auto k = load(read_fixture("reduce_pipelined.spada"));
  const auto* root = nth_compute(k, 1, 3);
  auto dag = build_completion_dag(*root);
  REQUIRE(dag.nodes.size() == 2);
  REQUIRE(dag.edges.size() == 1);
  CHECK(dag.nodes[dag.edges[0].from].stmt->kind == ast::StmtKind::Foreach);
  CHECK(dag.nodes[dag.edges[0].to].stmt->kind == ast::StmtKind::Send);
  CHECK(dag.nodes[0].data);
}

TEST_CASE("a single statement is a single node without edges") {
  auto k = load(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0, 0] { f32[2] a }\n"
      "  phase { compute i32 i, i32 j in [0, 0] { a[0] = 1.0 } }\n"
      "}\n");
  auto dag = build_completion_dag(*nth_compute(k, 0, 0));
  CHECK(dag.nodes.size() == 1);
  CHECK(dag.edges.empty());
}

TEST_CASE("an awaited completion forms a two-node chain") {
  auto k = load(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[2] a; f32[2] r }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] {\n"
      "      stream<f32> s = relative_stream(1, 0)\n"
      "      stream<f32> t = relative_stream(-1, 0)\n"
      "    }\n"
      "    compute i32 i, i32 j in [0, 0] {\n"
      "      completion c = send(a, s)\n"
      "      await c\n"
      "      await receive(r, t)\n"
      "    }\n"
      "    compute i32 i, i32 j in [1, 0] {\n"
      "      completion c = receive(r, s)\n"
      "      await c\n"
      "      await send(a, t)\n"
      "    }\n"
      "  }\n"
      "}\n");
  auto dag = build_completion_dag(*nth_compute(k, 0, 0));
  REQUIRE(dag.nodes.size() == 2);
  REQUIRE(dag.edges.size() == 1);
  CHECK(dag.nodes[dag.edges[0].from].stmt->kind == ast::StmtKind::Send);
  CHECK(dag.nodes[dag.edges[0].to].stmt->kind == ast::StmtKind::Receive);
  CHECK(dag.edges[0].group >= 0);
}

// ---------------------------------------------------------------------------
// Post/wait expansion
// ---------------------------------------------------------------------------

TEST_CASE("a blocking assignment expands to an adjacent post-wait pair") {
  auto k = load(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0, 0] { f32[2] a }\n"
      "  phase { compute i32 i, i32 j in [0, 0] { a[0] = 1.0 } }\n"
      "}\n");
  auto dag = build_completion_dag(*nth_compute(k, 0, 0));
  auto g = to_post_wait(dag);
  REQUIRE(g.nodes.size() == 2);
  CHECK(count_kind(g, PostWaitGraph::Node::Kind::Post) == 1);
  CHECK(count_kind(g, PostWaitGraph::Node::Kind::Wait) == 1);
  REQUIRE(g.edges.size() == 1);
}

TEST_CASE("an async send awaited once is one post plus one wait") {
  auto k = load(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[2] a; f32[2] r }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] { stream<f32> s = relative_stream(1, 0) }\n"
      "    compute i32 i, i32 j in [0, 0] {\n"
      "      completion c = send(a, s)\n"
      "      await c\n"
      "      a[0] = 1.0\n"
      "    }\n"
      "    compute i32 i, i32 j in [1, 0] { completion c = receive(r, s) }\n"
      "  }\n"
      "}\n");
  auto dag = build_completion_dag(*nth_compute(k, 0, 0));
  auto g = to_post_wait(dag);
  // send: 1 post + 1 wait at the await site; assignment: post + wait
  CHECK(count_kind(g, PostWaitGraph::Node::Kind::Post) == 2);
  CHECK(count_kind(g, PostWaitGraph::Node::Kind::Wait) == 2);
}

TEST_CASE("awaitall over three pending completions joins pairwise") {
  auto k = load(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[2] a; f32[2] b; f32[2] c; f32[2] r1; f32[2] r2; f32[2] r3 }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] {\n"
      "      stream<f32> s1 = relative_stream(1, 0)\n"
      "      stream<f32> s2 = relative_stream(1, 0)\n"
      "      stream<f32> s3 = relative_stream(1, 0)\n"
      "    }\n"
      "    compute i32 i, i32 j in [0, 0] {\n"
      "      completion c1 = send(a, s1)\n"
      "      completion c2 = send(b, s2)\n"
      "      completion c3 = send(c, s3)\n"
      "      awaitall\n"
      "      a[0] = 1.0\n"
      "    }\n"
      "    compute i32 i, i32 j in [1, 0] {\n"
      "      completion d1 = receive(r1, s1)\n"
      "      completion d2 = receive(r2, s2)\n"
      "      completion d3 = receive(r3, s3)\n"
      "    }\n"
      "  }\n"
      "}\n");
  auto dag = build_completion_dag(*nth_compute(k, 0, 0));
  auto g0 = to_post_wait(dag);
  // the awaitall wait starts with in-degree 3
  auto indeg = g0.in_degree();
  int wait_three = -1;
  for (std::size_t i = 0; i < g0.nodes.size(); ++i)
    if (g0.nodes[i].kind == PostWaitGraph::Node::Kind::Wait && indeg[i] == 3)
      wait_three = (int)i;
  REQUIRE(wait_three >= 0);
  auto g = reduce_indegree(g0);
  CHECK(count_kind(g, PostWaitGraph::Node::Kind::Join) == 2);
  auto indeg2 = g.in_degree();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) CHECK(indeg2[i] <= 2);
}

TEST_CASE("in-degree five costs four pairwise joins") {
  CompletionDAG dag;
  for (int i = 0; i < 6; ++i)
    dag.nodes.push_back({i, nullptr, /*sync=*/false, /*data=*/false});
  for (int i = 0; i < 5; ++i) dag.edges.push_back({i, 5, 100 + i});
  auto g = reduce_indegree(to_post_wait(dag));
  CHECK(count_kind(g, PostWaitGraph::Node::Kind::Join) == 4);
}

TEST_CASE("nodes with two predecessors are untouched") {
  CompletionDAG dag;
  for (int i = 0; i < 3; ++i) dag.nodes.push_back({i, nullptr, false, false});
  dag.edges.push_back({0, 2, 100});
  dag.edges.push_back({1, 2, 101});
  auto g = reduce_indegree(to_post_wait(dag));
  CHECK(count_kind(g, PostWaitGraph::Node::Kind::Join) == 0);
}

// ---------------------------------------------------------------------------
// Coarsening
// ---------------------------------------------------------------------------

TEST_CASE("the odd-PE block becomes exactly one data task") {
  auto k = load(read_fixture("reduce_pipelined.spada"));
  const auto* odd = nth_compute(k, 1, 1);
  CompletionDAG dag;
  Diagnostics d;
  auto tg = lower_block_to_tasks(*odd, dag, d);
  REQUIRE_FALSE(d.has_errors());
  REQUIRE(tg.tasks.size() == 1);
  CHECK(tg.tasks[0].kind == Task::Kind::Data);
  CHECK(tg.tasks[0].preds.empty());
}

TEST_CASE("two independent async sends stay two tasks") {
  auto k = load(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0:2, 0] { f32[2] a; f32[2] b; f32[2] r1; f32[2] r2 }\n"
      "  phase {\n"
      "    dataflow i32 i, i32 j in [0:2, 0] {\n"
      "      stream<f32> s1 = relative_stream(1, 0)\n"
      "      stream<f32> s2 = relative_stream(1, 0)\n"
      "    }\n"
      "    compute i32 i, i32 j in [0, 0] {\n"
      "      completion c1 = send(a, s1)\n"
      "      completion c2 = send(b, s2)\n"
      "    }\n"
      "    compute i32 i, i32 j in [1, 0] {\n"
      "      completion d1 = receive(r1, s1)\n"
      "      completion d2 = receive(r2, s2)\n"
      "    }\n"
      "  }\n"
      "}\n");
  CompletionDAG dag;
  Diagnostics d;
  auto tg = lower_block_to_tasks(*nth_compute(k, 0, 0), dag, d);
  REQUIRE(tg.tasks.size() == 2);
  CHECK(tg.tasks[0].preds.empty());
  CHECK(tg.tasks[1].preds.empty());
}

TEST_CASE("a chain of ten blocking assignments fuses into one task") {
  std::string body;
  for (int i = 0; i < 10; ++i)
    body += "      a[" + std::to_string(i) + "] = " + std::to_string(i) + ".0\n";
  auto k = load(
      "kernel @k<>() {\n"
      "  place i32 i, i32 j in [0, 0] { f32[10] a }\n"
      "  phase { compute i32 i, i32 j in [0, 0] {\n" +
      body +
      "  } }\n"
      "}\n");
  CompletionDAG dag;
  Diagnostics d;
  auto tg = lower_block_to_tasks(*nth_compute(k, 0, 0), dag, d);
  REQUIRE(tg.tasks.size() == 1);
  CHECK(tg.tasks[0].kind == Task::Kind::Local);
  CHECK(tg.tasks[0].dag_nodes.size() == 10);
  // statements stay in program order
  for (std::size_t i = 0; i + 1 < tg.tasks[0].dag_nodes.size(); ++i)
    CHECK(dag.nodes[tg.tasks[0].dag_nodes[i]].site <
          dag.nodes[tg.tasks[0].dag_nodes[i + 1]].site);
}

// ---------------------------------------------------------------------------
// Random DAGs: closure equivalence, constraints, width preservation
// ---------------------------------------------------------------------------

TEST_CASE("coarsened tasks preserve the completion DAG's happens-before") {
  std::mt19937_64 rng(20260809);
  for (int trial = 0; trial < 500; ++trial) {
    int n = 2 + (int)(rng() % 11);  // up to 12 nodes
    CompletionDAG dag;
    for (int i = 0; i < n; ++i) {
      bool sync = rng() % 2;
      bool data = !sync && rng() % 5 == 0;
      dag.nodes.push_back({i, nullptr, sync, data});
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (rng() % 100 < 30) {
          int group = dag.nodes[a].sync ? -1 : 1000 + a;
          dag.edges.push_back({a, b, group});
        }
    dag.transitive_reduce();

    auto pwg = reduce_indegree(to_post_wait(dag));
    Diagnostics d;
    auto tg = coarsen(pwg, d);
    REQUIRE_FALSE(d.has_errors());

    for (const auto& t : tg.tasks) {
      int limit = t.kind == Task::Kind::Data ? 1 : 2;
      REQUIRE((int)t.preds.size() <= limit);
    }

    auto want = dag.closure();
    auto got = tg.stmt_closure();
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) REQUIRE(want[a][b] == got[a][b]);

    REQUIRE(max_antichain(want) == max_antichain(got));
  }
}
