// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/diag.hpp"

namespace spada {

// ---------------------------------------------------------------------------
// Completion DAG
// ---------------------------------------------------------------------------

/// Dependency DAG over the top-level statements of one compute block.
/// Edges reflect blocking statement chains and awaited completions and are
/// kept transitively reduced. `group` identifies the await site that realizes
/// an edge (-1 for blocking-chain edges); edges of one group share a wait
/// node in the post/wait expansion.
struct CompletionDAG {
  struct Node {
    int site = -1;                     // statement site (or synthetic id)
    const ast::Stmt* stmt = nullptr;   // null in synthetic test DAGs
    bool sync = false;                 // blocking or await-prefixed
    bool data = false;                 // wavelet-triggered (foreach on stream)
  };
  struct Edge {
    int from = 0, to = 0;
    int group = -1;
  };
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  std::vector<std::vector<bool>> closure() const {
    std::size_t n = nodes.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (const auto& e : edges) r[e.from][e.to] = true;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (r[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (r[k][j]) r[i][j] = true;
    return r;
  }

  void transitive_reduce() {
    auto cl = closure();
    std::vector<Edge> kept;
    for (const auto& e : edges) {
      // redundant if some third node sits between the endpoints
      bool redundant = false;
      for (std::size_t k = 0; k < nodes.size() && !redundant; ++k) {
        if ((int)k == e.from || (int)k == e.to) continue;
        if (cl[e.from][k] && cl[k][e.to]) redundant = true;
      }
      if (!redundant) kept.push_back(e);
    }
    // dedupe parallel edges
    std::set<std::pair<int, int>> seen;
    edges.clear();
    for (const auto& e : kept)
      if (seen.insert({e.from, e.to}).second) edges.push_back(e);
  }
};

inline bool stmt_is_blocking(const ast::Stmt& s) {
  if (s.awaited) return true;
  switch (s.kind) {
    case ast::StmtKind::Assign:
    case ast::StmtKind::For:
    case ast::StmtKind::If:
    case ast::StmtKind::Await:
    case ast::StmtKind::AwaitAll:
      return true;
    default:
      return false;
  }
}

/// Stage (b): dependency DAG from completion/await statements plus blocking
/// order over the block's top-level statements.
inline CompletionDAG build_completion_dag(const ast::ComputeBlock& cb) {
  CompletionDAG dag;
  struct FrontEntry {
    int node;
    int group;
  };
  std::vector<FrontEntry> frontier;
  std::map<std::string, std::vector<int>> pending;

  auto push_front = [&](int node, int group) {
    for (const auto& fe : frontier)
      if (fe.node == node) return;
    frontier.push_back({node, group});
  };

  for (const auto& sp : cb.body) {
    const ast::Stmt& s = *sp;
    if (s.kind == ast::StmtKind::Await) {
      auto it = pending.find(s.await_name);
      if (it != pending.end()) {
        for (int n : it->second) push_front(n, s.site_id);
        pending.erase(it);
      }
      continue;
    }
    if (s.kind == ast::StmtKind::AwaitAll) {
      for (const auto& [name, nodes] : pending)
        for (int n : nodes) push_front(n, s.site_id);
      pending.clear();
      continue;
    }
    CompletionDAG::Node node;
    node.site = s.site_id;
    node.stmt = &s;
    node.sync = stmt_is_blocking(s);
    node.data = s.kind == ast::StmtKind::Foreach &&
                s.stream.kind != ast::StreamRef::Kind::Arg;
    int idx = (int)dag.nodes.size();
    dag.nodes.push_back(node);
    for (const auto& fe : frontier) dag.edges.push_back({fe.node, idx, fe.group});
    if (node.sync) {
      push_front(idx, -1);
    } else if (!s.completion.empty()) {
      pending[s.completion].push_back(idx);
    }
    // bare async statements are only joined by the implicit block-end awaitall
  }
  dag.transitive_reduce();
  return dag;
}

// ---------------------------------------------------------------------------
// Post/wait graph
// ---------------------------------------------------------------------------

struct PostWaitGraph {
  struct Node {
    enum class Kind { Post, Wait, Join };
    Kind kind;
    int dag_node = -1;  // Post/sync-Wait: owning statement node
    int group = -1;     // await-site waits
  };
  std::vector<Node> nodes;
  std::vector<std::pair<int, int>> edges;
  const CompletionDAG* dag = nullptr;

  std::vector<int> in_degree() const {
    std::vector<int> d(nodes.size(), 0);
    for (const auto& [a, b] : edges) ++d[b];
    return d;
  }
};

/// Stage (c): every statement becomes explicit post (and wait) events.
/// Synchronous statements expand to an adjacent post-wait pair; awaited
/// completions produce one wait node per await site.
inline PostWaitGraph to_post_wait(const CompletionDAG& dag) {
  PostWaitGraph g;
  g.dag = &dag;
  std::vector<int> post(dag.nodes.size()), wait(dag.nodes.size(), -1);
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
    post[i] = (int)g.nodes.size();
    g.nodes.push_back({PostWaitGraph::Node::Kind::Post, (int)i, -1});
    if (dag.nodes[i].sync) {
      wait[i] = (int)g.nodes.size();
      g.nodes.push_back({PostWaitGraph::Node::Kind::Wait, (int)i, -1});
      g.edges.push_back({post[i], wait[i]});
    }
  }
  std::map<int, int> group_wait;
  for (const auto& e : dag.edges) {
    if (e.group < 0) continue;
    if (!group_wait.count(e.group)) {
      group_wait[e.group] = (int)g.nodes.size();
      g.nodes.push_back({PostWaitGraph::Node::Kind::Wait, -1, e.group});
    }
  }
  for (const auto& e : dag.edges) {
    if (e.group < 0) {
      int from = wait[e.from] >= 0 ? wait[e.from] : post[e.from];
      g.edges.push_back({from, post[e.to]});
    } else {
      int w = group_wait[e.group];
      g.edges.push_back({post[e.from], w});
      g.edges.push_back({w, post[e.to]});
    }
  }
  std::set<std::pair<int, int>> dedup(g.edges.begin(), g.edges.end());
  g.edges.assign(dedup.begin(), dedup.end());
  return g;
}

/// Hardware constraint pass: a node destined to become a local task may keep
/// up to two predecessors, a data-task node one. Anything above that is
/// funneled through a pairwise binary tree of virtual join nodes.
inline PostWaitGraph reduce_indegree(PostWaitGraph g) {
  for (std::size_t target = 0; target < g.nodes.size(); ++target) {
    bool data = g.nodes[target].dag_node >= 0 &&
                g.dag->nodes[g.nodes[target].dag_node].data;
    int limit = data ? 1 : 2;
    std::vector<int> preds;
    for (const auto& [a, b] : g.edges)
      if ((int)b == (int)target) preds.push_back(a);
    if ((int)preds.size() <= limit) continue;
    // drop the old edges; combine predecessors pairwise
    std::vector<std::pair<int, int>> kept;
    for (const auto& e : g.edges)
      if (e.second != (int)target) kept.push_back(e);
    g.edges = std::move(kept);
    std::vector<int> level = preds;
    while (level.size() > 1) {
      std::vector<int> next;
      for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
        int j = (int)g.nodes.size();
        g.nodes.push_back({PostWaitGraph::Node::Kind::Join, -1, -1});
        g.edges.push_back({level[i], j});
        g.edges.push_back({level[i + 1], j});
        next.push_back(j);
      }
      if (level.size() % 2) next.push_back(level.back());
      level = std::move(next);
    }
    g.edges.push_back({level[0], (int)target});
  }
  return g;
}

// ---------------------------------------------------------------------------
// Task coarsening
// ---------------------------------------------------------------------------

enum class TaskEdge { Activate, Unblock };

struct Task {
  enum class Kind { Local, Data, Join };
  Kind kind = Kind::Local;
  std::vector<int> dag_nodes;  // statements in execution order
  std::vector<std::pair<int, TaskEdge>> preds;
  bool terminator = false;  // completion fan-out after a trailing bulk op
};

struct TaskGraph {
  std::vector<Task> tasks;
  const CompletionDAG* dag = nullptr;

  int task_of(int dag_node) const {
    for (int t = 0; t < (int)tasks.size(); ++t)
      for (int n : tasks[t].dag_nodes)
        if (n == dag_node) return t;
    return -1;
  }

  std::vector<std::vector<bool>> task_closure() const {
    std::size_t n = tasks.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (std::size_t t = 0; t < n; ++t)
      for (const auto& [p, kind] : tasks[t].preds) r[p][t] = true;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (r[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (r[k][j]) r[i][j] = true;
    return r;
  }

  /// Happens-before over the original statements, as realized by the tasks.
  std::vector<std::vector<bool>> stmt_closure() const {
    auto tc = task_closure();
    std::size_t n = dag->nodes.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        int ta = task_of((int)a), tb = task_of((int)b);
        if (ta == tb) {
          const auto& body = tasks[ta].dag_nodes;
          auto pa = std::find(body.begin(), body.end(), (int)a);
          auto pb = std::find(body.begin(), body.end(), (int)b);
          r[a][b] = pa < pb;
        } else {
          r[a][b] = tc[ta][tb];
        }
      }
    }
    return r;
  }
};

/// Stage (d): groups post/wait nodes into tasks. Linear chains of local
/// statements fuse; wavelet-triggered statements become data tasks; virtual
/// joins become zero-cost local tasks. Cross-task edges are annotated
/// activate/unblock.
inline TaskGraph coarsen(const PostWaitGraph& g, Diagnostics& diags) {
  const CompletionDAG& dag = *g.dag;
  // collapse each statement's post(+wait) pair and single-source await waits
  std::vector<int> unit_of(g.nodes.size(), -1);
  struct Unit {
    Task::Kind kind = Task::Kind::Join;
    std::vector<int> dag_nodes;
  };
  std::vector<Unit> units;
  auto in_deg = g.in_degree();

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (n.kind == PostWaitGraph::Node::Kind::Post) {
      unit_of[i] = (int)units.size();
      Unit u;
      u.kind = dag.nodes[n.dag_node].data ? Task::Kind::Data : Task::Kind::Local;
      u.dag_nodes = {n.dag_node};
      units.push_back(std::move(u));
    }
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (n.kind == PostWaitGraph::Node::Kind::Post) continue;
    if (n.kind == PostWaitGraph::Node::Kind::Wait && n.dag_node >= 0) {
      // adjacent wait of a synchronous statement
      for (std::size_t p = 0; p < g.nodes.size(); ++p)
        if (g.nodes[p].kind == PostWaitGraph::Node::Kind::Post &&
            g.nodes[p].dag_node == n.dag_node)
          unit_of[i] = unit_of[p];
      continue;
    }
    // await-site waits with a single incoming post merge into that unit;
    // everything else (multi-source waits, virtual joins) stands alone
    std::vector<int> preds;
    for (const auto& [a, b] : g.edges)
      if ((int)b == (int)i) preds.push_back(a);
    if (n.kind == PostWaitGraph::Node::Kind::Wait && preds.size() == 1 &&
        unit_of[preds[0]] >= 0) {
      unit_of[i] = unit_of[preds[0]];
    } else {
      unit_of[i] = (int)units.size();
      units.push_back(Unit{});
    }
  }

  // unit-level edges
  std::set<std::pair<int, int>> uedges;
  for (const auto& [a, b] : g.edges) {
    int ua = unit_of[a], ub = unit_of[b];
    if (ua != ub) uedges.insert({ua, ub});
  }

  // task fusion: A->B merges when A is B's only predecessor, B is A's only
  // successor, and neither side is a data task
  bool changed = true;
  std::vector<bool> dead(units.size(), false);
  while (changed) {
    changed = false;
    for (auto it = uedges.begin(); it != uedges.end(); ++it) {
      auto [a, b] = *it;
      if (dead[a] || dead[b]) continue;
      if (units[a].kind == Task::Kind::Data || units[b].kind == Task::Kind::Data)
        continue;
      int a_succ = 0, b_pred = 0;
      for (const auto& [x, y] : uedges) {
        if (x == a && !dead[y]) ++a_succ;
        if (y == b && !dead[x]) ++b_pred;
      }
      if (a_succ != 1 || b_pred != 1) continue;
      // merge b into a
      for (int n : units[b].dag_nodes) units[a].dag_nodes.push_back(n);
      if (units[a].kind == Task::Kind::Join) units[a].kind = units[b].kind;
      dead[b] = true;
      std::set<std::pair<int, int>> next;
      for (const auto& [x, y] : uedges) {
        int nx = x == b ? a : x;
        int ny = y == b ? a : y;
        if (nx != ny) next.insert({nx, ny});
      }
      uedges = std::move(next);
      changed = true;
      break;
    }
  }

  TaskGraph tg;
  tg.dag = &dag;
  std::vector<int> task_of_unit(units.size(), -1);
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (dead[u]) continue;
    task_of_unit[u] = (int)tg.tasks.size();
    Task t;
    t.kind = units[u].dag_nodes.empty() ? Task::Kind::Join : units[u].kind;
    t.dag_nodes = units[u].dag_nodes;
    // a trailing asynchronous bulk statement needs completion fan-out
    if (!t.dag_nodes.empty()) {
      const auto& last = dag.nodes[t.dag_nodes.back()];
      if (last.stmt && !last.sync &&
          (last.stmt->kind == ast::StmtKind::Map ||
           last.stmt->kind == ast::StmtKind::Send))
        t.terminator = true;
    }
    tg.tasks.push_back(std::move(t));
  }
  for (const auto& [a, b] : uedges) {
    if (dead[a] || dead[b]) continue;
    int ta = task_of_unit[a], tb = task_of_unit[b];
    auto& task = tg.tasks[tb];
    TaskEdge kind = task.kind == Task::Kind::Data ? TaskEdge::Unblock
                    : task.preds.empty()          ? TaskEdge::Activate
                                                  : TaskEdge::Unblock;
    task.preds.push_back({ta, kind});
  }
  for (const auto& t : tg.tasks) {
    int limit = t.kind == Task::Kind::Data ? 1 : 2;
    if ((int)t.preds.size() > limit)
      diags.error("taskgraph.indegree", SourceLoc{},
                  "task exceeds its predecessor limit after coarsening");
  }
  return tg;
}

inline TaskGraph lower_block_to_tasks(const ast::ComputeBlock& cb,
                                      CompletionDAG& dag_storage,
                                      Diagnostics& diags) {
  dag_storage = build_completion_dag(cb);
  auto pwg = to_post_wait(dag_storage);
  pwg = reduce_indegree(std::move(pwg));
  return coarsen(pwg, diags);
}

}  // namespace spada
