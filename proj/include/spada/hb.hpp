// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <queue>
#include <tuple>
#include <vector>

#include "spada/sema.hpp"

namespace spada {

/// Happens-before over (statement site, PE) instances, derived from local
/// order, stream-edge synchronization, and per-PE block sequencing (each
/// compute block ends with an implicit awaitall). Strict reachability
/// (all instances before the first instance) holds along any path that
/// contains at least one strict edge, or between single-instance endpoints.
class HbGraph {
 public:
  HbGraph(const ast::Kernel& k, const KernelIndex& ix, const ParamMap& params,
          const SemaInfo& info)
      : ix_(ix) {
    build(k, params, info);
  }

  bool happens_before(int s1, PECoord p1, int s2, PECoord p2) const {
    return query(s1, p1, s2, p2, /*need_strict=*/false);
  }

  /// S1,(p1) strictly happens-before S2,(p2).
  bool strictly_before(int s1, PECoord p1, int s2, PECoord p2) const {
    return query(s1, p1, s2, p2, /*need_strict=*/true);
  }

  bool empties_before(const StreamEdge& a, const StreamEdge& b) const {
    return strictly_before(a.recv_site, a.dst, b.send_site, b.src);
  }

 private:
  // node kinds: 0 = site, 1 = block entry, 2 = block exit
  using Key = std::tuple<int, int, int, int>;  // kind, id, x, y

  int node(int kind, int id, PECoord p) {
    Key k{kind, id, p.x, p.y};
    auto it = nodes_.find(k);
    if (it != nodes_.end()) return it->second;
    int idx = (int)adj_.size();
    nodes_.emplace(k, idx);
    adj_.emplace_back();
    return idx;
  }

  int find_node(int kind, int id, PECoord p) const {
    auto it = nodes_.find(Key{kind, id, p.x, p.y});
    return it == nodes_.end() ? -1 : it->second;
  }

  void edge(int from, int to, bool strict) { adj_[from].push_back({to, strict}); }

  void build(const ast::Kernel&, const ParamMap& params, const SemaInfo& info) {
    Diagnostics scratch;
    // per-PE ordered list of blocks (phases in order, blocks in source order)
    std::map<PECoord, std::vector<int>> pe_blocks;
    int global_block = 0;
    for (const auto& pi : ix_.phases) {
      for (auto* cb : pi.computes) {
        auto cs = resolve_subgrid(cb->sg, params, scratch);
        if (!cs) continue;
        const LocalOrder& lo = info.orders.at(cb->block_id);
        for (PECoord p : cs->enumerate()) {
          pe_blocks[p].push_back(global_block);
          int entry = node(1, global_block, p);
          int exit = node(2, global_block, p);
          for (const auto& [site, si] : lo.sites) {
            int sn = node(0, site, p);
            edge(entry, sn, true);
            edge(sn, exit, true);
          }
          for (const auto& [pair, why] : lo.rel) {
            int a = node(0, pair.first, p);
            int b = node(0, pair.second, p);
            edge(a, b, lo.strict(pair.first, pair.second));
          }
        }
        block_orders_[cb->block_id] = &lo;
        ++global_block;
      }
    }
    for (const auto& [p, blocks] : pe_blocks) {
      for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
        int ex = find_node(2, blocks[i], p);
        int en = find_node(1, blocks[i + 1], p);
        if (ex >= 0 && en >= 0) edge(ex, en, true);
      }
    }
    for (const auto& pe : info.phase_edges) {
      for (const auto& e : pe.edges) {
        int sn = find_node(0, e.send_site, e.src);
        int rn = find_node(0, e.recv_site, e.dst);
        if (sn < 0 || rn < 0) continue;
        bool strict = e.count == 1 && single_instance(e.send_site) &&
                      single_instance(e.recv_site);
        edge(sn, rn, strict);
      }
    }
  }

  bool single_instance(int site) const {
    for (const auto& [bid, lo] : block_orders_) {
      auto it = lo->sites.find(site);
      if (it != lo->sites.end()) return it->second.enclosing_loops.empty();
    }
    return false;
  }

  bool query(int s1, PECoord p1, int s2, PECoord p2, bool need_strict) const {
    int from = find_node(0, s1, p1);
    int to = find_node(0, s2, p2);
    if (from < 0 || to < 0) return false;
    // BFS over (node, seen-strict) states
    std::vector<unsigned char> visited(adj_.size() * 2, 0);
    std::queue<std::pair<int, int>> q;
    q.push({from, 0});
    visited[from * 2] = 1;
    while (!q.empty()) {
      auto [n, s] = q.front();
      q.pop();
      for (const auto& [m, strict] : adj_[n]) {
        int ns = s || strict ? 1 : 0;
        if (m == to && (!need_strict || ns)) return true;
        if (!visited[m * 2 + ns]) {
          visited[m * 2 + ns] = 1;
          q.push({m, ns});
        }
      }
    }
    return false;
  }

  const KernelIndex& ix_;
  std::map<Key, int> nodes_;
  std::vector<std::vector<std::pair<int, bool>>> adj_;
  std::map<int, const LocalOrder*> block_orders_;
};

}  // namespace spada
