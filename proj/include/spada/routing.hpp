// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "spada/hb.hpp"
#include "spada/sema.hpp"

namespace spada {

/// One routed communication instance: the PEs a stream edge's data passes
/// through, with its channel.
struct RoutedPath {
  std::string stream;
  std::string channel_key;  // explicit "#n" or per-phase stream surrogate
  int64_t channel = -1;     // explicit / allocated channel, -1 if pending
  PECoord src, dst;
  std::vector<PECoord> nodes;  // src, intermediate PEs..., dst
  int phase = 0;
  int edge_index = 0;  // into PhaseEdges::edges of that phase
};

struct RoutingGraph {
  std::vector<RoutedPath> paths;
  std::map<PECoord, std::vector<int>> by_pe;  // PE -> path indices

  void index() {
    by_pe.clear();
    for (int i = 0; i < (int)paths.size(); ++i)
      for (PECoord p : paths[i].nodes) by_pe[p].push_back(i);
  }
};

struct Conflict {
  int path_a = 0, path_b = 0;
  PECoord shared;
};

/// Hardware channel resource limits per PE.
struct ChannelBudget {
  static constexpr int total_colors = 24;
  static constexpr int reserved = 8;
  static constexpr int usable = 16;  // total - reserved
  static constexpr int task_id_pool = 28;
};

namespace detail {

inline std::string offset_str(int dx, int dy) {
  return "(" + std::to_string(dx) + ", " + std::to_string(dy) + ")";
}

}  // namespace detail

/// Builds the routing graph of one phase from its derived stream edges.
/// Streams default to the direct single-hop route; multi-hop offsets need an
/// explicit hops declaration.
inline RoutingGraph build_routing_graph(const KernelIndex& ix, int phase_index,
                                        const std::vector<StreamEdge>& edges,
                                        Diagnostics& diags) {
  RoutingGraph rg;
  const PhaseIndex& pi = ix.phases.at(phase_index);

  // validate declarations once per stream
  std::map<std::string, std::vector<std::pair<int, int>>> hops_of;
  for (const auto& [name, sd] : pi.streams) {
    std::vector<std::pair<int, int>> hops;
    if (sd->routing && !sd->routing->hops.empty()) {
      hops = sd->routing->hops;
      int sx = 0, sy = 0;
      for (auto [hx, hy] : hops) {
        if (std::abs(hx) + std::abs(hy) != 1) {
          diags.error("routing.illegal-hop", sd->loc,
                      "hop " + detail::offset_str(hx, hy) +
                          " of stream '" + name +
                          "' must have |hx|+|hy| = 1");
          return rg;
        }
        sx += hx;
        sy += hy;
      }
      if (sx != sd->dx || sy != sd->dy) {
        diags.error("routing.hop-sum-mismatch", sd->loc,
                    "hops of stream '" + name + "' sum to " +
                        detail::offset_str(sx, sy) + " but the offset is " +
                        detail::offset_str(sd->dx, sd->dy));
        return rg;
      }
    } else {
      if (std::abs(sd->dx) + std::abs(sd->dy) != 1) {
        diags.error("routing.multi-hop-default", sd->loc,
                    "stream '" + name + "' has offset " +
                        detail::offset_str(sd->dx, sd->dy) +
                        "; multi-hop streams require an explicit hops "
                        "declaration");
        return rg;
      }
      hops = {{sd->dx, sd->dy}};
    }
    hops_of[name] = std::move(hops);
  }

  int ei = 0;
  for (const auto& e : edges) {
    const ast::StreamDecl* sd = pi.streams.at(e.stream);
    RoutedPath rp;
    rp.stream = e.stream;
    if (sd->routing && sd->routing->channel) {
      rp.channel = *sd->routing->channel;
      rp.channel_key = "#" + std::to_string(rp.channel);
    } else {
      rp.channel_key =
          "s:" + std::to_string(phase_index) + ":" + e.stream;
    }
    rp.src = e.src;
    rp.dst = e.dst;
    rp.phase = phase_index;
    rp.edge_index = ei++;
    PECoord cur = e.src;
    rp.nodes.push_back(cur);
    for (auto [hx, hy] : hops_of[e.stream]) {
      cur = {cur.x + hx, cur.y + hy};
      rp.nodes.push_back(cur);
    }
    rg.paths.push_back(std::move(rp));
  }
  rg.index();
  return rg;
}

/// Reports every pair of same-channel paths that share a PE and whose stream
/// edges are not ordered by empties-before in either direction.
inline std::vector<Conflict> check_conflicts(
    const RoutingGraph& rg, const std::vector<PhaseEdges>& all_edges,
    const HbGraph& hb) {
  std::vector<Conflict> out;
  std::set<std::pair<int, int>> seen;
  for (const auto& [pe, paths] : rg.by_pe) {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      for (std::size_t j = i + 1; j < paths.size(); ++j) {
        int a = paths[i], b = paths[j];
        const RoutedPath& pa = rg.paths[a];
        const RoutedPath& pb = rg.paths[b];
        if (pa.channel_key != pb.channel_key) continue;
        if (pa.phase == pb.phase && pa.edge_index == pb.edge_index) continue;
        // sequential sends on one stream from one source share a circuit;
        // the fabric keeps them first-in-first-out, so they cannot interfere
        if (pa.phase == pb.phase && pa.stream == pb.stream && pa.src == pb.src)
          continue;
        if (!seen.insert({std::min(a, b), std::max(a, b)}).second) continue;
        const StreamEdge& ea = all_edges[pa.phase].edges[pa.edge_index];
        const StreamEdge& eb = all_edges[pb.phase].edges[pb.edge_index];
        if (hb.empties_before(ea, eb) || hb.empties_before(eb, ea)) continue;
        out.push_back({std::min(a, b), std::max(a, b), pe});
      }
    }
  }
  return out;
}

}  // namespace spada
