// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <sstream>
#include <string>

#include "spada/compile.hpp"

namespace spada {

/// DOT digraph of the routing graph; edges are colored by channel.
inline std::string emit_routing_dot(const AnalyzedKernel& a) {
  static const char* palette[] = {"red",    "blue",   "forestgreen", "orange",
                                  "purple", "brown",  "cadetblue",   "magenta",
                                  "gray40", "gold3",  "navy",        "tomato",
                                  "teal",   "olive",  "deeppink",    "black"};
  std::ostringstream os;
  os << "digraph routing {\n  node [shape=point];\n";
  RoutingGraph all = a.merged_routing();
  std::set<PECoord> pes;
  for (const auto& p : all.paths)
    for (PECoord c : p.nodes) pes.insert(c);
  for (PECoord c : pes)
    os << "  \"" << c.x << "," << c.y << "\" [pos=\"" << c.x << "," << c.y
       << "!\"];\n";
  for (const auto& p : all.paths) {
    const char* color =
        p.channel >= 0 ? palette[p.channel % 16] : "gray";
    for (std::size_t h = 0; h + 1 < p.nodes.size(); ++h) {
      os << "  \"" << p.nodes[h].x << "," << p.nodes[h].y << "\" -> \""
         << p.nodes[h + 1].x << "," << p.nodes[h + 1].y << "\" [color="
         << color << " label=\"" << p.stream << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

inline nlohmann::json emit_routing_json(const AnalyzedKernel& a) {
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& rg : a.routing) {
    for (const auto& p : rg.paths) {
      nlohmann::json jp;
      jp["stream"] = p.stream;
      jp["channel"] = p.channel;
      jp["phase"] = p.phase;
      jp["src"] = {p.src.x, p.src.y};
      nlohmann::json hops = nlohmann::json::array();
      for (std::size_t h = 1; h < p.nodes.size(); ++h)
        hops.push_back({p.nodes[h].x, p.nodes[h].y});
      jp["hops"] = hops;
      paths.push_back(jp);
    }
  }
  return nlohmann::json{{"paths", paths}};
}

/// Three DOT graphs per compute block: the completion DAG, the post/wait
/// expansion, and the coarsened tasks with activate/unblock edges.
inline std::string emit_tasks_dot(const CompiledProgram& prog) {
  std::ostringstream os;
  int bi = 0;
  for (const auto& bp : prog.blocks) {
    std::string suffix = "_b" + std::to_string(bi++);
    const CompletionDAG& dag = *bp.dag;
    os << "digraph completion" << suffix << " {\n";
    for (std::size_t n = 0; n < dag.nodes.size(); ++n)
      os << "  n" << n << " [label=\"site " << dag.nodes[n].site
         << (dag.nodes[n].data ? " (data)" : "") << "\"];\n";
    for (const auto& e : dag.edges)
      os << "  n" << e.from << " -> n" << e.to
         << (e.group >= 0 ? " [style=dashed]" : "") << ";\n";
    os << "}\n";

    auto pwg = reduce_indegree(to_post_wait(dag));
    os << "digraph postwait" << suffix << " {\n";
    for (std::size_t n = 0; n < pwg.nodes.size(); ++n) {
      const auto& node = pwg.nodes[n];
      std::string label =
          node.kind == PostWaitGraph::Node::Kind::Post   ? "post"
          : node.kind == PostWaitGraph::Node::Kind::Wait ? "wait"
                                                         : "join";
      if (node.dag_node >= 0)
        label += " s" + std::to_string(dag.nodes[node.dag_node].site);
      os << "  n" << n << " [label=\"" << label << "\""
         << (node.kind == PostWaitGraph::Node::Kind::Join
                 ? " shape=diamond"
                 : "")
         << "];\n";
    }
    for (const auto& [x, y] : pwg.edges)
      os << "  n" << x << " -> n" << y << ";\n";
    os << "}\n";

    os << "digraph tasks" << suffix << " {\n";
    for (std::size_t t = 0; t < bp.tasks.tasks.size(); ++t) {
      const Task& task = bp.tasks.tasks[t];
      std::string label = task.kind == Task::Kind::Data    ? "data"
                          : task.kind == Task::Kind::Join  ? "join"
                                                           : "local";
      label += " [";
      for (std::size_t s = 0; s < task.dag_nodes.size(); ++s) {
        if (s) label += " ";
        label += std::to_string(dag.nodes[task.dag_nodes[s]].site);
      }
      label += "]";
      os << "  t" << t << " [label=\"" << label << "\"";
      if (task.kind == Task::Kind::Data) os << " shape=box";
      if (task.kind == Task::Kind::Join) os << " shape=diamond";
      os << "];\n";
    }
    for (std::size_t t = 0; t < bp.tasks.tasks.size(); ++t)
      for (const auto& [p, kind] : bp.tasks.tasks[t].preds)
        os << "  t" << p << " -> t" << t << " [label=\""
           << (kind == TaskEdge::Activate ? "activate" : "unblock")
           << "\"];\n";
    os << "}\n";
  }
  return os.str();
}

}  // namespace spada
