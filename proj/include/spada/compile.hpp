// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "spada/hostbuf.hpp"
#include "spada/pipeline.hpp"
#include "spada/taskgraph.hpp"

namespace spada {

struct BlockProgram {
  const ast::ComputeBlock* block = nullptr;
  int phase_index = 0;
  ConcreteSubgrid subgrid;
  std::unique_ptr<CompletionDAG> dag;
  TaskGraph tasks;
};

struct StreamInfo {
  std::string name;
  int phase = 0;
  int dx = 0, dy = 0;
  int64_t channel = -1;
  std::vector<std::pair<int, int>> hops;  // resolved route
  ElemType type = ElemType::F32;
};

/// Mapping between one argument's host slices and PEs (§-style extents).
struct ArgExtent {
  std::string name;
  ElemType type = ElemType::F32;
  ast::ArgMode mode = ast::ArgMode::ReadOnly;
  bool scalar = false;
  bool streamed = false;  // no declared slice count
  int64_t slices = 0;
  int64_t per_slice = 0;
  std::vector<PECoord> slice_pe;
  PECoord origin{0, 0};
  int step_x = 0, step_y = 0;  // for line extents
  std::string layout;          // "line" | "row-major" | "col-major" | "point" | "scalar"
  std::vector<PECoord> scalar_pes;
};

struct CompiledProgram {
  std::unique_ptr<AnalyzedKernel> analysis;
  std::vector<BlockProgram> blocks;  // phases in order, blocks in source order
  std::map<PECoord, std::vector<int>> pe_blocks;
  std::map<std::pair<int, std::string>, StreamInfo> streams;
  std::vector<ArgExtent> args;
  // static edge lookup for the machine: (phase, recv site, pe) -> total count
  std::map<std::tuple<int, int, int, int>, int64_t> recv_totals;
  int min_width = 1, min_height = 1;
  int pe_classes = 0;
  int max_tasks_per_pe = 0;
  nlohmann::json metadata;

  const ArgExtent* find_arg(const std::string& name) const {
    for (const auto& a : args)
      if (a.name == name) return &a;
    return nullptr;
  }
};

namespace compile_detail {

inline bool check_line(const std::vector<PECoord>& pes, ArgExtent& ext) {
  if (pes.size() == 1) {
    ext.layout = "point";
    ext.origin = pes[0];
    ext.step_x = ext.step_y = 0;
    return true;
  }
  int dx = pes[1].x - pes[0].x, dy = pes[1].y - pes[0].y;
  if (std::abs(dx) + std::abs(dy) != 1) return false;
  for (std::size_t s = 1; s < pes.size(); ++s) {
    if (pes[s].x - pes[s - 1].x != dx || pes[s].y - pes[s - 1].y != dy)
      return false;
  }
  ext.layout = "line";
  ext.origin = pes[0];
  ext.step_x = dx;
  ext.step_y = dy;
  return true;
}

inline bool check_grid(const std::vector<PECoord>& pes, ArgExtent& ext) {
  int x0 = pes[0].x, x1 = pes[0].x, y0 = pes[0].y, y1 = pes[0].y;
  for (const auto& p : pes) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  int64_t w = x1 - x0 + 1, h = y1 - y0 + 1;
  if (w * h != (int64_t)pes.size()) return false;
  bool row = true, col = true;
  for (std::size_t s = 0; s < pes.size(); ++s) {
    PECoord rm{(int)(x0 + (int64_t)s % w), (int)(y0 + (int64_t)s / w)};
    PECoord cm{(int)(x0 + (int64_t)s / h), (int)(y0 + (int64_t)s % h)};
    if (pes[s] != rm) row = false;
    if (pes[s] != cm) col = false;
  }
  if (!row && !col) return false;
  ext.layout = row ? "row-major" : "col-major";
  ext.origin = {x0, y0};
  return true;
}

}  // namespace compile_detail

/// Lowers an analyzed kernel to its executable form: per-block task graphs,
/// argument extents, resource budget checks, and the run metadata JSON.
inline std::unique_ptr<CompiledProgram> compile_kernel(
    std::unique_ptr<AnalyzedKernel> analysis, Diagnostics& diags) {
  auto prog = std::make_unique<CompiledProgram>();
  prog->analysis = std::move(analysis);
  AnalyzedKernel& a = *prog->analysis;
  const ast::Kernel& k = a.kernel;

  // streams with resolved routes and channels
  for (const auto& pi : a.ix.phases) {
    for (const auto& [name, sd] : pi.streams) {
      StreamInfo si;
      si.name = name;
      si.phase = pi.index;
      si.dx = sd->dx;
      si.dy = sd->dy;
      si.type = sd->type;
      if (sd->routing && sd->routing->channel) si.channel = *sd->routing->channel;
      if (sd->routing && !sd->routing->hops.empty()) si.hops = sd->routing->hops;
      else si.hops = {{sd->dx, sd->dy}};
      prog->streams[{pi.index, name}] = si;
    }
  }

  // block programs
  for (const auto& pi : a.ix.phases) {
    for (auto* cb : pi.computes) {
      BlockProgram bp;
      bp.block = cb;
      bp.phase_index = pi.index;
      Diagnostics scratch;
      auto cs = resolve_subgrid(cb->sg, a.params, scratch);
      if (!cs) {
        diags.append(scratch);
        return nullptr;
      }
      bp.subgrid = *cs;
      bp.dag = std::make_unique<CompletionDAG>();
      bp.tasks = lower_block_to_tasks(*cb, *bp.dag, diags);
      if (diags.has_errors()) return nullptr;
      int idx = (int)prog->blocks.size();
      for (PECoord p : cs->enumerate()) prog->pe_blocks[p].push_back(idx);
      prog->blocks.push_back(std::move(bp));
    }
  }

  // fabric footprint (place blocks included: memory must exist)
  int maxx = 0, maxy = 0;
  bool any_pe = false;
  auto widen = [&](const ConcreteSubgrid& cs) {
    if (cs.count() == 0) return;
    any_pe = true;
    maxx = std::max(maxx, (int)(cs.r[0].hi - 1));
    maxy = std::max(maxy, (int)(cs.r[1].hi - 1));
  };
  for (const auto& bp : prog->blocks) widen(bp.subgrid);
  for (auto* pb : a.ix.top_places) {
    Diagnostics scratch;
    if (auto cs = resolve_subgrid(pb->sg, a.params, scratch)) widen(*cs);
  }
  prog->min_width = any_pe ? maxx + 1 : 1;
  prog->min_height = any_pe ? maxy + 1 : 1;

  // receive totals per (phase, recv site, pe)
  for (const auto& pe : a.sema.phase_edges)
    for (const auto& e : pe.edges)
      prog->recv_totals[{pe.phase_index, e.recv_site, e.dst.x, e.dst.y}] +=
          e.count;

  // ---- argument extents (slice expressions against compute subgrids) ----
  std::map<std::string, ArgExtent> extents;
  for (const auto& ad : k.args) {
    ArgExtent ext;
    ext.name = ad.name;
    ext.type = ad.type;
    ext.mode = ad.mode;
    ext.scalar = ad.is_scalar;
    ext.streamed = !ad.is_scalar && ad.extent == nullptr;
    if (ext.scalar) ext.layout = "scalar";
    extents[ad.name] = ext;
  }

  std::map<std::string, std::map<int64_t, PECoord>> slice_maps;
  std::map<std::string, int64_t> per_slice_seen;

  for (const auto& bp : prog->blocks) {
    const auto& lo = a.sema.orders.at(bp.block->block_id);
    for (const auto& [site, si] : lo.sites) {
      const ast::Stmt& s = *si.stmt;
      bool uses_arg = (s.kind == ast::StmtKind::Send ||
                       s.kind == ast::StmtKind::Receive ||
                       s.kind == ast::StmtKind::Foreach) &&
                      s.stream.kind == ast::StreamRef::Kind::Arg;
      if (uses_arg) {
        auto it = extents.find(s.stream.name);
        if (it == extents.end()) continue;
        ArgExtent& ext = it->second;
        for (PECoord p : bp.subgrid.enumerate()) {
          ParamMap env = a.params;
          env[bp.block->sg.dims[0].name] = p.x;
          env[bp.block->sg.dims[1].name] = p.y;
          bool active = true;
          for (const auto& [g, taken] : si.guards) {
            auto v = detail::try_eval(*g, env);
            if (v && (*v != 0) != taken) active = false;
          }
          if (!active) continue;
          auto idx = detail::try_eval(*s.stream.arg_index, env);
          if (!idx) {
            diags.error("compile.extent", s.loc,
                        "argument slice index must be evaluable from PE "
                        "coordinates and parameters");
            return nullptr;
          }
          // elements transferred per execution of this site
          int64_t n = 1;
          if (s.kind == ast::StmtKind::Foreach) {
            if (s.range) {
              Diagnostics scratch;
              if (auto r = resolve_range(*s.range, env, scratch)) n = r->count();
            }
          } else if (s.value && s.value->kind == ast::Expr::Kind::Var) {
            const ast::PlaceDecl* d = a.ix.find_decl(bp.phase_index, s.value->name);
            if (d && !d->shape.empty()) {
              n = 1;
              for (const auto& dim : d->shape) {
                auto v = detail::try_eval(*dim, env);
                n *= v ? *v : 1;
              }
            }
          }
          auto& smap = slice_maps[ext.name];
          auto old = smap.find(*idx);
          if (old != smap.end() && !(old->second == p)) {
            diags.error("compile.extent-not-rectangular", s.loc,
                        "argument '" + ext.name + "' slice " +
                            std::to_string(*idx) +
                            " is bound to more than one PE");
            return nullptr;
          }
          smap[*idx] = p;
          auto& seen = per_slice_seen[ext.name];
          if (seen == 0) seen = n;
          else if (seen != n) {
            diags.error("compile.extent", s.loc,
                        "argument '" + ext.name +
                            "' is used with inconsistent slice sizes");
            return nullptr;
          }
        }
      }
    }
    // scalar argument placement: any reference in the block
    for (const auto& ad : k.args) {
      if (!ad.is_scalar) continue;
      bool used = false;
      ast::walk_stmts(bp.block->body, [&](const ast::Stmt& s) {
        auto scan = [&](const ast::Expr& e) {
          ast::walk_exprs(e, [&](const ast::Expr& x) {
            if (x.kind == ast::Expr::Kind::Var && x.name == ad.name) used = true;
          });
        };
        if (s.value) scan(*s.value);
        if (s.cond) scan(*s.cond);
        if (s.lhs) scan(*s.lhs);
        if (s.rhs) scan(*s.rhs);
        if (s.range) {
          if (s.range->lo) scan(*s.range->lo);
          if (s.range->hi) scan(*s.range->hi);
          if (s.range->step) scan(*s.range->step);
        }
      });
      if (used)
        for (PECoord p : bp.subgrid.enumerate())
          extents[ad.name].scalar_pes.push_back(p);
    }
  }

  for (auto& [name, ext] : extents) {
    if (ext.scalar) {
      std::sort(ext.scalar_pes.begin(), ext.scalar_pes.end());
      ext.scalar_pes.erase(
          std::unique(ext.scalar_pes.begin(), ext.scalar_pes.end()),
          ext.scalar_pes.end());
      prog->args.push_back(ext);
      continue;
    }
    const auto& smap = slice_maps[name];
    const ast::ArgDecl* ad = k.find_arg(name);
    int64_t declared = -1;
    if (ad && ad->extent) {
      auto v = detail::try_eval(*ad->extent, a.params);
      if (!v) {
        diags.error("compile.extent", ad->loc,
                    "argument extent must be evaluable from parameters");
        return nullptr;
      }
      declared = *v;
    }
    ext.slices = declared >= 0 ? declared : (int64_t)smap.size();
    ext.per_slice = per_slice_seen[name];
    // slice indices must be dense 0..slices-1
    ext.slice_pe.assign((std::size_t)std::max<int64_t>(ext.slices, 0), {0, 0});
    std::vector<bool> seen((std::size_t)std::max<int64_t>(ext.slices, 0), false);
    for (const auto& [idx, p] : smap) {
      if (idx < 0 || idx >= ext.slices) {
        diags.error("compile.extent", SourceLoc{},
                    "argument '" + name + "' uses slice " + std::to_string(idx) +
                        " outside its extent of " + std::to_string(ext.slices));
        return nullptr;
      }
      ext.slice_pe[(std::size_t)idx] = p;
      seen[(std::size_t)idx] = true;
    }
    for (std::size_t sidx = 0; sidx < seen.size(); ++sidx) {
      if (!seen[sidx]) {
        diags.error("compile.extent", SourceLoc{},
                    "argument '" + name + "' slice " + std::to_string(sidx) +
                        " is never bound to a PE");
        return nullptr;
      }
    }
    if (!ext.slice_pe.empty() &&
        !compile_detail::check_line(ext.slice_pe, ext) &&
        !compile_detail::check_grid(ext.slice_pe, ext)) {
      diags.error("compile.extent-not-rectangular", SourceLoc{},
                  "argument '" + name +
                      "' does not map onto a contiguous rectangle or line "
                      "of PEs");
      return nullptr;
    }
    prog->args.push_back(ext);
  }
  std::sort(prog->args.begin(), prog->args.end(),
            [](const ArgExtent& x, const ArgExtent& y) { return x.name < y.name; });

  // ---- per-PE resource budgets: channels + task ids share a pool ----
  std::map<std::pair<int, PECoord>, int> tasks_at;
  for (std::size_t b = 0; b < prog->blocks.size(); ++b) {
    const auto& bp = prog->blocks[b];
    for (PECoord p : bp.subgrid.enumerate())
      tasks_at[{bp.phase_index, p}] += (int)bp.tasks.tasks.size();
  }
  for (const auto& [key, ntasks] : tasks_at) {
    prog->max_tasks_per_pe = std::max(prog->max_tasks_per_pe, ntasks);
    int chans = 0;
    auto it = a.channels.per_pe_peak.find(key.second);
    if (it != a.channels.per_pe_peak.end()) chans = it->second;
    if (ntasks + chans > ChannelBudget::task_id_pool) {
      diags.error("compile.task-budget", SourceLoc{},
                  "PE (" + std::to_string(key.second.x) + ", " +
                      std::to_string(key.second.y) + ") needs " +
                      std::to_string(ntasks) + " task ids plus " +
                      std::to_string(chans) + " channels, exceeding the pool "
                      "of " + std::to_string(ChannelBudget::task_id_pool));
      return nullptr;
    }
  }

  // PE equivalence classes: distinct block membership combinations
  std::set<std::vector<int>> classes;
  for (const auto& [p, list] : prog->pe_blocks) classes.insert(list);
  prog->pe_classes = (int)classes.size();

  // ---- metadata ----
  nlohmann::json meta;
  meta["kernel"] = k.name;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, v] : a.params) params[name] = v;
  meta["params"] = params;
  meta["fabric"] = {{"width", prog->min_width}, {"height", prog->min_height}};
  nlohmann::json argsj = nlohmann::json::object();
  for (const auto& ext : prog->args) {
    nlohmann::json aj;
    aj["dtype"] = elem_type_name(ext.type);
    aj["mode"] = ext.mode == ast::ArgMode::ReadOnly ? "readonly" : "writeonly";
    if (ext.scalar) {
      aj["transmission"] = "scalar";
      nlohmann::json pes = nlohmann::json::array();
      for (const auto& p : ext.scalar_pes) pes.push_back({p.x, p.y});
      aj["pes"] = pes;
    } else {
      aj["transmission"] = ext.streamed ? "streamed" : "buffered";
      aj["slices"] = ext.slices;
      aj["per_slice"] = ext.per_slice;
      aj["layout"] = ext.layout;
      aj["origin"] = {ext.origin.x, ext.origin.y};
      if (ext.layout == "line") aj["step"] = {ext.step_x, ext.step_y};
    }
    argsj[ext.name] = aj;
  }
  meta["args"] = argsj;
  nlohmann::json chans = nlohmann::json::object();
  for (const auto& sc : a.channels.streams)
    chans["phase" + std::to_string(sc.phase) + "/" + sc.stream] = sc.channel;
  meta["channels"] = chans;
  meta["channels_used"] = a.channels.channels_used;
  meta["pe_classes"] = prog->pe_classes;
  meta["tasks"] = {{"per_pe_max", prog->max_tasks_per_pe}};
  prog->metadata = std::move(meta);

  return prog;
}

}  // namespace spada
