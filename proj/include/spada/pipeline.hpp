// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spada/canonicalize.hpp"
#include "spada/channels.hpp"
#include "spada/checkerboard.hpp"
#include "spada/hb.hpp"
#include "spada/routing.hpp"
#include "spada/sema.hpp"
#include "spada/typecheck.hpp"

namespace spada {

struct AnalyzeOptions {
  bool auto_route = true;  // checkerboard + channel allocation where eligible
  // Downgrades statically detected races and channel conflicts to warnings so
  // the runtime detectors can be exercised. Structural errors still abort.
  bool allow_unsafe = false;
};

inline void downgrade_rules(Diagnostics& d,
                            std::initializer_list<const char*> rules) {
  for (auto& item : d.items())
    if (item.severity == Severity::Error)
      for (const char* r : rules)
        if (item.rule == r) item.severity = Severity::Warning;
}

/// The fully analyzed, routed form of a kernel under bound parameters.
struct AnalyzedKernel {
  ast::Kernel kernel;  // canonicalized, checkerboarded, channels applied
  KernelIndex ix;      // valid for `kernel`
  ParamMap params;
  SemaInfo sema;
  std::vector<RoutingGraph> routing;  // one per phase
  std::shared_ptr<HbGraph> hb;
  ChannelAssignment channels;
  std::vector<Conflict> conflicts;
  bool checkerboard_applied = false;

  RoutingGraph merged_routing() const {
    RoutingGraph all;
    for (const auto& rg : routing)
      for (const auto& p : rg.paths) all.paths.push_back(p);
    all.index();
    return all;
  }
};

inline std::unique_ptr<AnalyzedKernel> analyze_kernel(const ast::Kernel& input,
                                                      const ParamMap& params,
                                                      Diagnostics& diags,
                                                      AnalyzeOptions opts = {}) {
  auto out = std::make_unique<AnalyzedKernel>();
  out->kernel = input.clone();
  out->params = params;

  if (!canonicalize(out->kernel, diags)) return nullptr;
  if (!typecheck(out->kernel, diags)) return nullptr;
  out->ix = build_index(out->kernel);
  out->sema = analyze(out->kernel, out->ix, params, diags);
  if (opts.allow_unsafe) downgrade_rules(diags, {"sema.race"});
  if (diags.has_errors()) return nullptr;

  // routing assignment: checkerboard eligible phases, keep manual ones
  if (opts.auto_route) {
    int phase_idx = -1;
    bool transformed = false;
    for (auto& item : out->kernel.items) {
      auto* ph = std::get_if<ast::Phase>(&item);
      if (!ph) continue;
      ++phase_idx;
      int manual = 0, autos = 0;
      for (const auto& blk : ph->blocks)
        if (auto* db = std::get_if<ast::DataflowBlock>(&blk))
          for (const auto& sd : db->streams)
            (sd.routing && sd.routing->channel ? manual : autos)++;
      if (autos == 0) continue;  // fully manual (or no streams)
      if (manual > 0) {
        diags.error("checkerboard.manual-mixed", ph->loc,
                    "phase mixes manual and automatic channel assignment");
        return nullptr;
      }
      if (!checkerboard_phase(*ph, params, diags)) return nullptr;
      transformed = true;
    }
    if (transformed) {
      renumber(out->kernel);
      out->checkerboard_applied = true;
      out->ix = build_index(out->kernel);
      Diagnostics again;
      if (!typecheck(out->kernel, again)) {
        diags.append(again);
        return nullptr;
      }
      if (opts.allow_unsafe) downgrade_rules(again, {"sema.race"});
      out->sema = analyze(out->kernel, out->ix, params, again);
      if (opts.allow_unsafe) downgrade_rules(again, {"sema.race"});
      if (again.has_errors()) {
        diags.append(again);
        return nullptr;
      }
    }
  }

  auto build_all_routing = [&]() -> bool {
    out->routing.clear();
    for (const auto& pe : out->sema.phase_edges) {
      Diagnostics rd;
      out->routing.push_back(
          build_routing_graph(out->ix, pe.phase_index, pe.edges, rd));
      diags.append(rd);
      if (rd.has_errors()) return false;
    }
    return true;
  };
  if (!build_all_routing()) return nullptr;

  if (opts.auto_route) {
    auto ca = allocate_channels(out->kernel, out->ix, params, out->routing, diags);
    if (!ca) return nullptr;
    out->channels = std::move(*ca);
    apply_channels(out->kernel, out->channels);
    out->ix = build_index(out->kernel);
    if (!build_all_routing()) return nullptr;
  }

  out->hb = std::make_shared<HbGraph>(out->kernel, out->ix, params, out->sema);
  RoutingGraph merged = out->merged_routing();
  out->conflicts = check_conflicts(merged, out->sema.phase_edges, *out->hb);
  for (const auto& c : out->conflicts) {
    const auto& pa = merged.paths[c.path_a];
    const auto& pb = merged.paths[c.path_b];
    diags.error("routing.conflict", SourceLoc{},
                "streams '" + pa.stream + "' and '" + pb.stream +
                    "' share channel and PE (" + std::to_string(c.shared.x) +
                    ", " + std::to_string(c.shared.y) +
                    ") without an empties-before ordering");
  }
  if (opts.allow_unsafe) downgrade_rules(diags, {"routing.conflict"});
  if (diags.has_errors()) return nullptr;
  return out;
}

}  // namespace spada
