// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "spada/routing.hpp"
#include "spada/sema.hpp"
#include "spada/subgrid.hpp"
#include "spada/typecheck.hpp"

namespace spada {

struct StreamChannel {
  int phase = 0;
  std::string stream;
  int64_t channel = -1;
  bool manual = false;
};

struct ChannelAssignment {
  std::vector<StreamChannel> streams;   // deterministic order
  std::map<std::pair<int, std::string>, int64_t> by_stream;
  int64_t channels_used = 0;            // distinct channel ids
  std::map<PECoord, int> per_pe_peak;   // max concurrent channels at a PE

  int64_t channel_of(int phase, const std::string& stream) const {
    auto it = by_stream.find({phase, stream});
    return it == by_stream.end() ? -1 : it->second;
  }
};

/// Greedy conflict-graph coloring over all declared relative streams.
/// Two streams conflict when their PE footprints (declaring subgrid plus
/// routed-path PEs) intersect; reuse happens across disjoint PE sets.
/// Manual channels are respected. Fails with ChannelBudgetExceeded when any
/// PE would hold more than ChannelBudget::usable concurrent channels in one
/// phase.
inline std::optional<ChannelAssignment> allocate_channels(
    const ast::Kernel&, const KernelIndex& ix, const ParamMap& params,
    const std::vector<RoutingGraph>& routing, Diagnostics& diags) {
  struct Item {
    int phase;
    std::string name;
    const ast::StreamDecl* decl;
    std::set<PECoord> footprint;
    int64_t channel = -1;
    bool manual = false;
  };
  std::vector<Item> items;

  for (const auto& pi : ix.phases) {
    for (const auto& blk : pi.phase->blocks) {
      auto* db = std::get_if<ast::DataflowBlock>(&blk);
      if (!db) continue;
      Diagnostics scratch;
      auto cs = resolve_subgrid(db->sg, params, scratch);
      for (const auto& sd : db->streams) {
        Item it;
        it.phase = pi.index;
        it.name = sd.name;
        it.decl = &sd;
        if (cs)
          for (PECoord p : cs->enumerate()) it.footprint.insert(p);
        if (sd.routing && sd.routing->channel) {
          it.channel = *sd.routing->channel;
          it.manual = true;
        }
        items.push_back(std::move(it));
      }
    }
  }
  // paths extend a stream's footprint beyond the declaring subgrid
  for (const auto& rg : routing) {
    for (const auto& rp : rg.paths) {
      for (auto& it : items)
        if (it.phase == rp.phase && it.name == rp.stream)
          for (PECoord p : rp.nodes) it.footprint.insert(p);
    }
  }

  auto intersects = [](const std::set<PECoord>& a, const std::set<PECoord>& b) {
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& big = a.size() <= b.size() ? b : a;
    for (PECoord p : small)
      if (big.count(p)) return true;
    return false;
  };

  int n = (int)items.size();
  std::vector<std::vector<int>> conflict(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (intersects(items[i].footprint, items[j].footprint)) {
        conflict[i].push_back(j);
        conflict[j].push_back(i);
      }

  // descending conflict degree, stable on (phase, name)
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (conflict[a].size() != conflict[b].size())
      return conflict[a].size() > conflict[b].size();
    return std::pair{items[a].phase, items[a].name} <
           std::pair{items[b].phase, items[b].name};
  });

  for (int idx : order) {
    Item& it = items[idx];
    if (it.manual) continue;
    std::set<int64_t> used;
    for (int nb : conflict[idx])
      if (items[nb].channel >= 0) used.insert(items[nb].channel);
    int64_t c = 0;
    while (used.count(c)) ++c;
    it.channel = c;
  }

  ChannelAssignment out;
  std::set<int64_t> distinct;
  for (const auto& it : items) {
    out.streams.push_back({it.phase, it.name, it.channel, it.manual});
    out.by_stream[{it.phase, it.name}] = it.channel;
    distinct.insert(it.channel);
  }
  out.channels_used = (int64_t)distinct.size();

  // per-PE budget, per phase
  std::map<std::pair<int, PECoord>, std::set<int64_t>> pe_channels;
  for (const auto& it : items)
    for (PECoord p : it.footprint)
      pe_channels[{it.phase, p}].insert(it.channel);
  for (const auto& [key, chans] : pe_channels) {
    auto& peak = out.per_pe_peak[key.second];
    peak = std::max(peak, (int)chans.size());
    if ((int)chans.size() > ChannelBudget::usable) {
      diags.error("routing.channel-budget", SourceLoc{},
                  "PE (" + std::to_string(key.second.x) + ", " +
                      std::to_string(key.second.y) + ") needs " +
                      std::to_string(chans.size()) + " channels in phase " +
                      std::to_string(key.first) + " but only " +
                      std::to_string(ChannelBudget::usable) + " are usable");
      return std::nullopt;
    }
  }
  return out;
}

/// Writes the assignment back into the kernel's stream declarations so the
/// loader and emitters see concrete channels.
inline void apply_channels(ast::Kernel& k, const ChannelAssignment& ca) {
  int phase_idx = -1;
  for (auto& item : k.items) {
    auto* ph = std::get_if<ast::Phase>(&item);
    if (!ph) continue;
    ++phase_idx;
    for (auto& blk : ph->blocks) {
      auto* db = std::get_if<ast::DataflowBlock>(&blk);
      if (!db) continue;
      for (auto& sd : db->streams) {
        int64_t c = ca.channel_of(phase_idx, sd.name);
        if (c < 0) continue;
        if (!sd.routing) sd.routing = ast::RoutingDecl{};
        sd.routing->channel = c;
      }
    }
  }
}

}  // namespace spada
