// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/subgrid.hpp"

namespace spada {

enum class Parity { Even, Odd };

/// Stream-selection rule of the checkerboard decomposition. Sender and
/// receiver of one hop always agree: moving one step flips both the
/// coordinate parity and the direction bit.
inline Parity select_stream(int dx, int dy, int64_t i, int64_t j,
                            bool is_receive) {
  bool dim_x = std::abs(dx) > 0;
  int64_t c = dim_x ? i : j;
  int p = (int)(((c % 2) + 2) % 2);
  int sigma = (dx > 0 || dy > 0) ? 1 : 0;
  if (is_receive) sigma = 1 - sigma;
  return p == sigma ? Parity::Even : Parity::Odd;
}

namespace cb_detail {

inline ast::RangeExpr literal_range(int64_t lo, int64_t hi, int64_t step) {
  ast::RangeExpr r;
  r.lo = ast::Expr::make_int(lo);
  if (hi != lo + 1 || step != 1) {
    r.hi = ast::Expr::make_int(hi);
    if (step != 1) r.step = ast::Expr::make_int(step);
  }
  return r;
}

/// Restricts a concrete range to coordinates of the given parity.
inline std::optional<ConcreteRange> parity_slice(const ConcreteRange& r,
                                                 int parity) {
  if (r.count() == 0) return std::nullopt;
  if (r.step % 2 == 0) {
    int lo_par = (int)(((r.lo % 2) + 2) % 2);
    if (lo_par == parity) return r;
    return std::nullopt;
  }
  int64_t k0 = ((parity - r.lo) % 2 + 2) % 2;
  ConcreteRange out;
  out.lo = r.lo + k0 * r.step;
  out.hi = r.hi;
  out.step = 2 * r.step;
  if (out.count() == 0) return std::nullopt;
  return out;
}

template <typename F>
void walk_stmts_mut(std::vector<ast::StmtPtr>& list, F&& f) {
  for (auto& s : list) {
    f(*s);
    walk_stmts_mut(s->body, f);
    walk_stmts_mut(s->else_body, f);
  }
}

inline void rewrite_stream_refs(
    std::vector<ast::StmtPtr>& list,
    const std::map<std::string, std::pair<int, int>>& offsets, int px, int py) {
  auto variant_name = [&](const std::string& name, bool is_receive) {
    auto it = offsets.find(name);
    if (it == offsets.end()) return name;  // argument stream
    auto [dx, dy] = it->second;
    int64_t parity = std::abs(dx) > 0 ? px : py;
    Parity v = select_stream(dx, dy, parity, parity, is_receive);
    return name + (v == Parity::Even ? "_even" : "_odd");
  };
  walk_stmts_mut(list, [&](ast::Stmt& s) {
    bool is_recv = s.kind == ast::StmtKind::Receive ||
                   s.kind == ast::StmtKind::Foreach;
    bool is_send = s.kind == ast::StmtKind::Send;
    if (!is_recv && !is_send) return;
    if (s.stream.kind == ast::StreamRef::Kind::Arg) return;
    s.stream.name = variant_name(s.stream.name, is_recv);
    if (s.stream.kind == ast::StreamRef::Kind::RelCond)
      s.stream.alt = variant_name(s.stream.alt, is_recv);
  });
}

}  // namespace cb_detail

/// Reassigns site and block ids after a structural transform.
inline void renumber(ast::Kernel& k) {
  int site = 0, block = 0;
  auto walk = [&](auto&& self, std::vector<ast::StmtPtr>& list) -> void {
    for (auto& s : list) {
      s->site_id = site++;
      self(self, s->body);
      self(self, s->else_body);
    }
  };
  for (auto& item : k.items) {
    if (auto* ph = std::get_if<ast::Phase>(&item)) {
      for (auto& blk : ph->blocks) {
        if (auto* cb = std::get_if<ast::ComputeBlock>(&blk)) {
          cb->block_id = block++;
          walk(walk, cb->body);
        }
      }
    }
  }
  k.next_site_id = site;
  k.next_block_id = block;
}

/// Applies the checkerboard decomposition to one phase in place:
/// duplicates every stream into even/odd variants, splits compute blocks by
/// PE-coordinate parity along the active dimensions, and rewrites each
/// send/receive through select_stream. Parity is taken on absolute fabric
/// coordinates, so strided subgrids split correctly. Returns false (with
/// diagnostics) if the phase is not eligible. Run `renumber` on the kernel
/// afterwards.
inline bool checkerboard_phase(ast::Phase& phase, const ParamMap& params,
                               Diagnostics& diags) {
  std::map<std::string, std::pair<int, int>> offsets;
  bool ok = true;
  for (auto& blk : phase.blocks) {
    if (auto* db = std::get_if<ast::DataflowBlock>(&blk)) {
      for (const auto& s : db->streams) {
        offsets[s.name] = {s.dx, s.dy};
        if (std::abs(s.dx) + std::abs(s.dy) != 1) {
          diags.error("checkerboard.multi-hop", s.loc,
                      "stream '" + s.name +
                          "' is not single-hop; supply manual routing instead");
          ok = false;
        }
        if (s.routing && s.routing->channel) {
          diags.error(
              "checkerboard.manual-channel", s.loc,
              "stream '" + s.name +
                  "' has a manual channel; automatic and manual channel "
                  "assignment cannot be combined in one phase");
          ok = false;
        }
      }
    }
  }
  if (offsets.empty()) return true;  // no streams: identity
  if (!ok) return false;

  bool active_x = false, active_y = false;
  for (const auto& [name, off] : offsets) {
    if (off.first != 0) active_x = true;
    if (off.second != 0) active_y = true;
  }

  for (auto& blk : phase.blocks) {
    if (auto* db = std::get_if<ast::DataflowBlock>(&blk)) {
      std::vector<ast::StreamDecl> duplicated;
      for (const auto& s : db->streams) {
        for (const char* suffix : {"_even", "_odd"}) {
          ast::StreamDecl v = s;
          v.name = s.name + suffix;
          if (offsets.count(v.name)) {
            diags.error("checkerboard.name-collision", s.loc,
                        "stream name '" + v.name + "' already exists");
            return false;
          }
          duplicated.push_back(std::move(v));
        }
      }
      db->streams = std::move(duplicated);
    }
  }

  std::vector<ast::Block> new_blocks;
  for (auto& blk : phase.blocks) {
    auto* cb = std::get_if<ast::ComputeBlock>(&blk);
    if (!cb) {
      new_blocks.push_back(std::move(blk));
      continue;
    }
    Diagnostics scratch;
    auto cs = resolve_subgrid(cb->sg, params, scratch);
    if (!cs) {
      diags.append(scratch);
      return false;
    }
    std::vector<std::pair<int, std::optional<ConcreteRange>>> xs, ys;
    if (active_x)
      xs = {{0, cb_detail::parity_slice(cs->r[0], 0)},
            {1, cb_detail::parity_slice(cs->r[0], 1)}};
    else
      xs = {{0, cs->r[0]}};
    if (active_y)
      ys = {{0, cb_detail::parity_slice(cs->r[1], 0)},
            {1, cb_detail::parity_slice(cs->r[1], 1)}};
    else
      ys = {{0, cs->r[1]}};
    for (const auto& [px, xr] : xs) {
      if (!xr) continue;
      for (const auto& [py, yr] : ys) {
        if (!yr) continue;
        ast::ComputeBlock part = cb->clone();
        part.sg.ranges[0] = cb_detail::literal_range(xr->lo, xr->hi, xr->step);
        part.sg.ranges[1] = cb_detail::literal_range(yr->lo, yr->hi, yr->step);
        cb_detail::rewrite_stream_refs(part.body, offsets, px, py);
        new_blocks.emplace_back(std::move(part));
      }
    }
  }
  phase.blocks = std::move(new_blocks);
  return true;
}

}  // namespace spada
