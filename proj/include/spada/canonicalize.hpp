// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/diag.hpp"

namespace spada {

namespace canon_detail {

inline const ast::PlaceDecl* find_decl_syntactic(const ast::Kernel& k,
                                                 int phase_idx,
                                                 const std::string& name) {
  int pidx = -1;
  const ast::PlaceDecl* found = nullptr;
  for (const auto& item : k.items) {
    if (auto* pb = std::get_if<ast::PlaceBlock>(&item)) {
      for (const auto& d : pb->decls)
        if (d.name == name) found = &d;
    } else {
      ++pidx;
      if (pidx != phase_idx) continue;
      for (const auto& blk : std::get<ast::Phase>(item).blocks)
        if (auto* pb2 = std::get_if<ast::PlaceBlock>(&blk))
          for (const auto& d : pb2->decls)
            if (d.name == name) return &d;
    }
  }
  return found;
}

inline void collect_names(const ast::Expr& e, std::set<std::string>& out) {
  ast::walk_exprs(e, [&](const ast::Expr& x) {
    if (!x.name.empty()) out.insert(x.name);
  });
}

/// Replaces whole-array variable references by indexed accesses.
inline void index_arrays(ast::Expr& e, const ast::Kernel& k, int phase_idx,
                         const std::string& iv) {
  if (e.kind == ast::Expr::Kind::Var) {
    const ast::PlaceDecl* d = find_decl_syntactic(k, phase_idx, e.name);
    if (d && d->shape.size() == 1) {
      e.kind = ast::Expr::Kind::Index;
      e.indices.push_back(ast::Expr::make_var(iv, e.loc));
    }
    return;
  }
  if (e.lhs) index_arrays(*e.lhs, k, phase_idx, iv);
  if (e.rhs) index_arrays(*e.rhs, k, phase_idx, iv);
  for (auto& ix : e.indices) index_arrays(*ix, k, phase_idx, iv);
}

}  // namespace canon_detail

/// Canonicalization: decomposes whole-array assignments into explicit `map`
/// blocks so that later stages only see element-level operations.
/// `a = a + b` with `f32[N] a, b` becomes `await map i32 _i in [0:N] {
/// a[_i] = a[_i] + b[_i] }`. Rank-2+ array operations are rejected.
inline bool canonicalize(ast::Kernel& k, Diagnostics& diags) {
  bool ok = true;
  int phase_idx = -1;
  int next_site = k.next_site_id;
  for (auto& item : k.items) {
    auto* ph = std::get_if<ast::Phase>(&item);
    if (!ph) continue;
    ++phase_idx;
    for (auto& blk : ph->blocks) {
      auto* cb = std::get_if<ast::ComputeBlock>(&blk);
      if (!cb) continue;
      auto rewrite = [&](auto&& self, std::vector<ast::StmtPtr>& list) -> void {
        for (auto& sp : list) {
          self(self, sp->body);
          self(self, sp->else_body);
          if (sp->kind != ast::StmtKind::Assign) continue;
          if (sp->lhs->kind != ast::Expr::Kind::Var) continue;
          const ast::PlaceDecl* d = canon_detail::find_decl_syntactic(
              k, phase_idx, sp->lhs->name);
          if (!d || d->shape.empty()) continue;
          if (d->shape.size() > 1) {
            diags.error("canon.array-op-rank", sp->loc,
                        "whole-array operations are supported for "
                        "one-dimensional arrays only");
            ok = false;
            continue;
          }
          std::set<std::string> used;
          canon_detail::collect_names(*sp->rhs, used);
          used.insert(sp->lhs->name);
          std::string iv = "_i";
          while (used.count(iv)) iv += "i";

          auto map_stmt = std::make_unique<ast::Stmt>();
          map_stmt->kind = ast::StmtKind::Map;
          map_stmt->loc = sp->loc;
          map_stmt->site_id = next_site++;
          map_stmt->awaited = true;  // assignments are blocking
          map_stmt->iter_type = ElemType::I32;
          map_stmt->iter_var = iv;
          ast::RangeExpr r;
          r.lo = ast::Expr::make_int(0, sp->loc);
          r.hi = d->shape[0]->clone();
          map_stmt->range = std::move(r);

          auto body = std::make_unique<ast::Stmt>();
          body->kind = ast::StmtKind::Assign;
          body->loc = sp->loc;
          body->site_id = sp->site_id;
          body->lhs = sp->lhs->clone();
          body->lhs->kind = ast::Expr::Kind::Index;
          body->lhs->indices.push_back(ast::Expr::make_var(iv, sp->loc));
          body->rhs = sp->rhs->clone();
          canon_detail::index_arrays(*body->rhs, k, phase_idx, iv);
          map_stmt->body.push_back(std::move(body));
          sp = std::move(map_stmt);
        }
      };
      rewrite(rewrite, cb->body);
    }
  }
  k.next_site_id = next_site;
  return ok;
}

}  // namespace spada
