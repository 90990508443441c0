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

enum class OrderWhy { BlockingOp, AwaitedCompletion };

/// Per-site structural facts used by the order, race and edge analyses.
struct SiteInfo {
  const ast::Stmt* stmt = nullptr;
  int pre_order = 0;
  std::vector<int> enclosing_loops;  // innermost last (for/foreach/map sites)
  // if-guards on the path to this site: (condition, taken-branch)
  std::vector<std::pair<const ast::Expr*, bool>> guards;
};

/// The local order of one compute block: S1 ⪯ S2 with a justification.
/// Built directly from the definition, so `rel` holds the full relation
/// between distinct sites, not just a spanning set of edges.
struct LocalOrder {
  const ast::ComputeBlock* block = nullptr;
  std::map<int, SiteInfo> sites;               // site id -> info
  std::map<std::pair<int, int>, OrderWhy> rel;  // (s1,s2), s1 ⪯ s2

  bool ordered(int a, int b) const { return rel.count({a, b}) > 0; }

  /// True when every instance of `a` completes before the first instance of
  /// `b` may start: ordered and not iterating together in a common loop.
  bool strict(int a, int b) const {
    if (!ordered(a, b)) return false;
    const auto& la = sites.at(a).enclosing_loops;
    const auto& lb = sites.at(b).enclosing_loops;
    for (int l : la)
      for (int m : lb)
        if (l == m) return false;
    return true;
  }

  bool share_loop(int a, int b) const {
    const auto& la = sites.at(a).enclosing_loops;
    for (int l : la)
      for (int m : sites.at(b).enclosing_loops)
        if (l == m) return true;
    return false;
  }
};

namespace detail {

class OrderBuilder {
 public:
  explicit OrderBuilder(LocalOrder& out) : out_(out) {}

  // Returns the set of (site, why) known complete at the end of the list.
  using Frontier = std::map<int, OrderWhy>;

  Frontier walk_list(const std::vector<ast::StmtPtr>& list, Frontier frontier,
                     std::vector<int> loops,
                     std::vector<std::pair<const ast::Expr*, bool>> guards) {
    // completion name -> sites that become known-complete on its await
    for (const auto& sp : list) {
      const ast::Stmt& s = *sp;
      register_site(s, loops, guards);
      for (const auto& [f, why] : frontier) add(f, s.site_id, why);

      switch (s.kind) {
        case ast::StmtKind::Assign:
          frontier.emplace(s.site_id, OrderWhy::BlockingOp);
          break;
        case ast::StmtKind::For: {
          auto inner = walk_list(s.body, frontier, with(loops, s.site_id), guards);
          frontier = merge(frontier, inner);
          frontier.emplace(s.site_id, OrderWhy::BlockingOp);
          break;
        }
        case ast::StmtKind::If: {
          auto g1 = guards;
          g1.emplace_back(s.cond.get(), true);
          auto t = walk_list(s.body, frontier, loops, g1);
          auto g2 = guards;
          g2.emplace_back(s.cond.get(), false);
          auto e = walk_list(s.else_body, frontier, loops, g2);
          frontier = merge(merge(frontier, t), e);
          frontier.emplace(s.site_id, OrderWhy::BlockingOp);
          break;
        }
        case ast::StmtKind::Await: {
          auto it = pending_.find(s.await_name);
          if (it != pending_.end()) {
            for (int site : it->second)
              frontier.emplace(site, OrderWhy::AwaitedCompletion);
            pending_.erase(it);
          }
          break;
        }
        case ast::StmtKind::AwaitAll: {
          for (auto& [name, sites] : pending_)
            for (int site : sites)
              frontier.emplace(site, OrderWhy::AwaitedCompletion);
          pending_.clear();
          frontier.emplace(s.site_id, OrderWhy::BlockingOp);
          break;
        }
        case ast::StmtKind::Send:
        case ast::StmtKind::Receive:
        case ast::StmtKind::Foreach:
        case ast::StmtKind::Map:
        case ast::StmtKind::Async: {
          Frontier body_done;
          std::vector<int> body_loops =
              (s.kind == ast::StmtKind::Foreach || s.kind == ast::StmtKind::Map)
                  ? with(loops, s.site_id)
                  : loops;
          if (!s.body.empty())
            body_done = walk_list(s.body, frontier, body_loops, guards);
          if (s.awaited) {
            frontier = merge(frontier, body_done);
            frontier.emplace(s.site_id, OrderWhy::BlockingOp);
          } else if (!s.completion.empty()) {
            auto& sites = pending_[s.completion];
            sites.push_back(s.site_id);
            for (const auto& [f, why] : body_done)
              if (!frontier.count(f)) sites.push_back(f);
          }
          // bare async statements stay pending until the implicit awaitall
          break;
        }
      }
    }
    return frontier;
  }

 private:
  void register_site(const ast::Stmt& s, const std::vector<int>& loops,
                     const std::vector<std::pair<const ast::Expr*, bool>>& guards) {
    SiteInfo info;
    info.stmt = &s;
    info.pre_order = next_order_++;
    info.enclosing_loops = loops;
    info.guards = guards;
    out_.sites[s.site_id] = std::move(info);
  }

  void add(int a, int b, OrderWhy why) { out_.rel.emplace(std::pair{a, b}, why); }

  static std::vector<int> with(std::vector<int> v, int x) {
    v.push_back(x);
    return v;
  }

  static Frontier merge(Frontier a, const Frontier& b) {
    for (const auto& [k, v] : b) a.emplace(k, v);
    return a;
  }

  LocalOrder& out_;
  std::map<std::string, std::vector<int>> pending_;
  int next_order_ = 0;
};

}  // namespace detail

/// Builds the local execution order of a compute block per the blocking /
/// awaited-completion rules.
inline LocalOrder build_local_order(const ast::ComputeBlock& cb) {
  LocalOrder lo;
  lo.block = &cb;
  detail::OrderBuilder b(lo);
  b.walk_list(cb.body, {}, {}, {});
  return lo;
}

}  // namespace spada
