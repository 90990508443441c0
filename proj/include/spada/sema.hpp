// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/diag.hpp"
#include "spada/order.hpp"
#include "spada/subgrid.hpp"
#include "spada/typecheck.hpp"

namespace spada {

/// One deterministic point-to-point communication instance.
struct StreamEdge {
  int send_site = -1;
  int recv_site = -1;
  PECoord src, dst;
  std::string stream;
  int ordinal = 0;    // per (stream, src PE) send sequence
  int64_t count = 1;  // elements carried
  int phase = 0;
};

struct PhaseEdges {
  int phase_index = 0;
  std::vector<StreamEdge> edges;
};

/// Side table built once per analyzed kernel and shared by the later stages.
struct SemaInfo {
  std::map<int, LocalOrder> orders;  // block_id -> local order
  std::vector<PhaseEdges> phase_edges;

  const LocalOrder& order_of(const ast::ComputeBlock& cb) const {
    return orders.at(cb.block_id);
  }
};

namespace detail {

inline std::optional<int64_t> try_eval(const ast::Expr& e, const ParamMap& env) {
  Diagnostics scratch;
  return eval_const_int(e, env, scratch);
}

/// Variables appearing in an expression.
inline void expr_vars(const ast::Expr& e, std::set<std::string>& out) {
  ast::walk_exprs(e, [&](const ast::Expr& x) {
    if (x.kind == ast::Expr::Kind::Var) out.insert(x.name);
    if (x.kind == ast::Expr::Kind::Index) out.insert(x.name);
  });
}

inline bool stmt_tree_has_comm(const ast::Stmt& s) {
  if (s.kind == ast::StmtKind::Send || s.kind == ast::StmtKind::Receive ||
      s.kind == ast::StmtKind::Foreach)
    return true;
  for (const auto& b : s.body)
    if (stmt_tree_has_comm(*b)) return true;
  for (const auto& b : s.else_body)
    if (stmt_tree_has_comm(*b)) return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stream discipline
// ---------------------------------------------------------------------------

class DisciplineChecker {
 public:
  DisciplineChecker(const ast::Kernel& k, const KernelIndex& ix,
                    Diagnostics& diags)
      : k_(k), ix_(ix), diags_(diags) {}

  void run(SemaInfo& info) {
    for (const auto& pi : ix_.phases) {
      for (auto* cb : pi.computes) {
        auto [it, fresh] = info.orders.emplace(cb->block_id, LocalOrder{});
        if (fresh) it->second = build_local_order(*cb);
        check_block(pi, *cb, it->second);
      }
      check_matching_shape(pi, info);
    }
  }

 private:
  static void streams_of(const ast::StreamRef& sr, std::set<std::string>& out) {
    if (sr.kind == ast::StreamRef::Kind::Arg) return;
    out.insert(sr.name);
    if (sr.kind == ast::StreamRef::Kind::RelCond) out.insert(sr.alt);
  }

  void check_block(const PhaseIndex& pi, const ast::ComputeBlock& cb,
                   const LocalOrder& lo) {
    // (a) same-stream sends must be in local order
    std::map<std::string, std::vector<int>> sends, recvs;
    for (const auto& [site, info] : lo.sites) {
      const ast::Stmt& s = *info.stmt;
      std::set<std::string> names;
      if (s.kind == ast::StmtKind::Send) {
        streams_of(s.stream, names);
        for (const auto& n : names) sends[n].push_back(site);
      } else if (s.kind == ast::StmtKind::Receive ||
                 s.kind == ast::StmtKind::Foreach) {
        streams_of(s.stream, names);
        for (const auto& n : names) recvs[n].push_back(site);
      }
    }
    for (const auto& [stream, sites] : sends) {
      if (!pi.streams.count(stream)) continue;  // arg streams are exempt
      for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j) {
          int a = sites[i], b = sites[j];
          if (guard_disjoint(lo, a, b)) continue;
          if (!lo.ordered(a, b) && !lo.ordered(b, a))
            diags_.error("sema.unordered-sends", lo.sites.at(b).stmt->loc,
                         "two sends to stream '" + stream +
                             "' are not ordered by the local order");
        }
    }
    // unordered receives on one stream would match arrivals
    // nondeterministically, so they need local order as well
    for (const auto& [stream, sites] : recvs) {
      if (!pi.streams.count(stream)) continue;
      for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j) {
          int a = sites[i], b = sites[j];
          if (guard_disjoint(lo, a, b)) continue;
          if (!lo.ordered(a, b) && !lo.ordered(b, a))
            diags_.error("sema.unordered-receives", lo.sites.at(b).stmt->loc,
                         "two receives from stream '" + stream +
                             "' are not ordered by the local order");
        }
    }

    // (b) asynchronous statements inside loops must be awaited inside the loop
    check_loop_awaits(cb.body);

    // (c) no send/receive on the same stream in both branches of an if-else
    ast::walk_stmts(cb.body, [&](const ast::Stmt& s) {
      if (s.kind != ast::StmtKind::If || !s.has_else) return;
      std::set<std::string> a, b;
      collect_branch_streams(s.body, a);
      collect_branch_streams(s.else_body, b);
      for (const auto& n : a)
        if (b.count(n) && pi.streams.count(n))
          diags_.error("sema.if-else-stream", s.loc,
                       "stream '" + n +
                           "' is used in both branches of an if-else");
    });

    // communication guards and stream-selection conditions must be uniform
    for (const auto& [site, info] : lo.sites) {
      const ast::Stmt& s = *info.stmt;
      bool comm = s.kind == ast::StmtKind::Send ||
                  s.kind == ast::StmtKind::Receive ||
                  s.kind == ast::StmtKind::Foreach;
      if (!comm) continue;
      if (s.stream.kind == ast::StreamRef::Kind::RelCond)
        require_uniform(*s.stream.cond, cb,
                        "stream selection condition");
      for (const auto& [g, taken] : info.guards)
        require_uniform(*g, cb, "condition guarding communication");
    }
  }

  bool guard_disjoint(const LocalOrder& lo, int a, int b) const {
    const auto& ga = lo.sites.at(a).guards;
    const auto& gb = lo.sites.at(b).guards;
    for (const auto& [ca, ta] : ga)
      for (const auto& [cbond, tb] : gb)
        if (ca == cbond && ta != tb) return true;
    return false;
  }

  void require_uniform(const ast::Expr& e, const ast::ComputeBlock& cb,
                       const std::string& what) {
    std::set<std::string> vars;
    detail::expr_vars(e, vars);
    std::set<std::string> allowed;
    for (const auto& p : k_.params) allowed.insert(p);
    allowed.insert(cb.sg.dims[0].name);
    allowed.insert(cb.sg.dims[1].name);
    for (const auto& v : vars)
      if (!allowed.count(v))
        diags_.error("sema.nonuniform-comm-guard", e.loc,
                     what + " may depend only on PE coordinates and kernel "
                            "parameters (found '" + v + "')");
  }

  void collect_branch_streams(const std::vector<ast::StmtPtr>& list,
                              std::set<std::string>& out) {
    ast::walk_stmts(list, [&](const ast::Stmt& s) {
      if (s.kind == ast::StmtKind::Send || s.kind == ast::StmtKind::Receive ||
          s.kind == ast::StmtKind::Foreach)
        streams_of(s.stream, out);
    });
  }

  // Every async statement nested in a loop body must be awaited inside that
  // loop body: await-prefixed, or completion-bound with the await in the body.
  void check_loop_awaits(const std::vector<ast::StmtPtr>& list) {
    for (const auto& sp : list) {
      const ast::Stmt& s = *sp;
      if (s.kind == ast::StmtKind::For || s.kind == ast::StmtKind::Foreach)
        check_loop_body(s.body);
      for (const auto& b : s.body) check_nested_loops(*b);
      for (const auto& b : s.else_body) check_nested_loops(*b);
    }
  }

  void check_nested_loops(const ast::Stmt& s) {
    if (s.kind == ast::StmtKind::For || s.kind == ast::StmtKind::Foreach)
      check_loop_body(s.body);
    for (const auto& b : s.body) check_nested_loops(*b);
    for (const auto& b : s.else_body) check_nested_loops(*b);
  }

  void check_loop_body(const std::vector<ast::StmtPtr>& body) {
    std::set<std::string> awaited;
    ast::walk_stmts(body, [&](const ast::Stmt& s) {
      if (s.kind == ast::StmtKind::Await) awaited.insert(s.await_name);
      if (s.kind == ast::StmtKind::AwaitAll) awaited.insert("*");
    });
    ast::walk_stmts(body, [&](const ast::Stmt& s) {
      if (!ast::is_async_kind(s.kind)) return;
      if (s.awaited) return;
      if (!s.completion.empty() &&
          (awaited.count(s.completion) || awaited.count("*")))
        return;
      diags_.error("sema.async-in-loop", s.loc,
                   "asynchronous statement inside a loop must be awaited "
                   "inside the loop");
    });
  }

  // (d) a send nested in a loop or conditional requires exactly one matching
  // receive site on every receiving block for that stream.
  void check_matching_shape(const PhaseIndex& pi, SemaInfo& info) {
    std::map<std::string, bool> send_nested;
    std::map<std::string, std::vector<std::pair<const ast::ComputeBlock*, int>>>
        recv_count;
    for (auto* cb : pi.computes) {
      const auto& lo = info.orders.at(cb->block_id);
      std::map<std::string, int> block_recvs;
      for (const auto& [site, si] : lo.sites) {
        const ast::Stmt& s = *si.stmt;
        std::set<std::string> names;
        if (s.kind == ast::StmtKind::Send) {
          streams_of(s.stream, names);
          bool nested = !si.enclosing_loops.empty() || !si.guards.empty();
          for (const auto& n : names)
            send_nested[n] = send_nested[n] || nested;
        } else if (s.kind == ast::StmtKind::Receive ||
                   s.kind == ast::StmtKind::Foreach) {
          streams_of(s.stream, names);
          for (const auto& n : names) block_recvs[n]++;
        }
      }
      for (const auto& [n, c] : block_recvs)
        recv_count[n].push_back({cb, c});
    }
    for (const auto& [stream, nested] : send_nested) {
      if (!nested || !pi.streams.count(stream)) continue;
      for (const auto& [cb, c] : recv_count[stream]) {
        if (c != 1)
          diags_.error(
              "sema.recv-shape", cb->loc,
              "stream '" + stream +
                  "' has a send nested in a loop or conditional; each "
                  "receiving block must contain exactly one receive for it");
      }
    }
  }

  const ast::Kernel& k_;
  const KernelIndex& ix_;
  Diagnostics& diags_;
};

// ---------------------------------------------------------------------------
// Stream edge derivation
// ---------------------------------------------------------------------------

class EdgeDeriver {
 public:
  EdgeDeriver(const ast::Kernel& k, const KernelIndex& ix,
              const ParamMap& params, Diagnostics& diags)
      : k_(k), ix_(ix), params_(params), diags_(diags) {}

  void run(SemaInfo& info) {
    for (const auto& pi : ix_.phases) {
      PhaseEdges pe;
      pe.phase_index = pi.index;
      derive_phase(pi, info, pe);
      info.phase_edges.push_back(std::move(pe));
    }
  }

 private:
  struct SiteUse {
    int site;
    int pre_order;
    int block_order;
    bool is_send;
    bool flexible;  // foreach without range: consumes whatever arrives
    int64_t count;
  };

  void derive_phase(const PhaseIndex& pi, SemaInfo& info, PhaseEdges& out) {
    // (stream, pe) -> ordered send/recv uses
    std::map<std::pair<std::string, PECoord>, std::vector<SiteUse>> send_seq,
        recv_seq;

    int block_order = 0;
    for (auto* cb : pi.computes) {
      const auto& lo = info.orders.at(cb->block_id);
      Diagnostics scratch;
      auto cs = resolve_subgrid(cb->sg, params_, scratch);
      if (!cs) {
        diags_.append(scratch);
        continue;
      }
      for (PECoord p : cs->enumerate()) {
        ParamMap env = params_;
        env[cb->sg.dims[0].name] = p.x;
        env[cb->sg.dims[1].name] = p.y;
        // sites in pre-order
        std::vector<const SiteInfo*> ordered;
        for (const auto& [site, si] : lo.sites) ordered.push_back(&si);
        std::sort(ordered.begin(), ordered.end(),
                  [](auto* a, auto* b) { return a->pre_order < b->pre_order; });
        for (const SiteInfo* si : ordered) {
          const ast::Stmt& s = *si->stmt;
          bool is_send = s.kind == ast::StmtKind::Send;
          bool is_recv = s.kind == ast::StmtKind::Receive ||
                         s.kind == ast::StmtKind::Foreach;
          if (!is_send && !is_recv) continue;
          if (s.stream.kind == ast::StreamRef::Kind::Arg) continue;
          if (!active_at(*si, env)) continue;
          std::string stream = resolve_stream(s.stream, env);
          if (stream.empty()) continue;
          if (!pi.streams.count(stream)) continue;  // typecheck reported
          SiteUse use;
          use.site = s.site_id;
          use.pre_order = si->pre_order;
          use.block_order = block_order;
          use.is_send = is_send;
          use.flexible = s.kind == ast::StmtKind::Foreach && !s.range;
          use.count = use.flexible ? 0 : site_count(s, *si, env, lo);
          if (use.count < 0) continue;  // reported
          if (!use.flexible && use.count == 0) continue;  // zero-trip
          auto& seq = is_send ? send_seq : recv_seq;
          seq[{stream, p}].push_back(use);
        }
      }
      ++block_order;
    }

    // match per stream and sender PE
    for (auto& [key, sends] : send_seq) {
      const auto& [stream, src] = key;
      const ast::StreamDecl* sd = pi.streams.at(stream);
      PECoord dst{src.x + sd->dx, src.y + sd->dy};
      auto rit = recv_seq.find({stream, dst});
      if (rit == recv_seq.end()) {
        diags_.error("sema.dangling-send", sd->loc,
                     "send on stream '" + stream + "' from PE (" +
                         std::to_string(src.x) + ", " + std::to_string(src.y) +
                         ") has no receiver at (" + std::to_string(dst.x) +
                         ", " + std::to_string(dst.y) + ")");
        continue;
      }
      match_sequences(stream, src, dst, sends, rit->second, pi.index, out);
    }
    // any receive with no sender at dst - offset is dangling
    for (auto& [key, recvs] : recv_seq) {
      const auto& [stream, dst] = key;
      const ast::StreamDecl* sd = pi.streams.at(stream);
      PECoord src{dst.x - sd->dx, dst.y - sd->dy};
      if (!send_seq.count({stream, src})) {
        diags_.error("sema.dangling-receive", sd->loc,
                     "receive on stream '" + stream + "' at PE (" +
                         std::to_string(dst.x) + ", " + std::to_string(dst.y) +
                         ") has no sender at (" + std::to_string(src.x) + ", " +
                         std::to_string(src.y) + ")");
    }
    }
  }

  void match_sequences(const std::string& stream, PECoord src, PECoord dst,
                       std::vector<SiteUse>& sends, std::vector<SiteUse>& recvs,
                       int phase, PhaseEdges& out) {
    auto by_order = [](const SiteUse& a, const SiteUse& b) {
      return std::pair{a.block_order, a.pre_order} <
             std::pair{b.block_order, b.pre_order};
    };
    std::sort(sends.begin(), sends.end(), by_order);
    std::sort(recvs.begin(), recvs.end(), by_order);

    std::size_t ri = 0;
    int64_t recv_left = recvs.empty() ? 0 : recvs[0].count;
    int ordinal = 0;
    for (const auto& s : sends) {
      int64_t send_left = s.count;
      while (send_left > 0) {
        if (ri >= recvs.size()) {
          diags_.error("sema.count-mismatch", SourceLoc{},
                       "stream '" + stream + "': sender (" +
                           std::to_string(src.x) + ", " + std::to_string(src.y) +
                           ") sends more elements than the receiver consumes");
          return;
        }
        const auto& r = recvs[ri];
        int64_t take = r.flexible ? send_left : std::min(send_left, recv_left);
        StreamEdge e;
        e.send_site = s.site;
        e.recv_site = r.site;
        e.src = src;
        e.dst = dst;
        e.stream = stream;
        e.ordinal = ordinal++;
        e.count = take;
        e.phase = phase;
        out.edges.push_back(e);
        send_left -= take;
        if (!r.flexible) {
          recv_left -= take;
          if (recv_left == 0) {
            ++ri;
            recv_left = ri < recvs.size() ? recvs[ri].count : 0;
          }
        }
      }
    }
    if (ri < recvs.size() && !recvs[ri].flexible &&
        (recv_left > 0 || ri + 1 < recvs.size())) {
      diags_.error("sema.count-mismatch", SourceLoc{},
                   "stream '" + stream + "': receiver (" +
                       std::to_string(dst.x) + ", " + std::to_string(dst.y) +
                       ") expects more elements than are sent");
    }
  }

  bool active_at(const SiteInfo& si, const ParamMap& env) {
    for (const auto& [cond, taken] : si.guards) {
      auto v = detail::try_eval(*cond, env);
      if (!v) return true;  // nonuniform guard already diagnosed
      if ((*v != 0) != taken) return false;
    }
    return true;
  }

  std::string resolve_stream(const ast::StreamRef& sr, const ParamMap& env) {
    switch (sr.kind) {
      case ast::StreamRef::Kind::Rel: return sr.name;
      case ast::StreamRef::Kind::RelCond: {
        auto v = detail::try_eval(*sr.cond, env);
        if (!v) return sr.name;  // nonuniform already diagnosed
        return *v != 0 ? sr.name : sr.alt;
      }
      case ast::StreamRef::Kind::Arg: return "";
    }
    return "";
  }

  /// Elements transferred by one site over the whole block execution:
  /// operand element count times enclosing trip counts.
  int64_t site_count(const ast::Stmt& s, const SiteInfo& si, const ParamMap& env,
                     const LocalOrder& lo) {
    int64_t elems = 1;
    if (s.kind == ast::StmtKind::Foreach) {
      Diagnostics scratch;
      auto r = resolve_range(*s.range, env, scratch);
      if (!r) {
        diags_.error("sema.dynamic-count", s.loc,
                     "cannot determine the foreach element count");
        return -1;
      }
      elems = r->count();
    } else if (s.value && s.value->kind == ast::Expr::Kind::Var) {
      // whole-array operand
      elems = array_len(s.value->name, env);
      if (elems < 0) {
        diags_.error("sema.dynamic-count", s.loc,
                     "cannot determine the array extent of '" +
                         s.value->name + "'");
        return -1;
      }
    }
    for (int loop_site : si.enclosing_loops) {
      const ast::Stmt& l = *lo.sites.at(loop_site).stmt;
      if (l.kind == ast::StmtKind::Foreach && !l.range) {
        diags_.error("sema.dynamic-count", s.loc,
                     "communication inside a foreach without an element range "
                     "has no static count");
        return -1;
      }
      Diagnostics scratch;
      auto r = resolve_range(*l.range, env, scratch);
      if (!r) {
        diags_.error("sema.dynamic-count", l.loc,
                     "cannot determine the loop trip count");
        return -1;
      }
      elems *= r->count();
    }
    return elems;
  }

  int64_t array_len(const std::string& name, const ParamMap& env) {
    // look through all place decls (names are unique per scope)
    const ast::PlaceDecl* found = nullptr;
    for (const auto& item : k_.items) {
      if (auto* pb = std::get_if<ast::PlaceBlock>(&item))
        for (const auto& d : pb->decls)
          if (d.name == name) found = &d;
      if (auto* ph = std::get_if<ast::Phase>(&item))
        for (const auto& blk : ph->blocks)
          if (auto* pb = std::get_if<ast::PlaceBlock>(&blk))
            for (const auto& d : pb->decls)
              if (d.name == name) found = &d;
    }
    if (!found) return 1;  // scalar or loop var
    if (found->shape.empty()) return 1;
    int64_t n = 1;
    for (const auto& dim : found->shape) {
      auto v = detail::try_eval(*dim, env);
      if (!v) return -1;
      n *= *v;
    }
    return n;
  }

  const ast::Kernel& k_;
  const KernelIndex& ix_;
  ParamMap params_;
  Diagnostics& diags_;
};

// ---------------------------------------------------------------------------
// Race analysis
// ---------------------------------------------------------------------------

struct IndexInterval {
  bool top = true;
  int64_t lo = 0, hi = 0;  // inclusive
  static IndexInterval exact(int64_t v) { return {false, v, v}; }
  static IndexInterval range(int64_t l, int64_t h) { return {false, l, h}; }
  bool overlaps(const IndexInterval& o) const {
    if (top || o.top) return true;
    return lo <= o.hi && o.lo <= hi;
  }
};

class RaceChecker {
 public:
  RaceChecker(const ast::Kernel& k, const KernelIndex& ix,
              const ParamMap& params, Diagnostics& diags)
      : k_(k), ix_(ix), params_(params), diags_(diags) {}

  void run(SemaInfo& info) {
    for (const auto& pi : ix_.phases)
      for (auto* cb : pi.computes) check_block(*cb, info.orders.at(cb->block_id));
  }

 private:
  struct Access {
    int site;
    std::string array;
    bool write;
    std::vector<IndexInterval> idx;  // empty = whole array
  };

  void check_block(const ast::ComputeBlock& cb, const LocalOrder& lo) {
    // coordinate variables range over the block subgrid
    std::map<std::string, IndexInterval> ivars;
    Diagnostics scratch;
    auto cs = resolve_subgrid(cb.sg, params_, scratch);
    if (cs) {
      ivars[cb.sg.dims[0].name] =
          IndexInterval::range(cs->r[0].lo, std::max(cs->r[0].lo, cs->r[0].hi - 1));
      ivars[cb.sg.dims[1].name] =
          IndexInterval::range(cs->r[1].lo, std::max(cs->r[1].lo, cs->r[1].hi - 1));
    }

    std::vector<Access> accesses;
    std::vector<const SiteInfo*> ordered;
    for (const auto& [site, si] : lo.sites) ordered.push_back(&si);
    std::sort(ordered.begin(), ordered.end(),
              [](auto* a, auto* b) { return a->pre_order < b->pre_order; });
    for (const SiteInfo* si : ordered) {
      auto vars = ivars;
      for (int loop_site : si->enclosing_loops)
        bind_loop_var(*lo.sites.at(loop_site).stmt, vars);
      collect_accesses(*si->stmt, vars, accesses);
    }

    for (std::size_t i = 0; i < accesses.size(); ++i) {
      for (std::size_t j = i + 1; j < accesses.size(); ++j) {
        const Access& a = accesses[i];
        const Access& b = accesses[j];
        if (a.site == b.site) continue;
        if (a.array != b.array) continue;
        if (!a.write && !b.write) continue;
        if (!regions_overlap(a, b)) continue;
        if (lo.ordered(a.site, b.site) || lo.ordered(b.site, a.site)) continue;
        if (guard_disjoint(lo, a.site, b.site)) continue;
        diags_.error("sema.race", lo.sites.at(b.site).stmt->loc,
                     "data race on '" + a.array + "': " +
                         (a.write ? "write" : "read") + " at one site and " +
                         (b.write ? "write" : "read") +
                         " at another are not ordered");
      }
    }
  }

  bool guard_disjoint(const LocalOrder& lo, int a, int b) const {
    const auto& ga = lo.sites.at(a).guards;
    const auto& gb = lo.sites.at(b).guards;
    for (const auto& [ca, ta] : ga)
      for (const auto& [cbp, tb] : gb)
        if (ca == cbp && ta != tb) return true;
    return false;
  }

  void bind_loop_var(const ast::Stmt& loop,
                     std::map<std::string, IndexInterval>& vars) {
    if (!loop.iter_var.empty() && loop.range) {
      auto lo = eval_interval(*loop.range->lo, vars);
      IndexInterval hi = loop.range->hi ? eval_interval(*loop.range->hi, vars)
                                        : lo;
      if (!lo.top && !hi.top)
        vars[loop.iter_var] = IndexInterval::range(lo.lo, std::max(lo.lo, hi.hi - 1));
      else
        vars[loop.iter_var] = IndexInterval{};
    }
    if (!loop.elem_var.empty()) vars[loop.elem_var] = IndexInterval{};
  }

  static bool regions_overlap(const Access& a, const Access& b) {
    if (a.idx.empty() || b.idx.empty()) return true;  // whole array involved
    for (std::size_t d = 0; d < a.idx.size() && d < b.idx.size(); ++d)
      if (!a.idx[d].overlaps(b.idx[d])) return false;
    return true;
  }

  void collect_accesses(const ast::Stmt& s,
                        const std::map<std::string, IndexInterval>& vars,
                        std::vector<Access>& out) {
    switch (s.kind) {
      case ast::StmtKind::Assign:
        add_lvalue(s, *s.lhs, true, vars, out);
        add_reads(s, *s.rhs, vars, out);
        // index expressions of the written element are reads too
        for (const auto& ix : s.lhs->indices) add_reads(s, *ix, vars, out);
        break;
      case ast::StmtKind::Send:
        add_reads_of_operand(s, *s.value, vars, out);
        break;
      case ast::StmtKind::Receive:
        add_lvalue(s, *s.value, true, vars, out);
        break;
      case ast::StmtKind::If:
        add_reads(s, *s.cond, vars, out);
        break;
      default:
        break;
    }
  }

  void add_lvalue(const ast::Stmt& s, const ast::Expr& lv, bool write,
                  const std::map<std::string, IndexInterval>& vars,
                  std::vector<Access>& out) {
    if (lv.kind == ast::Expr::Kind::Var) {
      if (!is_array_or_scalar_decl(lv.name)) return;
      out.push_back({s.site_id, lv.name, write, {}});
    } else if (lv.kind == ast::Expr::Kind::Index) {
      Access a;
      a.site = s.site_id;
      a.array = lv.name;
      a.write = write;
      for (const auto& ix : lv.indices) a.idx.push_back(eval_interval(*ix, vars));
      out.push_back(std::move(a));
    }
  }

  void add_reads_of_operand(const ast::Stmt& s, const ast::Expr& e,
                            const std::map<std::string, IndexInterval>& vars,
                            std::vector<Access>& out) {
    // a send's operand is read for the duration of the send
    if (e.kind == ast::Expr::Kind::Var && is_array_or_scalar_decl(e.name)) {
      out.push_back({s.site_id, e.name, false, {}});
      return;
    }
    add_reads(s, e, vars, out);
  }

  void add_reads(const ast::Stmt& s, const ast::Expr& e,
                 const std::map<std::string, IndexInterval>& vars,
                 std::vector<Access>& out) {
    if (e.kind == ast::Expr::Kind::Index) {
      Access a;
      a.site = s.site_id;
      a.array = e.name;
      a.write = false;
      for (const auto& ix : e.indices) {
        a.idx.push_back(eval_interval(*ix, vars));
        add_reads(s, *ix, vars, out);
      }
      out.push_back(std::move(a));
      return;
    }
    if (e.kind == ast::Expr::Kind::Var && is_array_or_scalar_decl(e.name)) {
      // scalar declared storage read
      const ast::PlaceDecl* d = find_decl(e.name);
      if (d && d->shape.empty()) out.push_back({s.site_id, e.name, false, {}});
      return;
    }
    if (e.lhs) add_reads(s, *e.lhs, vars, out);
    if (e.rhs) add_reads(s, *e.rhs, vars, out);
  }

  const ast::PlaceDecl* find_decl(const std::string& name) const {
    for (const auto& item : k_.items) {
      if (auto* pb = std::get_if<ast::PlaceBlock>(&item)) {
        for (const auto& d : pb->decls)
          if (d.name == name) return &d;
      } else {
        for (const auto& blk : std::get<ast::Phase>(item).blocks)
          if (auto* pb2 = std::get_if<ast::PlaceBlock>(&blk))
            for (const auto& d : pb2->decls)
              if (d.name == name) return &d;
      }
    }
    return nullptr;
  }

  bool is_array_or_scalar_decl(const std::string& name) const {
    return find_decl(name) != nullptr;
  }

  IndexInterval eval_interval(const ast::Expr& e,
                              const std::map<std::string, IndexInterval>& vars) {
    switch (e.kind) {
      case ast::Expr::Kind::IntLit:
        return IndexInterval::exact(e.int_val);
      case ast::Expr::Kind::Var: {
        auto it = vars.find(e.name);
        if (it != vars.end()) return it->second;
        auto p = params_.find(e.name);
        if (p != params_.end()) return IndexInterval::exact(p->second);
        return IndexInterval{};
      }
      case ast::Expr::Kind::Un: {
        if (e.un_op != ast::UnOp::Neg) return IndexInterval{};
        auto v = eval_interval(*e.lhs, vars);
        if (v.top) return v;
        return IndexInterval::range(-v.hi, -v.lo);
      }
      case ast::Expr::Kind::Bin: {
        auto a = eval_interval(*e.lhs, vars);
        auto b = eval_interval(*e.rhs, vars);
        if (a.top || b.top) return IndexInterval{};
        switch (e.bin_op) {
          case ast::BinOp::Add:
            return IndexInterval::range(a.lo + b.lo, a.hi + b.hi);
          case ast::BinOp::Sub:
            return IndexInterval::range(a.lo - b.hi, a.hi - b.lo);
          case ast::BinOp::Mul: {
            int64_t c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
            return IndexInterval::range(*std::min_element(c, c + 4),
                                        *std::max_element(c, c + 4));
          }
          default:
            return IndexInterval{};
        }
      }
      default:
        return IndexInterval{};
    }
  }

  const ast::Kernel& k_;
  const KernelIndex& ix_;
  ParamMap params_;
  Diagnostics& diags_;
};

// ---------------------------------------------------------------------------
// Deadlock heuristic
// ---------------------------------------------------------------------------

/// Warns on obvious receive-before-send waiting cycles within a phase.
/// Real deadlocks are detected exactly by the simulator.
class DeadlockHeuristic {
 public:
  DeadlockHeuristic(const KernelIndex& ix, const ParamMap& params,
                    Diagnostics& diags)
      : ix_(ix), params_(params), diags_(diags) {}

  void run(SemaInfo& info) {
    for (const auto& pi : ix_.phases) {
      std::map<PECoord, PECoord> waits_on;
      std::map<PECoord, bool> has_send;
      for (auto* cb : pi.computes) {
        Diagnostics scratch;
        auto cs = resolve_subgrid(cb->sg, params_, scratch);
        if (!cs) continue;
        const auto& lo = info.orders.at(cb->block_id);
        std::vector<const SiteInfo*> sites;
        for (const auto& [id, si] : lo.sites) sites.push_back(&si);
        std::sort(sites.begin(), sites.end(),
                  [](auto* a, auto* b) { return a->pre_order < b->pre_order; });
        for (PECoord p : cs->enumerate()) {
          bool first_seen = false;
          for (const SiteInfo* si : sites) {
            const ast::Stmt& s = *si->stmt;
            if (s.kind == ast::StmtKind::Send) {
              has_send[p] = true;
              first_seen = true;
            } else if ((s.kind == ast::StmtKind::Receive ||
                        s.kind == ast::StmtKind::Foreach) &&
                       s.stream.kind != ast::StreamRef::Kind::Arg) {
              if (!first_seen && s.awaited && !waits_on.count(p)) {
                auto it = pi.streams.find(s.stream.name);
                if (it != pi.streams.end())
                  waits_on[p] = {p.x - it->second->dx, p.y - it->second->dy};
              }
              first_seen = true;
            }
          }
        }
      }
      // follow the waits-on map; a cycle among PEs that also send is suspicious
      for (const auto& [start, next] : waits_on) {
        PECoord cur = start;
        std::set<PECoord> seen;
        while (waits_on.count(cur) && seen.insert(cur).second)
          cur = waits_on.at(cur);
        if (waits_on.count(cur) && cur == start && has_send.count(start)) {
          diags_.warning("sema.possible-deadlock", pi.phase->loc,
                         "PEs wait on each other's receives before sending; "
                         "this phase may deadlock");
          break;
        }
      }
    }
  }

 private:
  const KernelIndex& ix_;
  ParamMap params_;
  Diagnostics& diags_;
};

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

inline SemaInfo analyze(const ast::Kernel& k, const KernelIndex& ix,
                        const ParamMap& params, Diagnostics& diags) {
  SemaInfo info;
  DisciplineChecker dc(k, ix, diags);
  dc.run(info);
  EdgeDeriver ed(k, ix, params, diags);
  ed.run(info);
  RaceChecker rc(k, ix, params, diags);
  rc.run(info);
  DeadlockHeuristic dh(ix, params, diags);
  dh.run(info);
  return info;
}

}  // namespace spada
