// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/diag.hpp"

namespace spada {

/// Where a name may come from inside a compute block.
enum class VarKind { Param, Coord, LoopVar, ScalarDecl, ArrayDecl, ScalarArg };

struct VarInfo {
  VarKind kind;
  ElemType type = ElemType::Invalid;
  int rank = 0;  // ArrayDecl only
  const ast::PlaceDecl* decl = nullptr;
};

/// Phase-resolved lookup tables. Pointers reference the kernel AST and stay
/// valid for its lifetime.
struct PhaseIndex {
  const ast::Phase* phase = nullptr;
  int index = 0;
  std::map<std::string, const ast::StreamDecl*> streams;
  std::map<std::string, const ast::DataflowBlock*> stream_block;
  std::vector<const ast::ComputeBlock*> computes;  // source order
  std::vector<const ast::PlaceBlock*> places;      // phase-local
};

struct KernelIndex {
  const ast::Kernel* kernel = nullptr;
  std::vector<PhaseIndex> phases;
  std::vector<const ast::PlaceBlock*> top_places;

  const PhaseIndex* phase_of(const ast::ComputeBlock* cb) const {
    for (const auto& p : phases)
      for (auto* c : p.computes)
        if (c == cb) return &p;
    return nullptr;
  }

  /// Place decl visible from the given phase (phase-local first).
  const ast::PlaceDecl* find_decl(int phase_idx, const std::string& name,
                                  const ast::PlaceBlock** owner = nullptr) const {
    if (phase_idx >= 0 && phase_idx < (int)phases.size()) {
      for (auto* pb : phases[phase_idx].places)
        for (const auto& d : pb->decls)
          if (d.name == name) {
            if (owner) *owner = pb;
            return &d;
          }
    }
    for (auto* pb : top_places)
      for (const auto& d : pb->decls)
        if (d.name == name) {
          if (owner) *owner = pb;
          return &d;
        }
    return nullptr;
  }
};

inline KernelIndex build_index(const ast::Kernel& k) {
  KernelIndex ix;
  ix.kernel = &k;
  for (const auto& item : k.items) {
    if (auto* pb = std::get_if<ast::PlaceBlock>(&item)) {
      ix.top_places.push_back(pb);
      continue;
    }
    const auto& ph = std::get<ast::Phase>(item);
    PhaseIndex pi;
    pi.phase = &ph;
    pi.index = (int)ix.phases.size();
    for (const auto& blk : ph.blocks) {
      if (auto* p = std::get_if<ast::PlaceBlock>(&blk)) {
        pi.places.push_back(p);
      } else if (auto* d = std::get_if<ast::DataflowBlock>(&blk)) {
        for (const auto& s : d->streams) {
          pi.streams[s.name] = &s;
          pi.stream_block[s.name] = d;
        }
      } else {
        pi.computes.push_back(&std::get<ast::ComputeBlock>(blk));
      }
    }
    ix.phases.push_back(std::move(pi));
  }
  return ix;
}

// ---------------------------------------------------------------------------
// Typechecker
// ---------------------------------------------------------------------------

class TypeChecker {
 public:
  TypeChecker(ast::Kernel& k, Diagnostics& diags) : k_(k), diags_(diags) {}

  bool run() {
    check_args();
    ix_ = build_index(k_);
    check_stream_decls();
    check_place_names();
    for (auto& item : k_.items) {
      if (auto* ph = std::get_if<ast::Phase>(&item)) {
        ++phase_idx_;
        for (auto& blk : ph->blocks)
          if (auto* cb = std::get_if<ast::ComputeBlock>(&blk)) check_block(*cb);
      }
    }
    return !diags_.has_errors();
  }

 private:
  void check_args() {
    std::set<std::string> seen;
    for (const auto& a : k_.args) {
      if (!seen.insert(a.name).second)
        diags_.error("type.dup-arg", a.loc, "duplicate argument '" + a.name + "'");
    }
    std::set<std::string> pseen;
    for (const auto& p : k_.params)
      if (!pseen.insert(p).second)
        diags_.error("type.dup-param", k_.loc, "duplicate type parameter '" + p + "'");
  }

  void check_stream_decls() {
    for (const auto& pi : ix_.phases) {
      std::set<std::string> seen;
      for (const auto& blk : pi.phase->blocks) {
        if (auto* d = std::get_if<ast::DataflowBlock>(&blk)) {
          for (const auto& s : d->streams) {
            if (!seen.insert(s.name).second)
              diags_.error("type.dup-stream", s.loc,
                           "stream '" + s.name + "' redeclared in this phase");
          }
        }
      }
    }
  }

  void check_place_names() {
    auto collect = [&](const std::vector<const ast::PlaceBlock*>& blocks,
                       const char* what) {
      std::set<std::string> seen;
      for (auto* pb : blocks)
        for (const auto& d : pb->decls)
          if (!seen.insert(d.name).second)
            diags_.error("type.dup-decl", d.loc,
                         std::string("duplicate ") + what + " declaration '" +
                             d.name + "'");
    };
    collect(ix_.top_places, "top-level");
    for (const auto& pi : ix_.phases) {
      std::set<std::string> seen;
      for (auto* pb : ix_.top_places)
        for (const auto& d : pb->decls) seen.insert(d.name);
      for (auto* pb : pi.places)
        for (const auto& d : pb->decls)
          if (!seen.insert(d.name).second)
            diags_.error("type.dup-decl", d.loc,
                         "declaration '" + d.name + "' shadows another");
    }
  }

  void check_block(ast::ComputeBlock& cb) {
    env_.clear();
    for (const auto& p : k_.params) env_[p] = {VarKind::Param, ElemType::I64};
    for (int d = 0; d < 2; ++d)
      env_[cb.sg.dims[d].name] = {VarKind::Coord, cb.sg.dims[d].type};
    for (const auto& a : k_.args)
      if (a.is_scalar) env_[a.name] = {VarKind::ScalarArg, a.type};
    completions_.clear();
    collect_completions(cb.body);
    check_stmts(cb.body);
  }

  void collect_completions(const std::vector<ast::StmtPtr>& list) {
    ast::walk_stmts(list, [&](const ast::Stmt& s) {
      if (!s.completion.empty()) {
        if (!completions_.insert(s.completion).second)
          diags_.error("type.dup-completion", s.loc,
                       "completion '" + s.completion +
                           "' bound more than once in this compute block");
      }
    });
  }

  VarInfo* lookup(const std::string& name, SourceLoc loc, bool quiet = false) {
    auto it = env_.find(name);
    if (it == env_.end()) {
      // place decls are resolved lazily against the current phase
      const ast::PlaceDecl* d = ix_.find_decl(phase_idx_, name);
      if (d) {
        VarInfo vi;
        vi.kind = d->shape.empty() ? VarKind::ScalarDecl : VarKind::ArrayDecl;
        vi.type = d->type;
        vi.rank = (int)d->shape.size();
        vi.decl = d;
        it = env_.emplace(name, vi).first;
      } else {
        if (!quiet)
          diags_.error("type.undeclared", loc, "undeclared name '" + name + "'");
        return nullptr;
      }
    }
    return &it->second;
  }

  void check_stmts(std::vector<ast::StmtPtr>& list) {
    for (auto& sp : list) check_stmt(*sp);
  }

  void check_stmt(ast::Stmt& s) {
    switch (s.kind) {
      case ast::StmtKind::Send: {
        ElemType st = stream_elem_type(s.stream, /*sending=*/true);
        ElemType vt = infer_operand(*s.value);
        if (st != ElemType::Invalid && vt != ElemType::Invalid && st != vt)
          diags_.error("type.mismatch", s.loc,
                       std::string("cannot send ") + elem_type_name(vt) +
                           " data over a stream of " + elem_type_name(st));
        break;
      }
      case ast::StmtKind::Receive: {
        ElemType st = stream_elem_type(s.stream, /*sending=*/false);
        ElemType vt = infer_operand(*s.value);
        if (s.value->kind == ast::Expr::Kind::Var) {
          VarInfo* vi = lookup(s.value->name, s.value->loc, /*quiet=*/true);
          if (vi && vi->kind != VarKind::ArrayDecl &&
              vi->kind != VarKind::ScalarDecl)
            diags_.error("type.not-assignable", s.loc,
                         "'" + s.value->name + "' is not assignable storage");
        } else if (s.value->kind != ast::Expr::Kind::Index) {
          diags_.error("type.lvalue", s.loc,
                       "receive target must be a variable or array element");
        }
        if (st != ElemType::Invalid && vt != ElemType::Invalid && st != vt)
          diags_.error("type.mismatch", s.loc,
                       std::string("cannot receive ") + elem_type_name(st) +
                           " data into " + elem_type_name(vt) + " storage");
        break;
      }
      case ast::StmtKind::Foreach: {
        ElemType st = stream_elem_type(s.stream, /*sending=*/false);
        if (st != ElemType::Invalid && s.elem_type != st)
          diags_.error("type.mismatch", s.loc,
                       std::string("foreach element type ") +
                           elem_type_name(s.elem_type) +
                           " does not match stream element type " +
                           elem_type_name(st));
        if (s.range) check_range(*s.range);
        scoped_loop_vars(s, [&] { check_stmts(s.body); });
        break;
      }
      case ast::StmtKind::Map:
      case ast::StmtKind::For: {
        check_range(*s.range);
        scoped_loop_vars(s, [&] { check_stmts(s.body); });
        break;
      }
      case ast::StmtKind::Async:
        check_stmts(s.body);
        break;
      case ast::StmtKind::Await:
        if (!completions_.count(s.await_name))
          diags_.error("type.unknown-completion", s.loc,
                       "await of unbound completion '" + s.await_name + "'");
        break;
      case ast::StmtKind::AwaitAll:
        break;
      case ast::StmtKind::Assign: {
        ElemType lt = infer_lvalue(*s.lhs);
        ElemType rt = infer(*s.rhs);
        if (lt != ElemType::Invalid && rt != ElemType::Invalid && lt != rt &&
            !coerce_int_literal(*s.rhs, lt))
          diags_.error("type.mismatch", s.loc,
                       std::string("cannot assign ") + elem_type_name(rt) +
                           " to " + elem_type_name(lt));
        break;
      }
      case ast::StmtKind::If: {
        ElemType ct = infer(*s.cond);
        if (ct != ElemType::Invalid && ct != ElemType::Bool)
          diags_.error("type.cond", s.loc, "condition must be boolean");
        check_stmts(s.body);
        check_stmts(s.else_body);
        break;
      }
    }
  }

  template <typename F>
  void scoped_loop_vars(const ast::Stmt& s, F&& f) {
    std::vector<std::pair<std::string, std::optional<VarInfo>>> saved;
    auto bind = [&](const std::string& name, ElemType t) {
      if (name.empty()) return;
      auto it = env_.find(name);
      saved.emplace_back(name, it != env_.end()
                                   ? std::optional<VarInfo>(it->second)
                                   : std::nullopt);
      env_[name] = {VarKind::LoopVar, t};
    };
    bind(s.iter_var, s.iter_type);
    bind(s.elem_var, s.elem_type);
    f();
    for (auto& [name, vi] : saved) {
      if (vi) env_[name] = *vi;
      else env_.erase(name);
    }
  }

  void check_range(const ast::RangeExpr& r) {
    auto ck = [&](const ast::ExprPtr& e) {
      if (!e) return;
      ElemType t = infer(*e);
      if (t != ElemType::Invalid && !is_integer_type(t))
        diags_.error("type.range", e->loc, "range bounds must be integers");
    };
    ck(r.lo);
    ck(r.hi);
    ck(r.step);
  }

  ElemType stream_elem_type(ast::StreamRef& sr, bool sending) {
    const auto& pi = ix_.phases[phase_idx_];
    auto rel = [&](const std::string& name) -> ElemType {
      auto it = pi.streams.find(name);
      if (it == pi.streams.end()) {
        diags_.error("type.undeclared", sr.loc,
                     "no stream '" + name + "' in this phase");
        return ElemType::Invalid;
      }
      return it->second->type;
    };
    switch (sr.kind) {
      case ast::StreamRef::Kind::Rel:
        return rel(sr.name);
      case ast::StreamRef::Kind::RelCond: {
        ElemType a = rel(sr.name), b = rel(sr.alt);
        ElemType c = infer(*sr.cond);
        if (c != ElemType::Invalid && c != ElemType::Bool)
          diags_.error("type.cond", sr.loc,
                       "stream selection condition must be boolean");
        if (a != ElemType::Invalid && b != ElemType::Invalid && a != b)
          diags_.error("type.mismatch", sr.loc,
                       "conditional stream branches have different element types");
        return a;
      }
      case ast::StreamRef::Kind::Arg: {
        const ast::ArgDecl* a = k_.find_arg(sr.name);
        if (!a || a->is_scalar) {
          diags_.error("type.undeclared", sr.loc,
                       "no stream argument '" + sr.name + "'");
          return ElemType::Invalid;
        }
        if (sending && a->mode == ast::ArgMode::ReadOnly)
          diags_.error("type.arg-mode", sr.loc,
                       "cannot send to readonly argument '" + sr.name + "'");
        if (!sending && a->mode == ast::ArgMode::WriteOnly)
          diags_.error("type.arg-mode", sr.loc,
                       "cannot receive from writeonly argument '" + sr.name + "'");
        ElemType t = infer(*sr.arg_index);
        if (t != ElemType::Invalid && !is_integer_type(t))
          diags_.error("type.index", sr.loc, "argument index must be an integer");
        return a->type;
      }
    }
    return ElemType::Invalid;
  }

  /// Send operands and receive targets: whole-array references denote the
  /// full buffer and are typed with their element type.
  ElemType infer_operand(ast::Expr& e) {
    if (e.kind == ast::Expr::Kind::Var) {
      VarInfo* vi = lookup(e.name, e.loc, /*quiet=*/true);
      if (vi && vi->kind == VarKind::ArrayDecl) {
        e.type = vi->type;
        return e.type;
      }
    }
    return infer(e);
  }

  ElemType infer_lvalue(ast::Expr& e) {
    if (e.kind == ast::Expr::Kind::Var) {
      VarInfo* vi = lookup(e.name, e.loc);
      if (!vi) return ElemType::Invalid;
      if (vi->kind == VarKind::Param || vi->kind == VarKind::Coord ||
          vi->kind == VarKind::LoopVar || vi->kind == VarKind::ScalarArg) {
        diags_.error("type.not-assignable", e.loc,
                     "'" + e.name + "' is not assignable storage");
        return ElemType::Invalid;
      }
      if (vi->kind == VarKind::ArrayDecl) {
        diags_.error("type.array-value", e.loc,
                     "whole-array assignment to '" + e.name +
                         "' must be decomposed into a map (canonicalize first)");
        return ElemType::Invalid;
      }
      e.type = vi->type;
      return e.type;
    }
    if (e.kind == ast::Expr::Kind::Index) return infer(e);
    diags_.error("type.lvalue", e.loc, "expected a variable or array element");
    return ElemType::Invalid;
  }

  ElemType infer(ast::Expr& e) {
    switch (e.kind) {
      case ast::Expr::Kind::IntLit:
        e.type = ElemType::I64;
        return e.type;
      case ast::Expr::Kind::FloatLit:
        e.type = ElemType::F32;
        return e.type;
      case ast::Expr::Kind::Var: {
        VarInfo* vi = lookup(e.name, e.loc);
        if (!vi) return ElemType::Invalid;
        if (vi->kind == VarKind::ArrayDecl) {
          diags_.error("type.array-value", e.loc,
                       "array '" + e.name + "' used as a scalar value");
          return ElemType::Invalid;
        }
        e.type = vi->type;
        return e.type;
      }
      case ast::Expr::Kind::Index: {
        VarInfo* vi = lookup(e.name, e.loc);
        if (!vi) return ElemType::Invalid;
        if (vi->kind != VarKind::ArrayDecl) {
          diags_.error("type.arity", e.loc,
                       "'" + e.name + "' is not an array (rank 0)");
          return ElemType::Invalid;
        }
        if ((int)e.indices.size() != vi->rank) {
          diags_.error("type.arity", e.loc,
                       "'" + e.name + "' has rank " + std::to_string(vi->rank) +
                           " but is indexed with " +
                           std::to_string(e.indices.size()) + " subscripts");
          return ElemType::Invalid;
        }
        for (auto& ix : e.indices) {
          ElemType t = infer(*ix);
          if (t != ElemType::Invalid && !is_integer_type(t))
            diags_.error("type.index", ix->loc, "array index must be an integer");
        }
        e.type = vi->type;
        return e.type;
      }
      case ast::Expr::Kind::Un: {
        ElemType t = infer(*e.lhs);
        if (t == ElemType::Invalid) return t;
        if (e.un_op == ast::UnOp::Neg) {
          if (t == ElemType::Bool) {
            diags_.error("type.operand", e.loc, "cannot negate a boolean");
            return ElemType::Invalid;
          }
          e.type = t;
        } else {
          if (t != ElemType::Bool) {
            diags_.error("type.operand", e.loc, "'!' requires a boolean");
            return ElemType::Invalid;
          }
          e.type = ElemType::Bool;
        }
        return e.type;
      }
      case ast::Expr::Kind::Bin: {
        ElemType a = infer(*e.lhs);
        ElemType b = infer(*e.rhs);
        if (a == ElemType::Invalid || b == ElemType::Invalid)
          return ElemType::Invalid;
        bool logical = e.bin_op == ast::BinOp::And || e.bin_op == ast::BinOp::Or;
        bool cmp = e.bin_op == ast::BinOp::Eq || e.bin_op == ast::BinOp::Ne ||
                   e.bin_op == ast::BinOp::Lt || e.bin_op == ast::BinOp::Le ||
                   e.bin_op == ast::BinOp::Gt || e.bin_op == ast::BinOp::Ge;
        if (logical) {
          if (a != ElemType::Bool || b != ElemType::Bool) {
            diags_.error("type.operand", e.loc,
                         "logical operators require boolean operands");
            return ElemType::Invalid;
          }
          e.type = ElemType::Bool;
          return e.type;
        }
        ElemType joined = join_types(a, b, *e.lhs, *e.rhs, e.loc);
        if (joined == ElemType::Invalid) return joined;
        e.type = cmp ? ElemType::Bool : joined;
        return e.type;
      }
    }
    return ElemType::Invalid;
  }

  /// Integer literals adapt to the other operand's integer type; everything
  /// else must match exactly (no implicit int<->float conversion).
  ElemType join_types(ElemType a, ElemType b, ast::Expr& ea, ast::Expr& eb,
                      SourceLoc loc) {
    if (a == b) return a;
    if (is_integer_type(a) && is_integer_type(b)) {
      if (coerce_int_literal(eb, a)) return a;
      if (coerce_int_literal(ea, b)) return b;
      // widen to the larger integer type
      ElemType w = integer_rank(a) >= integer_rank(b) ? a : b;
      return w;
    }
    diags_.error("type.mismatch", loc,
                 std::string("mismatched operand types ") + elem_type_name(a) +
                     " and " + elem_type_name(b));
    return ElemType::Invalid;
  }

  static bool is_int_literal_tree(const ast::Expr& e) {
    switch (e.kind) {
      case ast::Expr::Kind::IntLit: return true;
      case ast::Expr::Kind::Un:
        return e.un_op == ast::UnOp::Neg && is_int_literal_tree(*e.lhs);
      case ast::Expr::Kind::Bin:
        return is_int_literal_tree(*e.lhs) && is_int_literal_tree(*e.rhs);
      default: return false;
    }
  }

  static bool coerce_int_literal(ast::Expr& e, ElemType target) {
    if (!is_integer_type(target)) return false;
    if (!is_int_literal_tree(e)) return false;
    e.type = target;
    return true;
  }

  ast::Kernel& k_;
  Diagnostics& diags_;
  KernelIndex ix_;
  int phase_idx_ = -1;
  std::map<std::string, VarInfo> env_;
  std::set<std::string> completions_;
};

/// Annotates expression types in place. Returns false (with diagnostics) on
/// any type error.
inline bool typecheck(ast::Kernel& k, Diagnostics& diags) {
  TypeChecker tc(k, diags);
  return tc.run();
}

}  // namespace spada
