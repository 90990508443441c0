// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spada/diag.hpp"
#include "spada/types.hpp"

namespace spada::ast {

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class BinOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp { Neg, Not };

inline const char* binop_name(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Kind { IntLit, FloatLit, Var, Bin, Un, Index };
  Kind kind;
  SourceLoc loc;
  ElemType type = ElemType::Invalid;  // filled by the typechecker

  int64_t int_val = 0;     // IntLit
  double float_val = 0.0;  // FloatLit (value as written; stored as f32)
  std::string name;        // Var, Index (array name)
  BinOp bin_op{};
  UnOp un_op{};
  ExprPtr lhs, rhs;             // Bin; Un uses lhs
  std::vector<ExprPtr> indices;  // Index

  ExprPtr clone() const {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->loc = loc;
    e->type = type;
    e->int_val = int_val;
    e->float_val = float_val;
    e->name = name;
    e->bin_op = bin_op;
    e->un_op = un_op;
    if (lhs) e->lhs = lhs->clone();
    if (rhs) e->rhs = rhs->clone();
    for (const auto& ix : indices) e->indices.push_back(ix->clone());
    return e;
  }

  static ExprPtr make_int(int64_t v, SourceLoc loc = {}) {
    auto e = std::make_unique<Expr>();
    e->kind = Kind::IntLit;
    e->int_val = v;
    e->loc = loc;
    return e;
  }
  static ExprPtr make_var(std::string n, SourceLoc loc = {}) {
    auto e = std::make_unique<Expr>();
    e->kind = Kind::Var;
    e->name = std::move(n);
    e->loc = loc;
    return e;
  }
};

/// A range `lo : hi : step` (hi exclusive). A bare expression is a point:
/// hi and step are null.
struct RangeExpr {
  ExprPtr lo, hi, step;
  SourceLoc loc;
  bool is_point() const { return hi == nullptr; }
  RangeExpr clone() const {
    RangeExpr r;
    r.loc = loc;
    if (lo) r.lo = lo->clone();
    if (hi) r.hi = hi->clone();
    if (step) r.step = step->clone();
    return r;
  }
};

/// Stream operand of a send/receive/foreach. Either a relative stream name
/// (optionally a conditional selection `a if cond else b`), or an indexed
/// kernel argument stream `arg[index]`.
struct StreamRef {
  enum class Kind { Rel, RelCond, Arg };
  Kind kind = Kind::Rel;
  std::string name;    // Rel / Arg / RelCond true-branch
  std::string alt;     // RelCond false-branch
  ExprPtr cond;        // RelCond
  ExprPtr arg_index;   // Arg
  SourceLoc loc;

  StreamRef clone() const {
    StreamRef s;
    s.kind = kind;
    s.name = name;
    s.alt = alt;
    if (cond) s.cond = cond->clone();
    if (arg_index) s.arg_index = arg_index->clone();
    s.loc = loc;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

enum class StmtKind {
  Send,      // send(value, stream)
  Receive,   // receive(target, stream)
  Foreach,   // foreach [it,] elem in [range,] receive(stream) { body }
  Map,       // map it in [range] { body }
  Async,     // async { body }
  Await,     // await completion-name
  AwaitAll,  // awaitall
  For,       // for it in [range] { body }
  Assign,    // lvalue = expr
  If,        // if (cond) { body } else { else_body }
};

inline bool is_async_kind(StmtKind k) {
  return k == StmtKind::Send || k == StmtKind::Receive ||
         k == StmtKind::Foreach || k == StmtKind::Map || k == StmtKind::Async;
}

struct Stmt {
  StmtKind kind;
  SourceLoc loc;
  int site_id = -1;  // unique per kernel, assigned by the parser

  // Async statement decoration: `await <stmt>` or `completion c = <stmt>`.
  bool awaited = false;
  std::string completion;

  ExprPtr value;       // Send operand / Receive target (lvalue)
  StreamRef stream;    // Send/Receive/Foreach
  std::string await_name;  // Await

  // Loop headers (Foreach/Map/For). Foreach may also bind an index var.
  ElemType iter_type = ElemType::Invalid;
  std::string iter_var;
  ElemType elem_type = ElemType::Invalid;
  std::string elem_var;  // Foreach element binding
  std::optional<RangeExpr> range;

  std::vector<StmtPtr> body;       // Foreach/Map/Async/For/If(then)
  std::vector<StmtPtr> else_body;  // If
  bool has_else = false;

  ExprPtr cond;      // If
  ExprPtr lhs, rhs;  // Assign

  StmtPtr clone() const {
    auto s = std::make_unique<Stmt>();
    s->kind = kind;
    s->loc = loc;
    s->site_id = site_id;
    s->awaited = awaited;
    s->completion = completion;
    if (value) s->value = value->clone();
    s->stream = stream.clone();
    s->await_name = await_name;
    s->iter_type = iter_type;
    s->iter_var = iter_var;
    s->elem_type = elem_type;
    s->elem_var = elem_var;
    if (range) s->range = range->clone();
    for (const auto& b : body) s->body.push_back(b->clone());
    for (const auto& b : else_body) s->else_body.push_back(b->clone());
    s->has_else = has_else;
    if (cond) s->cond = cond->clone();
    if (lhs) s->lhs = lhs->clone();
    if (rhs) s->rhs = rhs->clone();
    return s;
  }
};

// ---------------------------------------------------------------------------
// Blocks, phases, kernels
// ---------------------------------------------------------------------------

struct DimVar {
  ElemType type = ElemType::I32;
  std::string name;
};

/// Two-dimensional subgrid: `kind T i, T j in [range, range]`.
struct Subgrid {
  DimVar dims[2];
  RangeExpr ranges[2];
  SourceLoc loc;
  Subgrid clone() const {
    Subgrid s;
    s.dims[0] = dims[0];
    s.dims[1] = dims[1];
    s.ranges[0] = ranges[0].clone();
    s.ranges[1] = ranges[1].clone();
    s.loc = loc;
    return s;
  }
};

struct PlaceDecl {
  ElemType type;
  std::vector<ExprPtr> shape;  // empty = scalar
  std::string name;
  SourceLoc loc;
  PlaceDecl clone() const {
    PlaceDecl d;
    d.type = type;
    for (const auto& e : shape) d.shape.push_back(e->clone());
    d.name = name;
    d.loc = loc;
    return d;
  }
};

struct PlaceBlock {
  Subgrid sg;
  std::vector<PlaceDecl> decls;
  SourceLoc loc;
  PlaceBlock clone() const {
    PlaceBlock b;
    b.sg = sg.clone();
    for (const auto& d : decls) b.decls.push_back(d.clone());
    b.loc = loc;
    return b;
  }
};

struct RoutingDecl {
  std::vector<std::pair<int, int>> hops;
  std::optional<int64_t> channel;
  SourceLoc loc;
};

struct StreamDecl {
  std::string name;
  ElemType type;
  int dx = 0, dy = 0;
  std::optional<RoutingDecl> routing;
  SourceLoc loc;
};

struct DataflowBlock {
  Subgrid sg;
  std::vector<StreamDecl> streams;
  SourceLoc loc;
  DataflowBlock clone() const {
    DataflowBlock b;
    b.sg = sg.clone();
    b.streams = streams;  // StreamDecl is value-copyable
    b.loc = loc;
    return b;
  }
};

struct ComputeBlock {
  Subgrid sg;
  std::vector<StmtPtr> body;
  SourceLoc loc;
  int block_id = -1;  // unique per kernel
  ComputeBlock clone() const {
    ComputeBlock b;
    b.sg = sg.clone();
    for (const auto& s : body) b.body.push_back(s->clone());
    b.loc = loc;
    b.block_id = block_id;
    return b;
  }
};

using Block = std::variant<PlaceBlock, DataflowBlock, ComputeBlock>;

struct Phase {
  std::vector<Block> blocks;
  SourceLoc loc;
  Phase clone() const {
    Phase p;
    p.loc = loc;
    for (const auto& b : blocks) {
      if (auto* pb = std::get_if<PlaceBlock>(&b)) p.blocks.emplace_back(pb->clone());
      else if (auto* db = std::get_if<DataflowBlock>(&b)) p.blocks.emplace_back(db->clone());
      else p.blocks.emplace_back(std::get<ComputeBlock>(b).clone());
    }
    return p;
  }
};

enum class ArgMode { ReadOnly, WriteOnly };

struct ArgDecl {
  std::string name;
  ElemType type;
  ExprPtr extent;  // number of host-indexable slices; null = streamed
  ArgMode mode;
  bool is_scalar = false;  // `f32 name` scalar argument
  SourceLoc loc;
  ArgDecl clone() const {
    ArgDecl a;
    a.name = name;
    a.type = type;
    if (extent) a.extent = extent->clone();
    a.mode = mode;
    a.is_scalar = is_scalar;
    a.loc = loc;
    return a;
  }
};

/// Top-level item: either a program-lifetime place block or a phase.
using KernelItem = std::variant<PlaceBlock, Phase>;

struct Kernel {
  std::string name;
  std::vector<std::string> params;
  std::vector<ArgDecl> args;
  std::vector<KernelItem> items;
  SourceLoc loc;
  int next_site_id = 0;
  int next_block_id = 0;

  Kernel clone() const {
    Kernel k;
    k.name = name;
    k.params = params;
    for (const auto& a : args) k.args.push_back(a.clone());
    for (const auto& it : items) {
      if (auto* pb = std::get_if<PlaceBlock>(&it)) k.items.emplace_back(pb->clone());
      else k.items.emplace_back(std::get<Phase>(it).clone());
    }
    k.loc = loc;
    k.next_site_id = next_site_id;
    k.next_block_id = next_block_id;
    return k;
  }

  std::vector<const Phase*> phases() const {
    std::vector<const Phase*> out;
    for (const auto& it : items)
      if (auto* p = std::get_if<Phase>(&it)) out.push_back(p);
    return out;
  }
  std::vector<Phase*> phases() {
    std::vector<Phase*> out;
    for (auto& it : items)
      if (auto* p = std::get_if<Phase>(&it)) out.push_back(p);
    return out;
  }
  std::vector<const PlaceBlock*> top_places() const {
    std::vector<const PlaceBlock*> out;
    for (const auto& it : items)
      if (auto* p = std::get_if<PlaceBlock>(&it)) out.push_back(p);
    return out;
  }
  const ArgDecl* find_arg(const std::string& n) const {
    for (const auto& a : args)
      if (a.name == n) return &a;
    return nullptr;
  }
};

/// Walk all statements of a block (pre-order, nested bodies included).
template <typename F>
void walk_stmts(const std::vector<StmtPtr>& list, F&& f) {
  for (const auto& s : list) {
    f(*s);
    walk_stmts(s->body, f);
    walk_stmts(s->else_body, f);
  }
}

template <typename F>
void walk_exprs(const Expr& e, F&& f) {
  f(e);
  if (e.lhs) walk_exprs(*e.lhs, f);
  if (e.rhs) walk_exprs(*e.rhs, f);
  for (const auto& ix : e.indices) walk_exprs(*ix, f);
}

}  // namespace spada::ast
