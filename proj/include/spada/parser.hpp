// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/lexer.hpp"

namespace spada {

/// Recursive-descent parser for `.spada` kernels.
///
/// Statements are self-delimiting; semicolons are accepted and ignored.
/// The parser stops at the first syntax error and reports it with the
/// expected-token set.
class Parser {
 public:
  Parser(std::string_view src, Diagnostics& diags)
      : lex_(src), diags_(diags) {
    tok_ = lex_.next();
    peek_ = lex_.next();
  }

  /// Parses a single standalone expression and requires it to consume the
  /// whole input. Used by other frontends that borrow the expression grammar.
  ast::ExprPtr parse_full_expression() {
    auto e = parse_expr();
    if (!e) return nullptr;
    if (tok_.kind != Tok::Eof) {
      syntax_error({Tok::Eof});
      return nullptr;
    }
    return e;
  }

  std::optional<ast::Kernel> parse_kernel() {
    ast::Kernel k;
    k.loc = tok_.loc;
    if (!expect(Tok::KwKernel)) return std::nullopt;
    if (!expect(Tok::At)) return std::nullopt;
    if (tok_.kind != Tok::Ident) return fail<ast::Kernel>({Tok::Ident});
    k.name = tok_.text;
    next();
    if (!expect(Tok::Lt)) return std::nullopt;
    while (tok_.kind != Tok::Gt) {
      if (tok_.kind != Tok::Ident) return fail<ast::Kernel>({Tok::Ident, Tok::Gt});
      k.params.push_back(tok_.text);
      next();
      if (tok_.kind == Tok::Comma) next();
      else break;
    }
    if (!expect(Tok::Gt)) return std::nullopt;
    if (!expect(Tok::LParen)) return std::nullopt;
    while (tok_.kind != Tok::RParen) {
      auto a = parse_arg();
      if (!a) return std::nullopt;
      k.args.push_back(std::move(*a));
      if (tok_.kind == Tok::Comma) next();
      else break;
    }
    if (!expect(Tok::RParen)) return std::nullopt;
    if (!expect(Tok::LBrace)) return std::nullopt;
    while (tok_.kind != Tok::RBrace) {
      if (tok_.kind == Tok::KwPlace) {
        auto b = parse_place_block();
        if (!b) return std::nullopt;
        k.items.emplace_back(std::move(*b));
      } else if (tok_.kind == Tok::KwPhase) {
        auto p = parse_phase();
        if (!p) return std::nullopt;
        k.items.emplace_back(std::move(*p));
      } else if (tok_.kind == Tok::KwReserved) {
        diags_.error("parse.unknown-construct", tok_.loc,
                     "unknown construct '" + tok_.text + "'");
        return std::nullopt;
      } else {
        return fail<ast::Kernel>({Tok::KwPlace, Tok::KwPhase, Tok::RBrace});
      }
    }
    expect(Tok::RBrace);
    if (tok_.kind != Tok::Eof) {
      syntax_error({Tok::Eof});
      return std::nullopt;
    }
    k.next_site_id = next_site_;
    k.next_block_id = next_block_;
    return k;
  }

 private:
  // -- token plumbing --------------------------------------------------------

  void next() {
    tok_ = peek_;
    peek_ = lex_.next();
  }

  bool accept(Tok t) {
    if (tok_.kind == t) {
      next();
      return true;
    }
    return false;
  }

  bool expect(Tok t) {
    if (tok_.kind == t) {
      next();
      return true;
    }
    syntax_error({t});
    return false;
  }

  void syntax_error(std::vector<Tok> expected) {
    if (reported_) return;
    reported_ = true;
    std::string msg = "unexpected ";
    msg += tok_.kind == Tok::Ident || tok_.kind == Tok::KwReserved
               ? "'" + tok_.text + "'"
               : tok_name(tok_.kind);
    msg += "; expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += tok_name(expected[i]);
    }
    diags_.error("parse.syntax", tok_.loc, msg);
  }

  template <typename T>
  std::optional<T> fail(std::vector<Tok> expected) {
    syntax_error(std::move(expected));
    return std::nullopt;
  }

  ElemType cur_elem_type() const {
    auto t = elem_type_from_name(tok_.text);
    return t ? *t : ElemType::Invalid;
  }

  // -- declarations ----------------------------------------------------------

  std::optional<ast::ArgDecl> parse_arg() {
    ast::ArgDecl a;
    a.loc = tok_.loc;
    if (tok_.kind == Tok::KwType) {
      // scalar argument: `f32 name`
      a.type = cur_elem_type();
      a.is_scalar = true;
      a.mode = ast::ArgMode::ReadOnly;
      next();
      if (tok_.kind != Tok::Ident) return fail<ast::ArgDecl>({Tok::Ident});
      a.name = tok_.text;
      next();
      return a;
    }
    if (!expect(Tok::KwStream)) return std::nullopt;
    if (!expect(Tok::Lt)) return std::nullopt;
    if (tok_.kind != Tok::KwType) return fail<ast::ArgDecl>({Tok::KwType});
    a.type = cur_elem_type();
    next();
    if (!expect(Tok::Gt)) return std::nullopt;
    if (accept(Tok::LBracket)) {
      a.extent = parse_expr();
      if (!a.extent) return std::nullopt;
      if (!expect(Tok::RBracket)) return std::nullopt;
    }
    if (tok_.kind == Tok::KwReadonly) a.mode = ast::ArgMode::ReadOnly;
    else if (tok_.kind == Tok::KwWriteonly) a.mode = ast::ArgMode::WriteOnly;
    else return fail<ast::ArgDecl>({Tok::KwReadonly, Tok::KwWriteonly});
    next();
    if (tok_.kind != Tok::Ident) return fail<ast::ArgDecl>({Tok::Ident});
    a.name = tok_.text;
    next();
    return a;
  }

  std::optional<ast::Subgrid> parse_subgrid_header() {
    // `T i, T j in [range, range]` — the keyword has been consumed.
    ast::Subgrid sg;
    sg.loc = tok_.loc;
    for (int d = 0; d < 2; ++d) {
      if (tok_.kind != Tok::KwType) return fail<ast::Subgrid>({Tok::KwType});
      sg.dims[d].type = cur_elem_type();
      if (!is_integer_type(sg.dims[d].type)) {
        diags_.error("parse.dimvar-type", tok_.loc,
                     "subgrid coordinate variables must have integer type");
        return std::nullopt;
      }
      next();
      if (tok_.kind != Tok::Ident) return fail<ast::Subgrid>({Tok::Ident});
      sg.dims[d].name = tok_.text;
      next();
      if (d == 0 && !expect(Tok::Comma)) return std::nullopt;
    }
    if (!expect(Tok::KwIn)) return std::nullopt;
    if (!expect(Tok::LBracket)) return std::nullopt;
    for (int d = 0; d < 2; ++d) {
      auto r = parse_range();
      if (!r) return std::nullopt;
      sg.ranges[d] = std::move(*r);
      if (d == 0 && !expect(Tok::Comma)) return std::nullopt;
    }
    if (!expect(Tok::RBracket)) return std::nullopt;
    return sg;
  }

  std::optional<ast::RangeExpr> parse_range() {
    ast::RangeExpr r;
    r.loc = tok_.loc;
    r.lo = parse_expr();
    if (!r.lo) return std::nullopt;
    if (accept(Tok::Colon)) {
      r.hi = parse_expr();
      if (!r.hi) return std::nullopt;
      if (accept(Tok::Colon)) {
        r.step = parse_expr();
        if (!r.step) return std::nullopt;
      }
    }
    return r;
  }

  std::optional<ast::PlaceBlock> parse_place_block() {
    ast::PlaceBlock b;
    b.loc = tok_.loc;
    expect(Tok::KwPlace);
    auto sg = parse_subgrid_header();
    if (!sg) return std::nullopt;
    b.sg = std::move(*sg);
    if (!expect(Tok::LBrace)) return std::nullopt;
    while (tok_.kind != Tok::RBrace) {
      ast::PlaceDecl d;
      d.loc = tok_.loc;
      if (tok_.kind != Tok::KwType) return fail<ast::PlaceBlock>({Tok::KwType, Tok::RBrace});
      d.type = cur_elem_type();
      next();
      if (accept(Tok::LBracket)) {
        while (true) {
          auto e = parse_expr();
          if (!e) return std::nullopt;
          d.shape.push_back(std::move(e));
          if (!accept(Tok::Comma)) break;
        }
        if (!expect(Tok::RBracket)) return std::nullopt;
      }
      if (tok_.kind != Tok::Ident) return fail<ast::PlaceBlock>({Tok::Ident});
      d.name = tok_.text;
      next();
      accept(Tok::Semicolon);
      b.decls.push_back(std::move(d));
    }
    expect(Tok::RBrace);
    return b;
  }

  std::optional<ast::DataflowBlock> parse_dataflow_block() {
    ast::DataflowBlock b;
    b.loc = tok_.loc;
    expect(Tok::KwDataflow);
    auto sg = parse_subgrid_header();
    if (!sg) return std::nullopt;
    b.sg = std::move(*sg);
    if (!expect(Tok::LBrace)) return std::nullopt;
    while (tok_.kind != Tok::RBrace) {
      ast::StreamDecl s;
      s.loc = tok_.loc;
      if (!expect(Tok::KwStream)) return std::nullopt;
      if (!expect(Tok::Lt)) return std::nullopt;
      if (tok_.kind != Tok::KwType) return fail<ast::DataflowBlock>({Tok::KwType});
      s.type = cur_elem_type();
      next();
      if (!expect(Tok::Gt)) return std::nullopt;
      if (tok_.kind != Tok::Ident) return fail<ast::DataflowBlock>({Tok::Ident});
      s.name = tok_.text;
      next();
      if (!expect(Tok::Assign)) return std::nullopt;
      if (!expect(Tok::KwRelativeStream)) return std::nullopt;
      if (!expect(Tok::LParen)) return std::nullopt;
      auto dx = parse_const_int();
      if (!dx) return std::nullopt;
      if (!expect(Tok::Comma)) return std::nullopt;
      auto dy = parse_const_int();
      if (!dy) return std::nullopt;
      if (!expect(Tok::RParen)) return std::nullopt;
      s.dx = static_cast<int>(*dx);
      s.dy = static_cast<int>(*dy);
      if (s.dx == 0 && s.dy == 0) {
        diags_.error("parse.zero-offset", s.loc,
                     "stream offset must be nonzero");
        return std::nullopt;
      }
      if (tok_.kind == Tok::LBrace) {
        auto r = parse_routing_decl();
        if (!r) return std::nullopt;
        s.routing = std::move(*r);
      }
      accept(Tok::Semicolon);
      b.streams.push_back(std::move(s));
    }
    expect(Tok::RBrace);
    return b;
  }

  std::optional<ast::RoutingDecl> parse_routing_decl() {
    ast::RoutingDecl r;
    r.loc = tok_.loc;
    expect(Tok::LBrace);
    while (tok_.kind != Tok::RBrace) {
      if (accept(Tok::KwHops)) {
        if (!expect(Tok::Assign)) return std::nullopt;
        if (!expect(Tok::LBracket)) return std::nullopt;
        while (true) {
          if (!expect(Tok::LParen)) return std::nullopt;
          auto hx = parse_const_int();
          if (!hx) return std::nullopt;
          if (!expect(Tok::Comma)) return std::nullopt;
          auto hy = parse_const_int();
          if (!hy) return std::nullopt;
          if (!expect(Tok::RParen)) return std::nullopt;
          r.hops.emplace_back(static_cast<int>(*hx), static_cast<int>(*hy));
          if (!accept(Tok::Comma)) break;
        }
        if (!expect(Tok::RBracket)) return std::nullopt;
      } else if (accept(Tok::KwChannel)) {
        if (!expect(Tok::Assign)) return std::nullopt;
        auto c = parse_const_int();
        if (!c) return std::nullopt;
        r.channel = *c;
      } else {
        return fail<ast::RoutingDecl>({Tok::KwHops, Tok::KwChannel, Tok::RBrace});
      }
      accept(Tok::Comma);
    }
    expect(Tok::RBrace);
    return r;
  }

  std::optional<int64_t> parse_const_int() {
    bool neg = accept(Tok::Minus);
    if (tok_.kind != Tok::Int) return fail<int64_t>({Tok::Int});
    int64_t v = tok_.int_val;
    next();
    return neg ? -v : v;
  }

  std::optional<ast::Phase> parse_phase() {
    ast::Phase p;
    p.loc = tok_.loc;
    expect(Tok::KwPhase);
    if (!expect(Tok::LBrace)) return std::nullopt;
    while (tok_.kind != Tok::RBrace) {
      if (tok_.kind == Tok::KwPlace) {
        auto b = parse_place_block();
        if (!b) return std::nullopt;
        p.blocks.emplace_back(std::move(*b));
      } else if (tok_.kind == Tok::KwDataflow) {
        auto b = parse_dataflow_block();
        if (!b) return std::nullopt;
        p.blocks.emplace_back(std::move(*b));
      } else if (tok_.kind == Tok::KwCompute) {
        auto b = parse_compute_block();
        if (!b) return std::nullopt;
        p.blocks.emplace_back(std::move(*b));
      } else if (tok_.kind == Tok::KwReserved) {
        diags_.error("parse.unknown-construct", tok_.loc,
                     "unknown construct '" + tok_.text + "'");
        return std::nullopt;
      } else {
        return fail<ast::Phase>(
            {Tok::KwPlace, Tok::KwDataflow, Tok::KwCompute, Tok::RBrace});
      }
    }
    expect(Tok::RBrace);
    return p;
  }

  std::optional<ast::ComputeBlock> parse_compute_block() {
    ast::ComputeBlock b;
    b.loc = tok_.loc;
    b.block_id = next_block_++;
    expect(Tok::KwCompute);
    auto sg = parse_subgrid_header();
    if (!sg) return std::nullopt;
    b.sg = std::move(*sg);
    if (!expect(Tok::LBrace)) return std::nullopt;
    if (!parse_stmt_list(b.body)) return std::nullopt;
    return b;
  }

  // -- statements ------------------------------------------------------------

  bool parse_stmt_list(std::vector<ast::StmtPtr>& out) {
    // caller consumed '{'; we consume up to and including '}'
    while (tok_.kind != Tok::RBrace) {
      if (tok_.kind == Tok::Eof) {
        syntax_error({Tok::RBrace});
        return false;
      }
      auto s = parse_stmt();
      if (!s) return false;
      out.push_back(std::move(*s));
      accept(Tok::Semicolon);
    }
    next();  // '}'
    return true;
  }

  std::optional<ast::StmtPtr> parse_stmt() {
    SourceLoc loc = tok_.loc;
    switch (tok_.kind) {
      case Tok::KwAwait: {
        next();
        if (tok_.kind == Tok::Ident) {
          auto s = new_stmt(ast::StmtKind::Await, loc);
          s->await_name = tok_.text;
          next();
          return s;
        }
        auto inner = parse_async_stmt();
        if (!inner) return std::nullopt;
        (*inner)->awaited = true;
        (*inner)->loc = loc;
        return inner;
      }
      case Tok::KwCompletion: {
        next();
        if (tok_.kind != Tok::Ident) return fail<ast::StmtPtr>({Tok::Ident});
        std::string name = tok_.text;
        next();
        if (!expect(Tok::Assign)) return std::nullopt;
        auto inner = parse_async_stmt();
        if (!inner) return std::nullopt;
        (*inner)->completion = name;
        (*inner)->loc = loc;
        return inner;
      }
      case Tok::KwAwaitAll: {
        next();
        return new_stmt(ast::StmtKind::AwaitAll, loc);
      }
      case Tok::KwSend:
      case Tok::KwReceive:
      case Tok::KwForeach:
      case Tok::KwMap:
      case Tok::KwAsync:
        return parse_async_stmt();
      case Tok::KwFor: {
        next();
        auto s = new_stmt(ast::StmtKind::For, loc);
        if (!parse_loop_header(*s)) return std::nullopt;
        if (!expect(Tok::LBrace)) return std::nullopt;
        if (!parse_stmt_list(s->body)) return std::nullopt;
        return s;
      }
      case Tok::KwIf: {
        next();
        auto s = new_stmt(ast::StmtKind::If, loc);
        if (!expect(Tok::LParen)) return std::nullopt;
        s->cond = parse_expr();
        if (!s->cond) return std::nullopt;
        if (!expect(Tok::RParen)) return std::nullopt;
        if (!expect(Tok::LBrace)) return std::nullopt;
        if (!parse_stmt_list(s->body)) return std::nullopt;
        if (accept(Tok::KwElse)) {
          s->has_else = true;
          if (!expect(Tok::LBrace)) return std::nullopt;
          if (!parse_stmt_list(s->else_body)) return std::nullopt;
        }
        return s;
      }
      case Tok::Ident: {
        auto s = new_stmt(ast::StmtKind::Assign, loc);
        s->lhs = parse_lvalue();
        if (!s->lhs) return std::nullopt;
        if (!expect(Tok::Assign)) return std::nullopt;
        s->rhs = parse_expr();
        if (!s->rhs) return std::nullopt;
        return s;
      }
      case Tok::KwReserved: {
        diags_.error("parse.unknown-construct", loc,
                     "unknown construct '" + tok_.text + "'");
        return std::nullopt;
      }
      default:
        return fail<ast::StmtPtr>({Tok::KwAwait, Tok::KwCompletion, Tok::KwSend,
                                   Tok::KwReceive, Tok::KwForeach, Tok::KwMap,
                                   Tok::KwAsync, Tok::KwFor, Tok::KwIf,
                                   Tok::Ident, Tok::RBrace});
    }
  }

  std::optional<ast::StmtPtr> parse_async_stmt() {
    SourceLoc loc = tok_.loc;
    switch (tok_.kind) {
      case Tok::KwSend: {
        next();
        auto s = new_stmt(ast::StmtKind::Send, loc);
        if (!expect(Tok::LParen)) return std::nullopt;
        s->value = parse_expr();
        if (!s->value) return std::nullopt;
        if (!expect(Tok::Comma)) return std::nullopt;
        auto sr = parse_stream_ref();
        if (!sr) return std::nullopt;
        s->stream = std::move(*sr);
        if (!expect(Tok::RParen)) return std::nullopt;
        return s;
      }
      case Tok::KwReceive: {
        next();
        auto s = new_stmt(ast::StmtKind::Receive, loc);
        if (!expect(Tok::LParen)) return std::nullopt;
        s->value = parse_lvalue();
        if (!s->value) return std::nullopt;
        if (!expect(Tok::Comma)) return std::nullopt;
        auto sr = parse_stream_ref();
        if (!sr) return std::nullopt;
        s->stream = std::move(*sr);
        if (!expect(Tok::RParen)) return std::nullopt;
        return s;
      }
      case Tok::KwForeach: {
        next();
        auto s = new_stmt(ast::StmtKind::Foreach, loc);
        // `foreach T k, T x in [range], receive(s) {` or
        // `foreach T x in receive(s) {`
        if (tok_.kind != Tok::KwType) return fail<ast::StmtPtr>({Tok::KwType});
        ElemType t1 = cur_elem_type();
        next();
        if (tok_.kind != Tok::Ident) return fail<ast::StmtPtr>({Tok::Ident});
        std::string v1 = tok_.text;
        next();
        if (accept(Tok::Comma)) {
          s->iter_type = t1;
          s->iter_var = v1;
          if (tok_.kind != Tok::KwType) return fail<ast::StmtPtr>({Tok::KwType});
          s->elem_type = cur_elem_type();
          next();
          if (tok_.kind != Tok::Ident) return fail<ast::StmtPtr>({Tok::Ident});
          s->elem_var = tok_.text;
          next();
          if (!expect(Tok::KwIn)) return std::nullopt;
          if (!expect(Tok::LBracket)) return std::nullopt;
          auto r = parse_range();
          if (!r) return std::nullopt;
          if (r->is_point()) {
            diags_.error("parse.foreach-range", r->loc,
                         "foreach index range must be of the form [lo:hi]");
            return std::nullopt;
          }
          s->range = std::move(*r);
          if (!expect(Tok::RBracket)) return std::nullopt;
          if (!expect(Tok::Comma)) return std::nullopt;
        } else {
          s->elem_type = t1;
          s->elem_var = v1;
          if (!expect(Tok::KwIn)) return std::nullopt;
        }
        if (!expect(Tok::KwReceive)) return std::nullopt;
        if (!expect(Tok::LParen)) return std::nullopt;
        auto sr = parse_stream_ref();
        if (!sr) return std::nullopt;
        s->stream = std::move(*sr);
        if (!expect(Tok::RParen)) return std::nullopt;
        if (!expect(Tok::LBrace)) return std::nullopt;
        if (!parse_stmt_list(s->body)) return std::nullopt;
        return s;
      }
      case Tok::KwMap: {
        next();
        auto s = new_stmt(ast::StmtKind::Map, loc);
        if (!parse_loop_header(*s)) return std::nullopt;
        if (!expect(Tok::LBrace)) return std::nullopt;
        if (!parse_stmt_list(s->body)) return std::nullopt;
        return s;
      }
      case Tok::KwAsync: {
        next();
        auto s = new_stmt(ast::StmtKind::Async, loc);
        if (!expect(Tok::LBrace)) return std::nullopt;
        if (!parse_stmt_list(s->body)) return std::nullopt;
        return s;
      }
      default:
        return fail<ast::StmtPtr>({Tok::KwSend, Tok::KwReceive, Tok::KwForeach,
                                   Tok::KwMap, Tok::KwAsync});
    }
  }

  bool parse_loop_header(ast::Stmt& s) {
    // `T i in [range]`
    if (tok_.kind != Tok::KwType) {
      syntax_error({Tok::KwType});
      return false;
    }
    s.iter_type = cur_elem_type();
    next();
    if (tok_.kind != Tok::Ident) {
      syntax_error({Tok::Ident});
      return false;
    }
    s.iter_var = tok_.text;
    next();
    if (!expect(Tok::KwIn)) return false;
    if (!expect(Tok::LBracket)) return false;
    auto r = parse_range();
    if (!r) return false;
    if (r->is_point()) {
      diags_.error("parse.loop-range", r->loc,
                   "loop range must be of the form [lo:hi] or [lo:hi:step]");
      return false;
    }
    s.range = std::move(*r);
    if (!expect(Tok::RBracket)) return false;
    return true;
  }

  std::optional<ast::StreamRef> parse_stream_ref() {
    ast::StreamRef sr;
    sr.loc = tok_.loc;
    if (tok_.kind != Tok::Ident) return fail<ast::StreamRef>({Tok::Ident});
    sr.name = tok_.text;
    next();
    if (accept(Tok::LBracket)) {
      sr.kind = ast::StreamRef::Kind::Arg;
      sr.arg_index = parse_expr();
      if (!sr.arg_index) return std::nullopt;
      if (!expect(Tok::RBracket)) return std::nullopt;
      return sr;
    }
    if (accept(Tok::KwIf)) {
      sr.kind = ast::StreamRef::Kind::RelCond;
      sr.cond = parse_expr();
      if (!sr.cond) return std::nullopt;
      if (!expect(Tok::KwElse)) return std::nullopt;
      if (tok_.kind != Tok::Ident) return fail<ast::StreamRef>({Tok::Ident});
      sr.alt = tok_.text;
      next();
      return sr;
    }
    sr.kind = ast::StreamRef::Kind::Rel;
    return sr;
  }

  // -- expressions -----------------------------------------------------------

  ast::ExprPtr parse_lvalue() {
    if (tok_.kind != Tok::Ident) {
      syntax_error({Tok::Ident});
      return nullptr;
    }
    auto e = std::make_unique<ast::Expr>();
    e->loc = tok_.loc;
    e->name = tok_.text;
    next();
    if (accept(Tok::LBracket)) {
      e->kind = ast::Expr::Kind::Index;
      while (true) {
        auto ix = parse_expr();
        if (!ix) return nullptr;
        e->indices.push_back(std::move(ix));
        if (!accept(Tok::Comma)) break;
      }
      if (!expect(Tok::RBracket)) return nullptr;
    } else {
      e->kind = ast::Expr::Kind::Var;
    }
    return e;
  }

  ast::ExprPtr parse_expr() { return parse_or(); }

  ast::ExprPtr parse_or() {
    auto lhs = parse_and();
    if (!lhs) return nullptr;
    while (tok_.kind == Tok::OrOr) {
      SourceLoc loc = tok_.loc;
      next();
      auto rhs = parse_and();
      if (!rhs) return nullptr;
      lhs = make_bin(ast::BinOp::Or, std::move(lhs), std::move(rhs), loc);
    }
    return lhs;
  }

  ast::ExprPtr parse_and() {
    auto lhs = parse_cmp();
    if (!lhs) return nullptr;
    while (tok_.kind == Tok::AndAnd) {
      SourceLoc loc = tok_.loc;
      next();
      auto rhs = parse_cmp();
      if (!rhs) return nullptr;
      lhs = make_bin(ast::BinOp::And, std::move(lhs), std::move(rhs), loc);
    }
    return lhs;
  }

  ast::ExprPtr parse_cmp() {
    auto lhs = parse_add();
    if (!lhs) return nullptr;
    while (true) {
      ast::BinOp op;
      switch (tok_.kind) {
        case Tok::EqEq: op = ast::BinOp::Eq; break;
        case Tok::NotEq: op = ast::BinOp::Ne; break;
        case Tok::Lt: op = ast::BinOp::Lt; break;
        case Tok::Le: op = ast::BinOp::Le; break;
        case Tok::Gt: op = ast::BinOp::Gt; break;
        case Tok::Ge: op = ast::BinOp::Ge; break;
        default: return lhs;
      }
      SourceLoc loc = tok_.loc;
      next();
      auto rhs = parse_add();
      if (!rhs) return nullptr;
      lhs = make_bin(op, std::move(lhs), std::move(rhs), loc);
    }
  }

  ast::ExprPtr parse_add() {
    auto lhs = parse_mul();
    if (!lhs) return nullptr;
    while (tok_.kind == Tok::Plus || tok_.kind == Tok::Minus) {
      ast::BinOp op = tok_.kind == Tok::Plus ? ast::BinOp::Add : ast::BinOp::Sub;
      SourceLoc loc = tok_.loc;
      next();
      auto rhs = parse_mul();
      if (!rhs) return nullptr;
      lhs = make_bin(op, std::move(lhs), std::move(rhs), loc);
    }
    return lhs;
  }

  ast::ExprPtr parse_mul() {
    auto lhs = parse_unary();
    if (!lhs) return nullptr;
    while (tok_.kind == Tok::Star || tok_.kind == Tok::Slash ||
           tok_.kind == Tok::Percent) {
      ast::BinOp op = tok_.kind == Tok::Star    ? ast::BinOp::Mul
                      : tok_.kind == Tok::Slash ? ast::BinOp::Div
                                                : ast::BinOp::Mod;
      SourceLoc loc = tok_.loc;
      next();
      auto rhs = parse_unary();
      if (!rhs) return nullptr;
      lhs = make_bin(op, std::move(lhs), std::move(rhs), loc);
    }
    return lhs;
  }

  ast::ExprPtr parse_unary() {
    if (tok_.kind == Tok::Minus || tok_.kind == Tok::Not) {
      auto e = std::make_unique<ast::Expr>();
      e->kind = ast::Expr::Kind::Un;
      e->un_op = tok_.kind == Tok::Minus ? ast::UnOp::Neg : ast::UnOp::Not;
      e->loc = tok_.loc;
      next();
      e->lhs = parse_unary();
      if (!e->lhs) return nullptr;
      return e;
    }
    return parse_primary();
  }

  ast::ExprPtr parse_primary() {
    SourceLoc loc = tok_.loc;
    switch (tok_.kind) {
      case Tok::Int: {
        auto e = std::make_unique<ast::Expr>();
        e->kind = ast::Expr::Kind::IntLit;
        e->int_val = tok_.int_val;
        e->loc = loc;
        next();
        return e;
      }
      case Tok::Float: {
        auto e = std::make_unique<ast::Expr>();
        e->kind = ast::Expr::Kind::FloatLit;
        e->float_val = tok_.float_val;
        e->loc = loc;
        next();
        return e;
      }
      case Tok::Ident:
        return parse_lvalue();
      case Tok::LParen: {
        next();
        auto e = parse_expr();
        if (!e) return nullptr;
        if (!expect(Tok::RParen)) return nullptr;
        return e;
      }
      default:
        syntax_error({Tok::Int, Tok::Float, Tok::Ident, Tok::LParen});
        return nullptr;
    }
  }

  ast::ExprPtr make_bin(ast::BinOp op, ast::ExprPtr l, ast::ExprPtr r,
                        SourceLoc loc) {
    auto e = std::make_unique<ast::Expr>();
    e->kind = ast::Expr::Kind::Bin;
    e->bin_op = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    e->loc = loc;
    return e;
  }

  ast::StmtPtr new_stmt(ast::StmtKind k, SourceLoc loc) {
    auto s = std::make_unique<ast::Stmt>();
    s->kind = k;
    s->loc = loc;
    s->site_id = next_site_++;
    return s;
  }

  Lexer lex_;
  Diagnostics& diags_;
  Token tok_, peek_;
  bool reported_ = false;
  int next_site_ = 0;
  int next_block_ = 0;
};

inline std::optional<ast::Kernel> parse_kernel(std::string_view src,
                                               Diagnostics& diags) {
  Parser p(src, diags);
  return p.parse_kernel();
}

inline ast::ExprPtr parse_expression(std::string_view src, Diagnostics& diags) {
  Parser p(src, diags);
  return p.parse_full_expression();
}

}  // namespace spada
