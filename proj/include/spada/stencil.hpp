// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal textual stencil frontend: fields over a symbolic (I, J, K) domain,
// assignments with constant-offset accesses, PARALLEL or FORWARD vertical
// strategy. Lowered onto one vertical column per PE through placement,
// dataflow and compute passes with halo analysis.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/parser.hpp"

namespace spada {

enum class VerticalStrategy { Parallel, Forward };

struct StencilField {
  std::string name;
  ElemType type = ElemType::F32;
  SourceLoc loc;
};

struct StencilAccess {
  std::string field;
  int di = 0, dj = 0, dk = 0;
};

struct StencilStmt {
  std::string target;
  ast::ExprPtr rhs;
  std::vector<StencilAccess> accesses;
  SourceLoc loc;
};

struct StencilSpec {
  std::string name;
  std::string dims[3] = {"I", "J", "K"};
  VerticalStrategy vertical = VerticalStrategy::Parallel;
  std::vector<StencilField> fields;
  std::vector<StencilStmt> stmts;

  const StencilField* find_field(const std::string& n) const {
    for (const auto& f : fields)
      if (f.name == n) return &f;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace stencil_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline int paren_balance(const std::string& s) {
  int d = 0;
  for (char c : s) {
    if (c == '(') ++d;
    if (c == ')') --d;
  }
  return d;
}

inline bool const_offset(const ast::Expr& e, int& out) {
  if (e.kind == ast::Expr::Kind::IntLit) {
    out = (int)e.int_val;
    return true;
  }
  if (e.kind == ast::Expr::Kind::Un && e.un_op == ast::UnOp::Neg &&
      e.lhs->kind == ast::Expr::Kind::IntLit) {
    out = -(int)e.lhs->int_val;
    return true;
  }
  return false;
}

}  // namespace stencil_detail

/// Parses the documented stencil mini-syntax:
///   stencil <name> {
///     domain (I, J, K)
///     computation PARALLEL | FORWARD
///     field f32 <name> ...
///     <field> = <expression over field[di, dj, dk] accesses>
///   }
inline std::optional<StencilSpec> parse_stencil(const std::string& source,
                                                Diagnostics& diags) {
  StencilSpec spec;
  std::istringstream in(source);
  std::string raw;
  int lineno = 0;
  bool in_body = false, closed = false;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto slashes = line.find("//");
    if (slashes != std::string::npos) line = line.substr(0, slashes);
    line = stencil_detail::trim(line);
    if (line.empty()) continue;
    SourceLoc loc{lineno, 1};

    if (!in_body) {
      std::istringstream ls(line);
      std::string kw, name, brace;
      ls >> kw >> name >> brace;
      if (kw != "stencil" || name.empty() || brace != "{") {
        diags.error("stencil.syntax", loc, "expected `stencil <name> {`");
        return std::nullopt;
      }
      spec.name = name;
      in_body = true;
      continue;
    }
    if (line == "}") {
      closed = true;
      break;
    }
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "domain") {
      std::string rest;
      std::getline(ls, rest);
      rest = stencil_detail::trim(rest);
      if (rest.size() < 2 || rest.front() != '(' || rest.back() != ')') {
        diags.error("stencil.syntax", loc, "expected `domain (I, J, K)`");
        return std::nullopt;
      }
      rest = rest.substr(1, rest.size() - 2);
      std::istringstream ds(rest);
      std::string d;
      int n = 0;
      while (std::getline(ds, d, ',')) {
        d = stencil_detail::trim(d);
        if (n < 3) spec.dims[n] = d;
        ++n;
      }
      if (n != 3) {
        diags.error("stencil.syntax", loc, "domain must have three dimensions");
        return std::nullopt;
      }
    } else if (kw == "computation") {
      std::string v;
      ls >> v;
      if (v == "PARALLEL") spec.vertical = VerticalStrategy::Parallel;
      else if (v == "FORWARD") spec.vertical = VerticalStrategy::Forward;
      else {
        diags.error("stencil.syntax", loc,
                    "computation must be PARALLEL or FORWARD");
        return std::nullopt;
      }
    } else if (kw == "field") {
      std::string t, name;
      ls >> t >> name;
      auto et = elem_type_from_name(t);
      if (!et || name.empty()) {
        diags.error("stencil.syntax", loc, "expected `field <type> <name>`");
        return std::nullopt;
      }
      spec.fields.push_back({name, *et, loc});
    } else {
      // assignment statement; join continuation lines while parens are open
      std::string stmt_text = line;
      while (stencil_detail::paren_balance(stmt_text) > 0) {
        if (!std::getline(in, raw)) break;
        ++lineno;
        std::string cont = raw;
        auto h2 = cont.find('#');
        if (h2 != std::string::npos) cont = cont.substr(0, h2);
        stmt_text += " " + stencil_detail::trim(cont);
      }
      auto eq = stmt_text.find('=');
      if (eq == std::string::npos) {
        diags.error("stencil.syntax", loc, "expected an assignment");
        return std::nullopt;
      }
      StencilStmt st;
      st.loc = loc;
      st.target = stencil_detail::trim(stmt_text.substr(0, eq));
      std::string rhs_text = stencil_detail::trim(stmt_text.substr(eq + 1));
      Diagnostics ediags;
      st.rhs = parse_expression(rhs_text, ediags);
      if (!st.rhs) {
        diags.error("stencil.syntax", loc,
                    "cannot parse the right-hand side: " + rhs_text);
        return std::nullopt;
      }
      spec.stmts.push_back(std::move(st));
    }
  }
  if (!in_body || !closed) {
    diags.error("stencil.syntax", {lineno, 1}, "unterminated stencil block");
    return std::nullopt;
  }

  // resolve accesses and validate offsets
  for (auto& st : spec.stmts) {
    if (!spec.find_field(st.target)) {
      diags.error("stencil.unknown-field", st.loc,
                  "assignment to unknown field '" + st.target + "'");
      return std::nullopt;
    }
    bool ok = true;
    ast::walk_exprs(*st.rhs, [&](const ast::Expr& e) {
      if (e.kind == ast::Expr::Kind::Var) {
        diags.error("stencil.access", e.loc,
                    "field '" + e.name +
                        "' must be accessed with [di, dj, dk] offsets");
        ok = false;
      }
      if (e.kind != ast::Expr::Kind::Index) return;
      if (!spec.find_field(e.name)) {
        diags.error("stencil.unknown-field", e.loc,
                    "unknown field '" + e.name + "'");
        ok = false;
        return;
      }
      if (e.indices.size() != 3) {
        diags.error("stencil.access", e.loc,
                    "field accesses take exactly three offsets");
        ok = false;
        return;
      }
      StencilAccess acc;
      acc.field = e.name;
      int off[3] = {0, 0, 0};
      for (int d = 0; d < 3; ++d) {
        if (!stencil_detail::const_offset(*e.indices[d], off[d])) {
          diags.error("stencil.nonconstant-offset", e.loc,
                      "offsets must be integer constants");
          ok = false;
          return;
        }
      }
      acc.di = off[0];
      acc.dj = off[1];
      acc.dk = off[2];
      st.accesses.push_back(acc);
    });
    if (!ok) return std::nullopt;
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Analysis
// ---------------------------------------------------------------------------

struct StencilIR {
  StencilSpec spec;
  // distinct nonzero horizontal offsets across all statements
  std::vector<std::pair<int, int>> horizontal_offsets;
  // halo extents per direction (max |offset|)
  int halo_px = 0, halo_nx = 0, halo_py = 0, halo_ny = 0;
  bool multi_hop_required = false;
  bool bad_dependency = false;  // unsupported read of a computed field
  std::set<std::string> inputs;   // fields read before written
  std::set<std::string> outputs;  // fields written
  int inter_pe_accesses = 0;

  bool has_horizontal() const { return !horizontal_offsets.empty(); }
};

/// Classifies accesses (local vs inter-PE), computes halo extents, and
/// derives field roles. One (i, j) column per PE with the full vertical
/// extent, so dk offsets are always local.
inline StencilIR analyze(const StencilSpec& spec) {
  StencilIR ir;
  ir.spec.name = spec.name;
  for (int d = 0; d < 3; ++d) ir.spec.dims[d] = spec.dims[d];
  ir.spec.vertical = spec.vertical;
  ir.spec.fields = spec.fields;
  for (const auto& st : spec.stmts) {
    StencilStmt copy;
    copy.target = st.target;
    copy.rhs = st.rhs->clone();
    copy.accesses = st.accesses;
    copy.loc = st.loc;
    ir.spec.stmts.push_back(std::move(copy));
  }

  std::set<std::pair<int, int>> offs;
  for (const auto& st : ir.spec.stmts) {
    for (const auto& acc : st.accesses) {
      if (!ir.outputs.count(acc.field)) ir.inputs.insert(acc.field);
      if (ir.outputs.count(acc.field)) {
        // reads of computed fields must respect the per-column schedule
        bool bad = ir.spec.vertical == VerticalStrategy::Parallel
                       ? acc.dk != 0
                       : acc.dk > 0;
        if (acc.di != 0 || acc.dj != 0) bad = true;
        if (bad) ir.bad_dependency = true;
      }
      if (acc.di != 0 || acc.dj != 0) {
        ++ir.inter_pe_accesses;
        offs.insert({acc.di, acc.dj});
        ir.halo_px = std::max(ir.halo_px, acc.di);
        ir.halo_nx = std::max(ir.halo_nx, -acc.di);
        ir.halo_py = std::max(ir.halo_py, acc.dj);
        ir.halo_ny = std::max(ir.halo_ny, -acc.dj);
        if (std::abs(acc.di) + std::abs(acc.dj) > 1) ir.multi_hop_required = true;
      }
    }
    ir.outputs.insert(st.target);
  }
  ir.horizontal_offsets.assign(offs.begin(), offs.end());
  return ir;
}

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

namespace stencil_detail {

inline std::string dir_tag(int di, int dj) {
  if (di == 1) return "e";
  if (di == -1) return "w";
  if (dj == 1) return "n";
  return "s";
}

struct Zone {
  // [lo, hi) as expressions over the symbolic domain
  ast::ExprPtr lo, hi;
  bool at_low = false, at_high = false;  // touches the domain boundary
  Zone clone() const {
    Zone z;
    z.lo = lo->clone();
    z.hi = hi->clone();
    z.at_low = at_low;
    z.at_high = at_high;
    return z;
  }
};

inline std::vector<Zone> boundary_zones(const std::string& dim, bool split) {
  std::vector<Zone> zs;
  if (!split) {
    Zone z;
    z.lo = ast::Expr::make_int(0);
    z.hi = ast::Expr::make_var(dim);
    z.at_low = z.at_high = true;  // both boundaries inside the single zone
    zs.push_back(std::move(z));
    return zs;
  }
  Zone lo;
  lo.lo = ast::Expr::make_int(0);
  lo.hi = ast::Expr::make_int(1);
  lo.at_low = true;
  Zone mid;
  mid.lo = ast::Expr::make_int(1);
  {
    auto e = std::make_unique<ast::Expr>();
    e->kind = ast::Expr::Kind::Bin;
    e->bin_op = ast::BinOp::Sub;
    e->lhs = ast::Expr::make_var(dim);
    e->rhs = ast::Expr::make_int(1);
    mid.hi = std::move(e);
  }
  Zone hi;
  hi.lo = mid.hi->clone();
  hi.hi = ast::Expr::make_var(dim);
  hi.at_high = true;
  zs.push_back(std::move(lo));
  zs.push_back(std::move(mid));
  zs.push_back(std::move(hi));
  return zs;
}

inline ast::ExprPtr bin(ast::BinOp op, ast::ExprPtr l, ast::ExprPtr r) {
  auto e = std::make_unique<ast::Expr>();
  e->kind = ast::Expr::Kind::Bin;
  e->bin_op = op;
  e->lhs = std::move(l);
  e->rhs = std::move(r);
  return e;
}

/// An access is valid in a boundary class when the needed neighbor exists.
inline bool access_valid(const StencilAccess& a, const Zone& zx, const Zone& zy,
                         int kzone, int klo_off, int khi_off) {
  if (a.di > 0 && zx.at_high) return false;
  if (a.di < 0 && zx.at_low) return false;
  if (a.dj > 0 && zy.at_high) return false;
  if (a.dj < 0 && zy.at_low) return false;
  if (a.dk < 0 && kzone == 0 && klo_off > 0) return false;
  if (a.dk > 0 && kzone == 2 && khi_off > 0) return false;
  return true;
}

/// Splits the top-level additive chain of an expression into signed terms.
inline void additive_terms(const ast::Expr& e, bool negate,
                           std::vector<std::pair<const ast::Expr*, bool>>& out) {
  if (e.kind == ast::Expr::Kind::Bin &&
      (e.bin_op == ast::BinOp::Add || e.bin_op == ast::BinOp::Sub)) {
    additive_terms(*e.lhs, negate, out);
    additive_terms(*e.rhs, e.bin_op == ast::BinOp::Sub ? !negate : negate, out);
    return;
  }
  out.push_back({&e, negate});
}

inline bool term_valid(const ast::Expr& term, const Zone& zx, const Zone& zy,
                       int kzone, int klo_off, int khi_off) {
  bool valid = true;
  ast::walk_exprs(term, [&](const ast::Expr& x) {
    if (x.kind != ast::Expr::Kind::Index || x.indices.size() != 3) return;
    StencilAccess a;
    a.field = x.name;
    const_offset(*x.indices[0], a.di);
    const_offset(*x.indices[1], a.dj);
    const_offset(*x.indices[2], a.dk);
    if (!access_valid(a, zx, zy, kzone, klo_off, khi_off)) valid = false;
  });
  return valid;
}

/// Rewrites a stencil term into a SPADA expression over the local column
/// and halo buffers, indexed by the vertical loop variable.
inline ast::ExprPtr rewrite_term(const ast::Expr& e, const std::string& kvar) {
  if (e.kind == ast::Expr::Kind::Index && e.indices.size() == 3) {
    StencilAccess a;
    a.field = e.name;
    const_offset(*e.indices[0], a.di);
    const_offset(*e.indices[1], a.dj);
    const_offset(*e.indices[2], a.dk);
    std::string base = e.name;
    if (a.di != 0 || a.dj != 0) base = e.name + "_h" + dir_tag(a.di, a.dj);
    auto ix = std::make_unique<ast::Expr>();
    ix->kind = ast::Expr::Kind::Index;
    ix->name = base;
    ast::ExprPtr sub = ast::Expr::make_var(kvar);
    if (a.dk > 0) sub = bin(ast::BinOp::Add, std::move(sub), ast::Expr::make_int(a.dk));
    if (a.dk < 0) sub = bin(ast::BinOp::Sub, std::move(sub), ast::Expr::make_int(-a.dk));
    ix->indices.push_back(std::move(sub));
    return ix;
  }
  auto c = std::make_unique<ast::Expr>();
  c->kind = e.kind;
  c->loc = e.loc;
  c->int_val = e.int_val;
  c->float_val = e.float_val;
  c->name = e.name;
  c->bin_op = e.bin_op;
  c->un_op = e.un_op;
  if (e.lhs) c->lhs = rewrite_term(*e.lhs, kvar);
  if (e.rhs) c->rhs = rewrite_term(*e.rhs, kvar);
  for (const auto& ix : e.indices) c->indices.push_back(rewrite_term(*ix, kvar));
  return c;
}

/// Rebuilds the kept additive terms into a left-associated chain; null when
/// every term was dropped.
inline ast::ExprPtr rebuild_terms(
    const std::vector<std::pair<const ast::Expr*, bool>>& terms,
    const Zone& zx, const Zone& zy, int kzone, int klo_off, int khi_off,
    const std::string& kvar) {
  ast::ExprPtr acc;
  for (const auto& [term, neg] : terms) {
    if (!term_valid(*term, zx, zy, kzone, klo_off, khi_off)) continue;
    ast::ExprPtr t = rewrite_term(*term, kvar);
    if (!acc) {
      if (neg) {
        auto u = std::make_unique<ast::Expr>();
        u->kind = ast::Expr::Kind::Un;
        u->un_op = ast::UnOp::Neg;
        u->lhs = std::move(t);
        acc = std::move(u);
      } else {
        acc = std::move(t);
      }
    } else {
      acc = bin(neg ? ast::BinOp::Sub : ast::BinOp::Add, std::move(acc),
                std::move(t));
    }
  }
  return acc;
}

inline ast::StmtPtr make_stmt(ast::StmtKind kind, int& site) {
  auto s = std::make_unique<ast::Stmt>();
  s->kind = kind;
  s->site_id = site++;
  return s;
}

}  // namespace stencil_detail

/// Lowers the stencil IR to a SPADA kernel: placement (local columns plus
/// per-direction halo buffers), dataflow (one stream per distinct nonzero
/// horizontal offset), and compute (boundary rectangle classes with
/// term-skipped bodies; `map` over k for PARALLEL, `for` over k for FORWARD).
inline std::optional<ast::Kernel> lower(const StencilIR& ir, Diagnostics& diags) {
  using namespace stencil_detail;
  if (ir.multi_hop_required) {
    diags.error("stencil.halo-too-large", SourceLoc{},
                "horizontal accesses beyond distance one require multi-hop "
                "routing, which is not automatic");
    return std::nullopt;
  }
  if (ir.bad_dependency) {
    diags.error("stencil.dependency", SourceLoc{},
                "computed fields may only be read at the same point "
                "(or below, under FORWARD)");
    return std::nullopt;
  }
  const StencilSpec& spec = ir.spec;
  const std::string I = spec.dims[0], J = spec.dims[1], K = spec.dims[2];
  int site = 0;

  ast::Kernel k;
  k.name = spec.name;
  k.params = {I, J, K};

  auto grid_range = [&](const std::string& dim) {
    ast::RangeExpr r;
    r.lo = ast::Expr::make_int(0);
    r.hi = ast::Expr::make_var(dim);
    return r;
  };
  auto full_subgrid = [&]() {
    ast::Subgrid sg;
    sg.dims[0] = {ElemType::I32, "i"};
    sg.dims[1] = {ElemType::I32, "j"};
    sg.ranges[0] = grid_range(I);
    sg.ranges[1] = grid_range(J);
    return sg;
  };

  // arguments: inputs stream in, outputs stream out; extent = I*J slices
  for (const auto& f : spec.fields) {
    bool is_in = ir.inputs.count(f.name) > 0;
    bool is_out = ir.outputs.count(f.name) > 0;
    if (is_in && !is_out) {
      ast::ArgDecl a;
      a.name = f.name + "_in";
      a.type = f.type;
      a.mode = ast::ArgMode::ReadOnly;
      a.extent = bin(ast::BinOp::Mul, ast::Expr::make_var(I),
                     ast::Expr::make_var(J));
      k.args.push_back(std::move(a));
    }
    if (is_out) {
      ast::ArgDecl a;
      a.name = f.name + "_out";
      a.type = f.type;
      a.mode = ast::ArgMode::WriteOnly;
      a.extent = bin(ast::BinOp::Mul, ast::Expr::make_var(I),
                     ast::Expr::make_var(J));
      k.args.push_back(std::move(a));
    }
  }

  // placement: the local column per field, plus halo buffers per direction
  ast::PlaceBlock place;
  place.sg = full_subgrid();
  for (const auto& f : spec.fields) {
    ast::PlaceDecl d;
    d.type = f.type;
    d.shape.push_back(ast::Expr::make_var(K));
    d.name = f.name;
    place.decls.push_back(std::move(d));
  }
  std::set<std::pair<std::string, std::string>> halo_bufs;  // field, tag
  for (const auto& st : spec.stmts)
    for (const auto& acc : st.accesses)
      if (acc.di != 0 || acc.dj != 0)
        halo_bufs.insert({acc.field, dir_tag(acc.di, acc.dj)});
  for (const auto& [field, tag] : halo_bufs) {
    ast::PlaceDecl d;
    d.type = spec.find_field(field)->type;
    d.shape.push_back(ast::Expr::make_var(K));
    d.name = field + "_h" + tag;
    place.decls.push_back(std::move(d));
  }
  k.items.emplace_back(std::move(place));

  // phase 1: load the input fields
  if (!ir.inputs.empty()) {
    ast::Phase load;
    ast::ComputeBlock cb;
    cb.sg = full_subgrid();
    cb.block_id = 0;
    for (const auto& fname : ir.inputs) {
      if (ir.outputs.count(fname)) continue;
      auto s = make_stmt(ast::StmtKind::Receive, site);
      s->awaited = true;
      s->value = ast::Expr::make_var(fname);
      s->stream.kind = ast::StreamRef::Kind::Arg;
      s->stream.name = fname + "_in";
      s->stream.arg_index = bin(
          ast::BinOp::Add,
          bin(ast::BinOp::Mul, ast::Expr::make_var("i"), ast::Expr::make_var(J)),
          ast::Expr::make_var("j"));
      cb.body.push_back(std::move(s));
    }
    load.blocks.emplace_back(std::move(cb));
    k.items.emplace_back(std::move(load));
  }

  // phase 2: halo exchange and compute
  {
    ast::Phase phase;
    if (ir.has_horizontal()) {
      ast::DataflowBlock df;
      df.sg = full_subgrid();
      for (const auto& [di, dj] : ir.horizontal_offsets) {
        ast::StreamDecl sd;
        sd.name = "flow_" + dir_tag(di, dj);
        sd.type = ElemType::F32;
        sd.dx = -di;  // data moves from the accessed neighbor to the reader
        sd.dy = -dj;
        df.streams.push_back(std::move(sd));
      }
      phase.blocks.emplace_back(std::move(df));
    }

    // which fields travel on each offset (deterministic order)
    std::map<std::pair<int, int>, std::vector<std::string>> fields_on;
    for (const auto& st : spec.stmts)
      for (const auto& acc : st.accesses)
        if (acc.di != 0 || acc.dj != 0) {
          auto& v = fields_on[{acc.di, acc.dj}];
          if (std::find(v.begin(), v.end(), acc.field) == v.end())
            v.push_back(acc.field);
        }

    int kzone_lo = 0, kzone_hi = 0;
    for (const auto& st : spec.stmts)
      for (const auto& acc : st.accesses) {
        kzone_lo = std::max(kzone_lo, -acc.dk);
        kzone_hi = std::max(kzone_hi, acc.dk);
      }

    auto xs = boundary_zones(I, ir.halo_px > 0 || ir.halo_nx > 0);
    auto ys = boundary_zones(J, ir.halo_py > 0 || ir.halo_ny > 0);
    int block_id = 1;
    for (const auto& zx : xs) {
      for (const auto& zy : ys) {
        ast::ComputeBlock cb;
        cb.sg.dims[0] = {ElemType::I32, "i"};
        cb.sg.dims[1] = {ElemType::I32, "j"};
        cb.sg.ranges[0].lo = zx.lo->clone();
        cb.sg.ranges[0].hi = zx.hi->clone();
        cb.sg.ranges[1].lo = zy.lo->clone();
        cb.sg.ranges[1].hi = zy.hi->clone();
        cb.block_id = block_id++;

        // receives first, posted asynchronously; several buffers on one
        // stream are consumed in an ordered chain
        int cidx = 0;
        for (const auto& [off, fields] : fields_on) {
          StencilAccess probe{fields.front(), off.first, off.second, 0};
          if (!access_valid(probe, zx, zy, 1, 0, 0)) continue;
          std::string tag = dir_tag(off.first, off.second);
          if (fields.size() == 1) {
            auto r = make_stmt(ast::StmtKind::Receive, site);
            r->completion = "r" + std::to_string(cidx++);
            r->value = ast::Expr::make_var(fields.front() + "_h" + tag);
            r->stream.kind = ast::StreamRef::Kind::Rel;
            r->stream.name = "flow_" + tag;
            cb.body.push_back(std::move(r));
          } else {
            auto as = make_stmt(ast::StmtKind::Async, site);
            as->completion = "r" + std::to_string(cidx++);
            for (const auto& f : fields) {
              auto r = make_stmt(ast::StmtKind::Receive, site);
              r->awaited = true;
              r->value = ast::Expr::make_var(f + "_h" + tag);
              r->stream.kind = ast::StreamRef::Kind::Rel;
              r->stream.name = "flow_" + tag;
              as->body.push_back(std::move(r));
            }
            cb.body.push_back(std::move(as));
          }
        }
        // sends overlap across streams; several fields on one stream stay
        // ordered through an awaited chain inside one async block
        int sidx = 0;
        for (const auto& [off, fields] : fields_on) {
          StencilAccess mirror{fields.front(), -off.first, -off.second, 0};
          if (!access_valid(mirror, zx, zy, 1, 0, 0)) continue;
          std::string stream = "flow_" + dir_tag(off.first, off.second);
          if (fields.size() == 1) {
            auto s = make_stmt(ast::StmtKind::Send, site);
            s->completion = "s" + std::to_string(sidx++);
            s->value = ast::Expr::make_var(fields.front());
            s->stream.kind = ast::StreamRef::Kind::Rel;
            s->stream.name = stream;
            cb.body.push_back(std::move(s));
          } else {
            auto as = make_stmt(ast::StmtKind::Async, site);
            as->completion = "s" + std::to_string(sidx++);
            for (const auto& f : fields) {
              auto s = make_stmt(ast::StmtKind::Send, site);
              s->awaited = true;
              s->value = ast::Expr::make_var(f);
              s->stream.kind = ast::StreamRef::Kind::Rel;
              s->stream.name = stream;
              as->body.push_back(std::move(s));
            }
            cb.body.push_back(std::move(as));
          }
        }
        if (cidx > 0 || sidx > 0) {
          auto aw = make_stmt(ast::StmtKind::AwaitAll, site);
          cb.body.push_back(std::move(aw));
        }

        // compute: vertical zones with term-skipped bodies
        struct KZone {
          ast::ExprPtr lo, hi;
          int idx;
        };
        std::vector<KZone> kzones;
        if (kzone_lo == 0 && kzone_hi == 0) {
          KZone z;
          z.lo = ast::Expr::make_int(0);
          z.hi = ast::Expr::make_var(K);
          z.idx = 1;
          kzones.push_back(std::move(z));
        } else {
          KZone lo;
          lo.lo = ast::Expr::make_int(0);
          lo.hi = ast::Expr::make_int(kzone_lo);
          lo.idx = 0;
          KZone mid;
          mid.lo = ast::Expr::make_int(kzone_lo);
          mid.hi = kzone_hi > 0
                       ? bin(ast::BinOp::Sub, ast::Expr::make_var(K),
                             ast::Expr::make_int(kzone_hi))
                       : ast::Expr::make_var(K);
          mid.idx = 1;
          KZone hi;
          hi.lo = mid.hi->clone();
          hi.hi = ast::Expr::make_var(K);
          hi.idx = 2;
          if (kzone_lo > 0) kzones.push_back(std::move(lo));
          kzones.push_back(std::move(mid));
          if (kzone_hi > 0) kzones.push_back(std::move(hi));
        }

        bool forward = spec.vertical == VerticalStrategy::Forward;
        for (const auto& kz : kzones) {
          std::vector<ast::StmtPtr> body;
          for (const auto& st : spec.stmts) {
            std::vector<std::pair<const ast::Expr*, bool>> terms;
            additive_terms(*st.rhs, false, terms);
            auto rhs = rebuild_terms(terms, zx, zy, kz.idx, kzone_lo, kzone_hi,
                                     "k");
            if (!rhs) continue;  // every term skipped: output untouched
            auto asg = make_stmt(ast::StmtKind::Assign, site);
            auto lhs = std::make_unique<ast::Expr>();
            lhs->kind = ast::Expr::Kind::Index;
            lhs->name = st.target;
            lhs->indices.push_back(ast::Expr::make_var("k"));
            asg->lhs = std::move(lhs);
            asg->rhs = std::move(rhs);
            body.push_back(std::move(asg));
          }
          if (body.empty()) continue;
          if (forward) {
            auto loop = make_stmt(ast::StmtKind::For, site);
            loop->iter_type = ElemType::I32;
            loop->iter_var = "k";
            ast::RangeExpr r;
            r.lo = kz.lo->clone();
            r.hi = kz.hi->clone();
            loop->range = std::move(r);
            loop->body = std::move(body);
            cb.body.push_back(std::move(loop));
          } else {
            // one parallel map per statement keeps bulk ops recognizable
            for (auto& asg : body) {
              auto m = make_stmt(ast::StmtKind::Map, site);
              m->awaited = true;
              m->iter_type = ElemType::I32;
              m->iter_var = "k";
              ast::RangeExpr r;
              r.lo = kz.lo->clone();
              r.hi = kz.hi->clone();
              m->range = std::move(r);
              m->body.push_back(std::move(asg));
              cb.body.push_back(std::move(m));
            }
          }
        }
        phase.blocks.emplace_back(std::move(cb));
      }
    }
    k.items.emplace_back(std::move(phase));
  }

  // phase 3: stream the outputs back
  if (!ir.outputs.empty()) {
    ast::Phase store;
    ast::ComputeBlock cb;
    cb.sg = full_subgrid();
    cb.block_id = 99;
    for (const auto& fname : ir.outputs) {
      auto s = make_stmt(ast::StmtKind::Send, site);
      s->awaited = true;
      s->value = ast::Expr::make_var(fname);
      s->stream.kind = ast::StreamRef::Kind::Arg;
      s->stream.name = fname + "_out";
      s->stream.arg_index = bin(
          ast::BinOp::Add,
          bin(ast::BinOp::Mul, ast::Expr::make_var("i"), ast::Expr::make_var(J)),
          ast::Expr::make_var("j"));
      cb.body.push_back(std::move(s));
    }
    store.blocks.emplace_back(std::move(cb));
    k.items.emplace_back(std::move(store));
  }

  k.next_site_id = site;
  // normalize ids over the assembled kernel
  int block = 0;
  for (auto& item : k.items)
    if (auto* ph = std::get_if<ast::Phase>(&item))
      for (auto& blk : ph->blocks)
        if (auto* cb = std::get_if<ast::ComputeBlock>(&blk))
          cb->block_id = block++;
  k.next_block_id = block;
  return k;
}

}  // namespace spada
