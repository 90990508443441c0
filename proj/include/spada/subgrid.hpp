// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spada/ast.hpp"
#include "spada/diag.hpp"

namespace spada {

using ParamMap = std::map<std::string, int64_t>;

struct PECoord {
  int x = 0, y = 0;
  auto operator<=>(const PECoord&) const = default;
};

using PESet = std::vector<PECoord>;  // sorted, unique

/// Evaluates an integer-valued compile-time expression over `env`
/// (kernel params plus, where applicable, PE coordinate variables).
/// Overflow is an error, not wraparound.
inline std::optional<int64_t> eval_const_int(const ast::Expr& e,
                                             const ParamMap& env,
                                             Diagnostics& diags) {
  auto err = [&](const std::string& m) -> std::optional<int64_t> {
    diags.error("subgrid.eval", e.loc, m);
    return std::nullopt;
  };
  switch (e.kind) {
    case ast::Expr::Kind::IntLit:
      return e.int_val;
    case ast::Expr::Kind::FloatLit:
      return err("expected an integer expression");
    case ast::Expr::Kind::Var: {
      auto it = env.find(e.name);
      if (it == env.end())
        return err("unbound parameter '" + e.name + "'");
      return it->second;
    }
    case ast::Expr::Kind::Index:
      return err("array access is not a compile-time constant");
    case ast::Expr::Kind::Un: {
      auto v = eval_const_int(*e.lhs, env, diags);
      if (!v) return std::nullopt;
      if (e.un_op == ast::UnOp::Neg) {
        int64_t r;
        if (__builtin_sub_overflow((int64_t)0, *v, &r))
          return err("integer overflow");
        return r;
      }
      return *v == 0 ? 1 : 0;
    }
    case ast::Expr::Kind::Bin: {
      auto a = eval_const_int(*e.lhs, env, diags);
      if (!a) return std::nullopt;
      auto b = eval_const_int(*e.rhs, env, diags);
      if (!b) return std::nullopt;
      int64_t r = 0;
      switch (e.bin_op) {
        case ast::BinOp::Add:
          if (__builtin_add_overflow(*a, *b, &r)) return err("integer overflow");
          return r;
        case ast::BinOp::Sub:
          if (__builtin_sub_overflow(*a, *b, &r)) return err("integer overflow");
          return r;
        case ast::BinOp::Mul:
          if (__builtin_mul_overflow(*a, *b, &r)) return err("integer overflow");
          return r;
        case ast::BinOp::Div:
          if (*b == 0) return err("division by zero");
          return *a / *b;
        case ast::BinOp::Mod:
          if (*b == 0) return err("division by zero");
          // Euclidean-style: result has the sign of the divisor, so parity
          // tests on negative coordinates behave.
          r = *a % *b;
          if (r != 0 && ((r < 0) != (*b < 0))) r += *b;
          return r;
        case ast::BinOp::Eq: return *a == *b;
        case ast::BinOp::Ne: return *a != *b;
        case ast::BinOp::Lt: return *a < *b;
        case ast::BinOp::Le: return *a <= *b;
        case ast::BinOp::Gt: return *a > *b;
        case ast::BinOp::Ge: return *a >= *b;
        case ast::BinOp::And: return (*a != 0 && *b != 0) ? 1 : 0;
        case ast::BinOp::Or: return (*a != 0 || *b != 0) ? 1 : 0;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

/// A fully resolved [lo:hi:step] range, hi exclusive.
struct ConcreteRange {
  int64_t lo = 0, hi = 0, step = 1;
  int64_t count() const {
    if (hi <= lo) return 0;
    return (hi - lo + step - 1) / step;
  }
};

struct ConcreteSubgrid {
  ConcreteRange r[2];
  int64_t count() const { return r[0].count() * r[1].count(); }
  bool contains(PECoord p) const {
    auto in = [](const ConcreteRange& cr, int64_t v) {
      return v >= cr.lo && v < cr.hi && (v - cr.lo) % cr.step == 0;
    };
    return in(r[0], p.x) && in(r[1], p.y);
  }
  PESet enumerate() const {
    PESet out;
    for (int64_t x = r[0].lo; x < r[0].hi; x += r[0].step)
      for (int64_t y = r[1].lo; y < r[1].hi; y += r[1].step)
        out.push_back({(int)x, (int)y});
    return out;
  }
};

inline std::optional<ConcreteRange> resolve_range(const ast::RangeExpr& re,
                                                  const ParamMap& env,
                                                  Diagnostics& diags) {
  ConcreteRange cr;
  auto lo = eval_const_int(*re.lo, env, diags);
  if (!lo) return std::nullopt;
  cr.lo = *lo;
  if (re.is_point()) {
    cr.hi = cr.lo + 1;
    cr.step = 1;
    return cr;
  }
  auto hi = eval_const_int(*re.hi, env, diags);
  if (!hi) return std::nullopt;
  cr.hi = *hi;
  if (re.step) {
    auto st = eval_const_int(*re.step, env, diags);
    if (!st) return std::nullopt;
    cr.step = *st;
    if (cr.step < 1) {
      diags.error("subgrid.stride", re.loc, "stride must be >= 1");
      return std::nullopt;
    }
  }
  return cr;
}

/// Resolves a subgrid against bound parameters. An empty subgrid (hi <= lo in
/// some dimension) is legal and produces a warning.
inline std::optional<ConcreteSubgrid> resolve_subgrid(const ast::Subgrid& sg,
                                                      const ParamMap& env,
                                                      Diagnostics& diags) {
  ConcreteSubgrid out;
  for (int d = 0; d < 2; ++d) {
    auto cr = resolve_range(sg.ranges[d], env, diags);
    if (!cr) return std::nullopt;
    out.r[d] = *cr;
  }
  if (out.count() == 0)
    diags.warning("subgrid.empty", sg.loc, "subgrid is empty");
  return out;
}

inline PESet enumerate_subgrid(const ast::Subgrid& sg, const ParamMap& env,
                               Diagnostics& diags) {
  auto cs = resolve_subgrid(sg, env, diags);
  if (!cs) return {};
  return cs->enumerate();
}

}  // namespace spada
