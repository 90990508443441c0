// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "spada/stencil.hpp"

using namespace spada;

/// Dense reference evaluation of a stencil over full arrays, with the same
/// out-of-domain term-skip rule the lowered kernels use.
struct DenseOracle {
  int64_t I, J, K;
  std::map<std::string, std::vector<float>> fields;

  DenseOracle(const StencilSpec& spec, int64_t i, int64_t j, int64_t k)
      : I(i), J(j), K(k) {
    for (const auto& f : spec.fields)
      fields[f.name].assign((std::size_t)(I * J * K), 0.0f);
  }

  float& at(const std::string& f, int64_t i, int64_t j, int64_t k) {
    return fields[f][(std::size_t)((i * J + j) * K + k)];
  }

  bool in_domain(int64_t i, int64_t j, int64_t k) const {
    return i >= 0 && i < I && j >= 0 && j < J && k >= 0 && k < K;
  }

  bool term_ok(const ast::Expr& term, int64_t i, int64_t j, int64_t k) {
    bool ok = true;
    ast::walk_exprs(term, [&](const ast::Expr& x) {
      if (x.kind != ast::Expr::Kind::Index || x.indices.size() != 3) return;
      int di = 0, dj = 0, dk = 0;
      stencil_detail::const_offset(*x.indices[0], di);
      stencil_detail::const_offset(*x.indices[1], dj);
      stencil_detail::const_offset(*x.indices[2], dk);
      if (!in_domain(i + di, j + dj, k + dk)) ok = false;
    });
    return ok;
  }

  float eval(const ast::Expr& e, int64_t i, int64_t j, int64_t k) {
    switch (e.kind) {
      case ast::Expr::Kind::FloatLit: return (float)e.float_val;
      case ast::Expr::Kind::IntLit: return (float)e.int_val;
      case ast::Expr::Kind::Index: {
        int di = 0, dj = 0, dk = 0;
        stencil_detail::const_offset(*e.indices[0], di);
        stencil_detail::const_offset(*e.indices[1], dj);
        stencil_detail::const_offset(*e.indices[2], dk);
        return at(e.name, i + di, j + dj, k + dk);
      }
      case ast::Expr::Kind::Un:
        return -eval(*e.lhs, i, j, k);
      case ast::Expr::Kind::Bin: {
        float a = eval(*e.lhs, i, j, k);
        float b = eval(*e.rhs, i, j, k);
        switch (e.bin_op) {
          case ast::BinOp::Add: return a + b;
          case ast::BinOp::Sub: return a - b;
          case ast::BinOp::Mul: return a * b;
          case ast::BinOp::Div: return a / b;
          default: return 0.0f;
        }
      }
      default: return 0.0f;
    }
  }

  void apply_stmt(const StencilStmt& st, int64_t i, int64_t j, int64_t k) {
    std::vector<std::pair<const ast::Expr*, bool>> terms;
    stencil_detail::additive_terms(*st.rhs, false, terms);
    bool any = false;
    float acc = 0.0f;
    for (const auto& [term, neg] : terms) {
      if (!term_ok(*term, i, j, k)) continue;
      float t = eval(*term, i, j, k);
      if (!any) {
        acc = neg ? -t : t;
        any = true;
      } else {
        acc = neg ? acc - t : acc + t;
      }
    }
    if (any) at(st.target, i, j, k) = acc;
  }

  void run(const StencilSpec& spec) {
    if (spec.vertical == VerticalStrategy::Parallel) {
      for (const auto& st : spec.stmts)
        for (int64_t i = 0; i < I; ++i)
          for (int64_t j = 0; j < J; ++j)
            for (int64_t k = 0; k < K; ++k) apply_stmt(st, i, j, k);
    } else {
      for (int64_t k = 0; k < K; ++k)
        for (const auto& st : spec.stmts)
          for (int64_t i = 0; i < I; ++i)
            for (int64_t j = 0; j < J; ++j) apply_stmt(st, i, j, k);
    }
  }
};
