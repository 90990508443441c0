// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <sstream>
#include <string>

#include "spada/ast.hpp"

namespace spada {

/// Prints an AST back to `.spada` text. parse(print(k)) is structurally
/// identical to k for every well-formed kernel.
class Printer {
 public:
  std::string print(const ast::Kernel& k) {
    out_.str("");
    indent_ = 0;
    line("kernel @" + k.name + "<" + join(k.params) + ">(" + args(k.args) +
         ") {");
    ++indent_;
    for (const auto& item : k.items) {
      if (auto* pb = std::get_if<ast::PlaceBlock>(&item)) {
        print_place(*pb);
      } else {
        print_phase(std::get<ast::Phase>(item));
      }
    }
    --indent_;
    line("}");
    return out_.str();
  }

  std::string expr(const ast::Expr& e) { return expr_prec(e, 0); }

  std::string range(const ast::RangeExpr& r) {
    std::string s = expr(*r.lo);
    if (r.hi) {
      s += ":" + expr(*r.hi);
      if (r.step) s += ":" + expr(*r.step);
    }
    return s;
  }

  std::string stmt_to_string(const ast::Stmt& s) {
    out_.str("");
    indent_ = 0;
    print_stmt(s);
    return out_.str();
  }

 private:
  static std::string num(int64_t v) { return std::to_string(v); }

  static std::string num(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, p);
    // keep float literals lexically distinct from ints
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
      s += ".0";
    return s;
  }

  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ", ";
      s += v[i];
    }
    return s;
  }

  std::string args(const std::vector<ast::ArgDecl>& as) {
    std::string s;
    for (std::size_t i = 0; i < as.size(); ++i) {
      if (i) s += ", ";
      const auto& a = as[i];
      if (a.is_scalar) {
        s += std::string(elem_type_name(a.type)) + " " + a.name;
        continue;
      }
      s += "stream<" + std::string(elem_type_name(a.type)) + ">";
      if (a.extent) s += "[" + expr(*a.extent) + "]";
      s += a.mode == ast::ArgMode::ReadOnly ? " readonly " : " writeonly ";
      s += a.name;
    }
    return s;
  }

  std::string subgrid(const ast::Subgrid& sg) {
    std::string s;
    for (int d = 0; d < 2; ++d) {
      if (d) s += ", ";
      s += std::string(elem_type_name(sg.dims[d].type)) + " " + sg.dims[d].name;
    }
    s += " in [" + range(sg.ranges[0]) + ", " + range(sg.ranges[1]) + "]";
    return s;
  }

  void print_place(const ast::PlaceBlock& b) {
    line("place " + subgrid(b.sg) + " {");
    ++indent_;
    for (const auto& d : b.decls) {
      std::string s = elem_type_name(d.type);
      if (!d.shape.empty()) {
        s += "[";
        for (std::size_t i = 0; i < d.shape.size(); ++i) {
          if (i) s += ", ";
          s += expr(*d.shape[i]);
        }
        s += "]";
      }
      line(s + " " + d.name);
    }
    --indent_;
    line("}");
  }

  void print_dataflow(const ast::DataflowBlock& b) {
    line("dataflow " + subgrid(b.sg) + " {");
    ++indent_;
    for (const auto& s : b.streams) {
      std::string t = "stream<" + std::string(elem_type_name(s.type)) + "> " +
                      s.name + " = relative_stream(" + num((int64_t)s.dx) +
                      ", " + num((int64_t)s.dy) + ")";
      if (s.routing) {
        t += " {";
        bool first = true;
        if (!s.routing->hops.empty()) {
          t += " hops = [";
          for (std::size_t i = 0; i < s.routing->hops.size(); ++i) {
            if (i) t += ", ";
            t += "(" + num((int64_t)s.routing->hops[i].first) + ", " +
                 num((int64_t)s.routing->hops[i].second) + ")";
          }
          t += "]";
          first = false;
        }
        if (s.routing->channel) {
          if (!first) t += ",";
          t += " channel = " + num(*s.routing->channel);
        }
        t += " }";
      }
      line(t);
    }
    --indent_;
    line("}");
  }

  void print_compute(const ast::ComputeBlock& b) {
    line("compute " + subgrid(b.sg) + " {");
    ++indent_;
    for (const auto& s : b.body) print_stmt(*s);
    --indent_;
    line("}");
  }

  void print_phase(const ast::Phase& p) {
    line("phase {");
    ++indent_;
    for (const auto& blk : p.blocks) {
      if (auto* pb = std::get_if<ast::PlaceBlock>(&blk)) print_place(*pb);
      else if (auto* db = std::get_if<ast::DataflowBlock>(&blk)) print_dataflow(*db);
      else print_compute(std::get<ast::ComputeBlock>(blk));
    }
    --indent_;
    line("}");
  }

  std::string stream_ref(const ast::StreamRef& sr) {
    switch (sr.kind) {
      case ast::StreamRef::Kind::Rel: return sr.name;
      case ast::StreamRef::Kind::Arg:
        return sr.name + "[" + expr(*sr.arg_index) + "]";
      case ast::StreamRef::Kind::RelCond:
        return sr.name + " if " + expr(*sr.cond) + " else " + sr.alt;
    }
    return sr.name;
  }

  void print_stmt(const ast::Stmt& s) {
    std::string prefix;
    if (s.awaited) prefix = "await ";
    else if (!s.completion.empty()) prefix = "completion " + s.completion + " = ";
    switch (s.kind) {
      case ast::StmtKind::Send:
        line(prefix + "send(" + expr(*s.value) + ", " + stream_ref(s.stream) + ")");
        break;
      case ast::StmtKind::Receive:
        line(prefix + "receive(" + expr(*s.value) + ", " + stream_ref(s.stream) + ")");
        break;
      case ast::StmtKind::Foreach: {
        std::string h = prefix + "foreach ";
        if (!s.iter_var.empty())
          h += std::string(elem_type_name(s.iter_type)) + " " + s.iter_var + ", ";
        h += std::string(elem_type_name(s.elem_type)) + " " + s.elem_var + " in ";
        if (s.range) h += "[" + range(*s.range) + "], ";
        h += "receive(" + stream_ref(s.stream) + ") {";
        line(h);
        ++indent_;
        for (const auto& b : s.body) print_stmt(*b);
        --indent_;
        line("}");
        break;
      }
      case ast::StmtKind::Map:
      case ast::StmtKind::For: {
        std::string kw = s.kind == ast::StmtKind::Map ? "map " : "for ";
        line(prefix + kw + std::string(elem_type_name(s.iter_type)) + " " +
             s.iter_var + " in [" + range(*s.range) + "] {");
        ++indent_;
        for (const auto& b : s.body) print_stmt(*b);
        --indent_;
        line("}");
        break;
      }
      case ast::StmtKind::Async:
        line(prefix + "async {");
        ++indent_;
        for (const auto& b : s.body) print_stmt(*b);
        --indent_;
        line("}");
        break;
      case ast::StmtKind::Await:
        line("await " + s.await_name);
        break;
      case ast::StmtKind::AwaitAll:
        line("awaitall");
        break;
      case ast::StmtKind::Assign:
        line(expr(*s.lhs) + " = " + expr(*s.rhs));
        break;
      case ast::StmtKind::If:
        line("if (" + expr(*s.cond) + ") {");
        ++indent_;
        for (const auto& b : s.body) print_stmt(*b);
        --indent_;
        if (s.has_else) {
          line("} else {");
          ++indent_;
          for (const auto& b : s.else_body) print_stmt(*b);
          --indent_;
        }
        line("}");
        break;
    }
  }

  static int prec_of(ast::BinOp op) {
    switch (op) {
      case ast::BinOp::Or: return 1;
      case ast::BinOp::And: return 2;
      case ast::BinOp::Eq:
      case ast::BinOp::Ne:
      case ast::BinOp::Lt:
      case ast::BinOp::Le:
      case ast::BinOp::Gt:
      case ast::BinOp::Ge: return 3;
      case ast::BinOp::Add:
      case ast::BinOp::Sub: return 4;
      case ast::BinOp::Mul:
      case ast::BinOp::Div:
      case ast::BinOp::Mod: return 5;
    }
    return 0;
  }

  std::string expr_prec(const ast::Expr& e, int parent_prec) {
    switch (e.kind) {
      case ast::Expr::Kind::IntLit: return num(e.int_val);
      case ast::Expr::Kind::FloatLit: return num(e.float_val);
      case ast::Expr::Kind::Var: return e.name;
      case ast::Expr::Kind::Index: {
        std::string s = e.name + "[";
        for (std::size_t i = 0; i < e.indices.size(); ++i) {
          if (i) s += ", ";
          s += expr_prec(*e.indices[i], 0);
        }
        return s + "]";
      }
      case ast::Expr::Kind::Un: {
        std::string s = (e.un_op == ast::UnOp::Neg ? "-" : "!") +
                        expr_prec(*e.lhs, 6);
        return s;
      }
      case ast::Expr::Kind::Bin: {
        int p = prec_of(e.bin_op);
        std::string s = expr_prec(*e.lhs, p) + " " + binop_name(e.bin_op) +
                        " " + expr_prec(*e.rhs, p + 1);
        if (p < parent_prec) s = "(" + s + ")";
        return s;
      }
    }
    return "?";
  }

  void line(const std::string& s) {
    for (int i = 0; i < indent_; ++i) out_ << "  ";
    out_ << s << "\n";
  }

  std::ostringstream out_;
  int indent_ = 0;
};

inline std::string print_kernel(const ast::Kernel& k) {
  Printer p;
  return p.print(k);
}

}  // namespace spada
