// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "spada/diag.hpp"

namespace spada {

enum class Tok {
  Eof,
  Ident,
  Int,
  Float,
  // keywords
  KwKernel, KwPhase, KwPlace, KwDataflow, KwCompute, KwStream,
  KwRelativeStream, KwHops, KwChannel, KwSend, KwReceive, KwForeach,
  KwMap, KwAsync, KwCompletion, KwAwait, KwAwaitAll, KwFor, KwIf, KwElse,
  KwIn, KwReadonly, KwWriteonly, KwType,
  KwReserved,  // recognized word outside the construct set
  // punctuation
  At, LParen, RParen, LBrace, RBrace, LBracket, RBracket,
  Comma, Colon, Semicolon, Assign,
  Plus, Minus, Star, Slash, Percent,
  EqEq, NotEq, Lt, Le, Gt, Ge, AndAnd, OrOr, Not,
};

inline const char* tok_name(Tok t) {
  switch (t) {
    case Tok::Eof: return "end of file";
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer";
    case Tok::Float: return "float";
    case Tok::KwKernel: return "'kernel'";
    case Tok::KwPhase: return "'phase'";
    case Tok::KwPlace: return "'place'";
    case Tok::KwDataflow: return "'dataflow'";
    case Tok::KwCompute: return "'compute'";
    case Tok::KwStream: return "'stream'";
    case Tok::KwRelativeStream: return "'relative_stream'";
    case Tok::KwHops: return "'hops'";
    case Tok::KwChannel: return "'channel'";
    case Tok::KwSend: return "'send'";
    case Tok::KwReceive: return "'receive'";
    case Tok::KwForeach: return "'foreach'";
    case Tok::KwMap: return "'map'";
    case Tok::KwAsync: return "'async'";
    case Tok::KwCompletion: return "'completion'";
    case Tok::KwAwait: return "'await'";
    case Tok::KwAwaitAll: return "'awaitall'";
    case Tok::KwFor: return "'for'";
    case Tok::KwIf: return "'if'";
    case Tok::KwElse: return "'else'";
    case Tok::KwIn: return "'in'";
    case Tok::KwReadonly: return "'readonly'";
    case Tok::KwWriteonly: return "'writeonly'";
    case Tok::KwType: return "type name";
    case Tok::KwReserved: return "reserved word";
    case Tok::At: return "'@'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::Semicolon: return "';'";
    case Tok::Assign: return "'='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Percent: return "'%'";
    case Tok::EqEq: return "'=='";
    case Tok::NotEq: return "'!='";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::AndAnd: return "'&&'";
    case Tok::OrOr: return "'||'";
    case Tok::Not: return "'!'";
  }
  return "?";
}

struct Token {
  Tok kind = Tok::Eof;
  std::string text;
  int64_t int_val = 0;
  double float_val = 0.0;
  SourceLoc loc;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  static const std::unordered_map<std::string, Tok>& keywords() {
    static const std::unordered_map<std::string, Tok> kw = {
        {"kernel", Tok::KwKernel},
        {"phase", Tok::KwPhase},
        {"place", Tok::KwPlace},
        {"dataflow", Tok::KwDataflow},
        {"compute", Tok::KwCompute},
        {"stream", Tok::KwStream},
        {"relative_stream", Tok::KwRelativeStream},
        {"hops", Tok::KwHops},
        {"channel", Tok::KwChannel},
        {"send", Tok::KwSend},
        {"receive", Tok::KwReceive},
        {"foreach", Tok::KwForeach},
        {"map", Tok::KwMap},
        {"async", Tok::KwAsync},
        {"completion", Tok::KwCompletion},
        {"await", Tok::KwAwait},
        {"awaitall", Tok::KwAwaitAll},
        {"for", Tok::KwFor},
        {"if", Tok::KwIf},
        {"else", Tok::KwElse},
        {"in", Tok::KwIn},
        {"readonly", Tok::KwReadonly},
        {"writeonly", Tok::KwWriteonly},
        {"f32", Tok::KwType},
        {"i16", Tok::KwType},
        {"i32", Tok::KwType},
        {"i64", Tok::KwType},
        {"u16", Tok::KwType},
        // Recognized words with no construct behind them; seeing one is an
        // UnknownConstruct error rather than a generic syntax error.
        {"import", Tok::KwReserved},
        {"module", Tok::KwReserved},
        {"macro", Tok::KwReserved},
        {"while", Tok::KwReserved},
        {"return", Tok::KwReserved},
        {"struct", Tok::KwReserved},
        {"fn", Tok::KwReserved},
        {"let", Tok::KwReserved},
        {"break", Tok::KwReserved},
        {"continue", Tok::KwReserved},
        {"barrier", Tok::KwReserved},
    };
    return kw;
  }

  Token next() {
    skip_ws_and_comments();
    Token t;
    t.loc = {line_, col_};
    if (pos_ >= src_.size()) {
      t.kind = Tok::Eof;
      return t;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_'))
        advance();
      t.text = std::string(src_.substr(start, pos_ - start));
      auto it = keywords().find(t.text);
      t.kind = it != keywords().end() ? it->second : Tok::Ident;
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      bool is_float = false;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_])))
        advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
          std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
        is_float = true;
        advance();
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          advance();
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t save = pos_;
        advance();
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
          advance();
        if (pos_ < src_.size() &&
            std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
          is_float = true;
          while (pos_ < src_.size() &&
                 std::isdigit(static_cast<unsigned char>(src_[pos_])))
            advance();
        } else {
          pos_ = save;  // not an exponent
        }
      }
      t.text = std::string(src_.substr(start, pos_ - start));
      if (is_float) {
        t.kind = Tok::Float;
        t.float_val = std::stod(t.text);
      } else {
        t.kind = Tok::Int;
        t.int_val = std::stoll(t.text);
      }
      return t;
    }
    advance();
    switch (c) {
      case '@': t.kind = Tok::At; return t;
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case '{': t.kind = Tok::LBrace; return t;
      case '}': t.kind = Tok::RBrace; return t;
      case '[': t.kind = Tok::LBracket; return t;
      case ']': t.kind = Tok::RBracket; return t;
      case ',': t.kind = Tok::Comma; return t;
      case ':': t.kind = Tok::Colon; return t;
      case ';': t.kind = Tok::Semicolon; return t;
      case '+': t.kind = Tok::Plus; return t;
      case '-': t.kind = Tok::Minus; return t;
      case '*': t.kind = Tok::Star; return t;
      case '/': t.kind = Tok::Slash; return t;
      case '%': t.kind = Tok::Percent; return t;
      case '=':
        if (peek() == '=') { advance(); t.kind = Tok::EqEq; }
        else t.kind = Tok::Assign;
        return t;
      case '!':
        if (peek() == '=') { advance(); t.kind = Tok::NotEq; }
        else t.kind = Tok::Not;
        return t;
      case '<':
        if (peek() == '=') { advance(); t.kind = Tok::Le; }
        else t.kind = Tok::Lt;
        return t;
      case '>':
        if (peek() == '=') { advance(); t.kind = Tok::Ge; }
        else t.kind = Tok::Gt;
        return t;
      case '&':
        if (peek() == '&') { advance(); t.kind = Tok::AndAnd; return t; }
        break;
      case '|':
        if (peek() == '|') { advance(); t.kind = Tok::OrOr; return t; }
        break;
      default: break;
    }
    t.kind = Tok::Eof;
    t.text = std::string(1, c);
    bad_char_ = true;
    return t;
  }

  bool saw_bad_char() const { return bad_char_; }

 private:
  char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

  void advance() {
    if (pos_ < src_.size()) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_ws_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  bool bad_char_ = false;
};

}  // namespace spada
