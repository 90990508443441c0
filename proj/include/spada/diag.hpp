// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace spada {

struct SourceLoc {
  int line = 0;
  int col = 0;
  bool valid() const { return line > 0; }
};

enum class Severity { Note, Warning, Error };

inline const char* severity_name(Severity s) {
  switch (s) {
    case Severity::Note: return "note";
    case Severity::Warning: return "warning";
    case Severity::Error: return "error";
  }
  return "?";
}

/// A single finding from any compiler stage. `rule` is a stable machine id
/// (e.g. "sema.unordered-sends"), `message` is for humans.
struct Diagnostic {
  std::string rule;
  Severity severity = Severity::Error;
  std::string file;
  SourceLoc loc;
  std::string message;
};

class Diagnostics {
 public:
  void add(Diagnostic d) { items_.push_back(std::move(d)); }
  void error(std::string rule, SourceLoc loc, std::string msg) {
    add({std::move(rule), Severity::Error, file_, loc, std::move(msg)});
  }
  void warning(std::string rule, SourceLoc loc, std::string msg) {
    add({std::move(rule), Severity::Warning, file_, loc, std::move(msg)});
  }
  void set_file(std::string f) { file_ = std::move(f); }
  const std::string& file() const { return file_; }

  bool has_errors() const {
    for (const auto& d : items_)
      if (d.severity == Severity::Error) return true;
    return false;
  }
  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& d : items_)
      if (d.severity == Severity::Error) ++n;
    return n;
  }
  bool empty() const { return items_.empty(); }
  const std::vector<Diagnostic>& items() const { return items_; }
  std::vector<Diagnostic>& items() { return items_; }

  void append(const Diagnostics& other) {
    for (const auto& d : other.items_) items_.push_back(d);
  }

  /// Downgrade every error to a warning (used by --allow-unsafe runs, where
  /// the runtime detectors are the point).
  void downgrade_errors() {
    for (auto& d : items_)
      if (d.severity == Severity::Error) d.severity = Severity::Warning;
  }

  // file:line:col: severity: message
  void print(std::ostream& os) const {
    for (const auto& d : items_) {
      os << (d.file.empty() ? "<input>" : d.file) << ':' << d.loc.line << ':'
         << d.loc.col << ": " << severity_name(d.severity) << ": " << d.message
         << " [" << d.rule << "]\n";
    }
  }

  bool contains_rule(const std::string& rule) const {
    for (const auto& d : items_)
      if (d.rule == rule) return true;
    return false;
  }

 private:
  std::string file_;
  std::vector<Diagnostic> items_;
};

/// Internal invariant failure (compiler bug, not user error).
struct InternalError : std::exception {
  std::string msg;
  explicit InternalError(std::string m) : msg(std::move(m)) {}
  const char* what() const noexcept override { return msg.c_str(); }
};

}  // namespace spada
