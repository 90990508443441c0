// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace spada {

/// Element types of the language. Bool exists only as the type of
/// conditions; it cannot be declared or streamed.
enum class ElemType { F32, I16, I32, I64, U16, Bool, Invalid };

inline const char* elem_type_name(ElemType t) {
  switch (t) {
    case ElemType::F32: return "f32";
    case ElemType::I16: return "i16";
    case ElemType::I32: return "i32";
    case ElemType::I64: return "i64";
    case ElemType::U16: return "u16";
    case ElemType::Bool: return "bool";
    case ElemType::Invalid: return "<invalid>";
  }
  return "?";
}

inline std::optional<ElemType> elem_type_from_name(const std::string& s) {
  if (s == "f32") return ElemType::F32;
  if (s == "i16") return ElemType::I16;
  if (s == "i32") return ElemType::I32;
  if (s == "i64") return ElemType::I64;
  if (s == "u16") return ElemType::U16;
  return std::nullopt;
}

inline bool is_integer_type(ElemType t) {
  return t == ElemType::I16 || t == ElemType::I32 || t == ElemType::I64 ||
         t == ElemType::U16;
}

inline int integer_rank(ElemType t) {
  switch (t) {
    case ElemType::I16: return 1;
    case ElemType::U16: return 1;
    case ElemType::I32: return 2;
    case ElemType::I64: return 3;
    default: return 0;
  }
}

}  // namespace spada
