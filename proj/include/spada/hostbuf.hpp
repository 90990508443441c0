// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spada/diag.hpp"
#include "spada/types.hpp"

namespace spada {

/// Runtime scalar. f32 arithmetic is binary32 with round-to-nearest-even;
/// integers are held widened and truncated to their width on store.
struct Value {
  ElemType t = ElemType::F32;
  float f = 0.0f;
  int64_t i = 0;

  static Value of_f32(float v) { return {ElemType::F32, v, 0}; }
  static Value of_int(ElemType t, int64_t v) { return {t, 0.0f, v}; }
  double as_double() const { return t == ElemType::F32 ? (double)f : (double)i; }
};

inline int64_t truncate_to(ElemType t, int64_t v) {
  switch (t) {
    case ElemType::I16: return (int16_t)v;
    case ElemType::U16: return (uint16_t)v;
    case ElemType::I32: return (int32_t)v;
    default: return v;
  }
}

/// Host-side staging buffer: `slices` indexable stream slices of
/// `per_slice` elements each.
struct HostBuffer {
  ElemType type = ElemType::F32;
  int64_t slices = 0;
  int64_t per_slice = 0;
  std::vector<Value> data;  // slices * per_slice

  int64_t size() const { return (int64_t)data.size(); }
  Value get(int64_t slice, int64_t idx) const {
    return data[slice * per_slice + idx];
  }
  void set(int64_t slice, int64_t idx, Value v) {
    data[slice * per_slice + idx] = v;
  }
  static HostBuffer make(ElemType t, int64_t slices, int64_t per_slice) {
    HostBuffer b;
    b.type = t;
    b.slices = slices;
    b.per_slice = per_slice;
    b.data.assign((std::size_t)(slices * per_slice), Value{t, 0.0f, 0});
    return b;
  }
};

// ---------------------------------------------------------------------------
// Binary container: "SPB1" | u32 dtype | u32 ndims | u64 dims[] | payload.
// Little-endian throughout; payload elements use their natural width.
// ---------------------------------------------------------------------------

namespace iodetail {

inline int dtype_code(ElemType t) {
  switch (t) {
    case ElemType::F32: return 0;
    case ElemType::I16: return 1;
    case ElemType::I32: return 2;
    case ElemType::I64: return 3;
    case ElemType::U16: return 4;
    default: return -1;
  }
}

inline std::optional<ElemType> dtype_from_code(uint32_t c) {
  switch (c) {
    case 0: return ElemType::F32;
    case 1: return ElemType::I16;
    case 2: return ElemType::I32;
    case 3: return ElemType::I64;
    case 4: return ElemType::U16;
    default: return std::nullopt;
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return bool(is);
}

}  // namespace iodetail

inline bool write_binary(const std::string& path, const HostBuffer& b,
                         std::string* err = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    if (err) *err = "cannot open " + path;
    return false;
  }
  os.write("SPB1", 4);
  iodetail::put<uint32_t>(os, (uint32_t)iodetail::dtype_code(b.type));
  iodetail::put<uint32_t>(os, 2);
  iodetail::put<uint64_t>(os, (uint64_t)b.slices);
  iodetail::put<uint64_t>(os, (uint64_t)b.per_slice);
  for (const auto& v : b.data) {
    switch (b.type) {
      case ElemType::F32: iodetail::put<float>(os, v.f); break;
      case ElemType::I16: iodetail::put<int16_t>(os, (int16_t)v.i); break;
      case ElemType::I32: iodetail::put<int32_t>(os, (int32_t)v.i); break;
      case ElemType::I64: iodetail::put<int64_t>(os, v.i); break;
      case ElemType::U16: iodetail::put<uint16_t>(os, (uint16_t)v.i); break;
      default: break;
    }
  }
  return bool(os);
}

inline std::optional<HostBuffer> read_binary(const std::string& path,
                                             std::string* err = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    if (err) *err = "cannot open " + path;
    return std::nullopt;
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SPB1", 4) != 0) {
    if (err) *err = path + ": not a SPB1 container";
    return std::nullopt;
  }
  uint32_t code = 0, ndims = 0;
  iodetail::get(is, code);
  iodetail::get(is, ndims);
  auto t = iodetail::dtype_from_code(code);
  if (!t || ndims == 0 || ndims > 8) {
    if (err) *err = path + ": bad header";
    return std::nullopt;
  }
  std::vector<uint64_t> dims(ndims);
  for (auto& d : dims) iodetail::get(is, d);
  HostBuffer b;
  b.type = *t;
  // interpret as slices x per_slice; higher-rank payloads flatten the tail
  b.slices = (int64_t)dims[0];
  b.per_slice = 1;
  for (std::size_t d = 1; d < dims.size(); ++d) b.per_slice *= (int64_t)dims[d];
  uint64_t n = 1;
  for (auto d : dims) n *= d;
  b.data.reserve(n);
  for (uint64_t x = 0; x < n; ++x) {
    Value v{*t, 0.0f, 0};
    bool ok = true;
    switch (*t) {
      case ElemType::F32: { float y; ok = iodetail::get(is, y); v.f = y; break; }
      case ElemType::I16: { int16_t y; ok = iodetail::get(is, y); v.i = y; break; }
      case ElemType::I32: { int32_t y; ok = iodetail::get(is, y); v.i = y; break; }
      case ElemType::I64: { int64_t y; ok = iodetail::get(is, y); v.i = y; break; }
      case ElemType::U16: { uint16_t y; ok = iodetail::get(is, y); v.i = y; break; }
      default: ok = false;
    }
    if (!ok) {
      if (err) *err = path + ": truncated payload";
      return std::nullopt;
    }
    b.data.push_back(v);
  }
  return b;
}

/// CSV import for small fixtures: numbers separated by commas/whitespace,
/// loaded as one flat slice dimension unless reshaped by the caller.
inline std::optional<HostBuffer> read_csv(const std::string& path, ElemType t,
                                          std::string* err = nullptr) {
  std::ifstream is(path);
  if (!is) {
    if (err) *err = "cannot open " + path;
    return std::nullopt;
  }
  HostBuffer b;
  b.type = t;
  std::string tok;
  while (is) {
    int c = is.get();
    if (c == ',' || c == '\n' || c == '\r' || c == ' ' || c == '\t' || c == EOF) {
      if (!tok.empty()) {
        Value v{t, 0.0f, 0};
        try {
          if (t == ElemType::F32) v.f = std::stof(tok);
          else v.i = std::stoll(tok);
        } catch (...) {
          if (err) *err = path + ": bad number '" + tok + "'";
          return std::nullopt;
        }
        b.data.push_back(v);
        tok.clear();
      }
    } else {
      tok.push_back((char)c);
    }
  }
  b.slices = (int64_t)b.data.size();
  b.per_slice = 1;
  return b;
}

}  // namespace spada
