// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "spada/bench.hpp"
#include "spada/compile.hpp"
#include "spada/machine.hpp"
#include "spada/parser.hpp"
#include "spada/pipeline.hpp"

struct RunHarness {
  spada::Diagnostics diags;
  std::unique_ptr<spada::CompiledProgram> prog;
  std::unique_ptr<spada::Machine> machine;

  bool build(const std::string& src, spada::ParamMap params,
             const std::map<std::string, spada::HostBuffer>& inputs,
             spada::FabricConfig fab = {}, bool allow_unsafe = false,
             const std::map<std::string, double>& scalars = {}) {
    auto k = spada::parse_kernel(src, diags);
    if (!k) return false;
    spada::AnalyzeOptions opts;
    opts.allow_unsafe = allow_unsafe;
    auto a = spada::analyze_kernel(*k, params, diags, opts);
    if (!a) return false;
    prog = spada::compile_kernel(std::move(a), diags);
    if (!prog) return false;
    if (fab.width < prog->min_width) fab.width = prog->min_width;
    if (fab.height < prog->min_height) fab.height = prog->min_height;
    machine = std::make_unique<spada::Machine>(*prog, fab);
    return machine->load(inputs, scalars, diags);
  }

  spada::SimReport run(uint64_t seed = 1, uint64_t max_cycles = 2'000'000) {
    return machine->run(seed, max_cycles);
  }

  void dump_errors() const { diags.print(std::cerr); }
};

inline spada::HostBuffer ones_f32(int64_t slices, int64_t per_slice) {
  auto b = spada::HostBuffer::make(spada::ElemType::F32, slices, per_slice);
  for (auto& v : b.data) v = spada::Value::of_f32(1.0f);
  return b;
}

inline spada::HostBuffer random_f32(int64_t slices, int64_t per_slice,
                                    std::mt19937_64& rng) {
  auto b = spada::HostBuffer::make(spada::ElemType::F32, slices, per_slice);
  std::uniform_real_distribution<float> dist(-4.0f, 4.0f);
  for (auto& v : b.data) v = spada::Value::of_f32(dist(rng));
  return b;
}

/// Exactly representable values: sums of a few of them stay exact in f32.
inline spada::HostBuffer pow2_f32(int64_t slices, int64_t per_slice,
                                  std::mt19937_64& rng) {
  auto b = spada::HostBuffer::make(spada::ElemType::F32, slices, per_slice);
  const float pool[] = {1.0f, -1.0f, 0.5f, -0.5f, 2.0f, -2.0f, 4.0f, 0.25f};
  for (auto& v : b.data)
    v = spada::Value::of_f32(pool[rng() % (sizeof(pool) / sizeof(pool[0]))]);
  return b;
}

/// Reference for the 1D reductions: element-wise right fold, east to west.
inline std::vector<float> right_fold_reduce(const spada::HostBuffer& in,
                                            int64_t pes, int64_t len) {
  std::vector<float> out((std::size_t)len);
  for (int64_t k = 0; k < len; ++k) {
    float r = in.get(pes - 1, k).f;
    for (int64_t i = pes - 2; i >= 0; --i) r = in.get(i, k).f + r;
    out[(std::size_t)k] = r;
  }
  return out;
}

inline int ulp_distance(float a, float b) {
  if (a == b) return 0;
  int32_t ia, ib;
  std::memcpy(&ia, &a, 4);
  std::memcpy(&ib, &b, 4);
  if (ia < 0) ia = std::numeric_limits<int32_t>::min() - ia;
  if (ib < 0) ib = std::numeric_limits<int32_t>::min() - ib;
  int64_t d = (int64_t)ia - (int64_t)ib;
  return (int)std::min<int64_t>(std::abs(d), 1 << 30);
}
