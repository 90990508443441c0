// Copyright (c) 2026 SPADA Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "spada/parser.hpp"
#include "spada/subgrid.hpp"

using namespace spada;

namespace {

ast::Subgrid parse_sg(const std::string& header) {
  std::string src = "kernel @k<I, J, K>() { place " + header + " { } }";
  Diagnostics d;
  auto k = parse_kernel(src, d);
  REQUIRE(k.has_value());
  return k->top_places()[0]->sg.clone();
}

}  // namespace

TEST_CASE("stride enumeration") {
  auto sg = parse_sg("i32 i, i32 j in [0:4:2, 0]");
  Diagnostics d;
  auto pes = enumerate_subgrid(sg, {}, d);
  CHECK(pes == PESet{{0, 0}, {2, 0}});
}

TEST_CASE("odd block of the pipelined reduction at K=6") {
  auto sg = parse_sg("i32 i, i32 j in [1:K-1:2, 0]");
  Diagnostics d;
  auto pes = enumerate_subgrid(sg, {{"K", 6}}, d);
  CHECK(pes == PESet{{1, 0}, {3, 0}});
}

TEST_CASE("two-dimensional strided subgrid") {
  auto sg = parse_sg("i32 i, i32 j in [0:I:2, 1:J-1]");
  Diagnostics d;
  auto pes = enumerate_subgrid(sg, {{"I", 4}, {"J", 4}}, d);
  CHECK(pes == PESet{{0, 1}, {0, 2}, {2, 1}, {2, 2}});
}

TEST_CASE("unbound parameters are an error") {
  auto sg = parse_sg("i32 i, i32 j in [0:K, 0]");
  Diagnostics d;
  auto cs = resolve_subgrid(sg, {}, d);
  CHECK_FALSE(cs.has_value());
  CHECK(d.has_errors());
}

TEST_CASE("empty subgrids are legal and warn") {
  auto sg = parse_sg("i32 i, i32 j in [2:K-1:2, 0]");
  Diagnostics d;
  auto pes = enumerate_subgrid(sg, {{"K", 2}}, d);
  CHECK(pes.empty());
  CHECK_FALSE(d.has_errors());
  CHECK(d.contains_rule("subgrid.empty"));
}

TEST_CASE("stride below one is rejected") {
  auto sg = parse_sg("i32 i, i32 j in [0:4:0, 0]");
  Diagnostics d;
  CHECK_FALSE(resolve_subgrid(sg, {}, d).has_value());
}

TEST_CASE("overflowing subgrid arithmetic is a compile error") {
  auto sg = parse_sg("i32 i, i32 j in [0:K*K, 0]");
  Diagnostics d;
  auto cs = resolve_subgrid(sg, {{"K", int64_t(1) << 40}}, d);
  CHECK_FALSE(cs.has_value());
  CHECK(d.contains_rule("subgrid.eval"));
}

TEST_CASE("enumeration size matches the closed-form product") {
  auto sg = parse_sg("i32 i, i32 j in [I:J:K, 0]");
  std::mt19937_64 rng(20260809);
  for (int trial = 0; trial < 500; ++trial) {
    int64_t lo = (int64_t)(rng() % 65);
    int64_t hi = lo + (int64_t)(rng() % (65 - lo + 1));
    int64_t step = 1 + (int64_t)(rng() % 8);
    Diagnostics d;
    auto pes = enumerate_subgrid(sg, {{"I", lo}, {"J", hi}, {"K", step}}, d);
    int64_t expect = hi <= lo ? 0 : (hi - lo + step - 1) / step;
    REQUIRE((int64_t)pes.size() == expect);
  }
}
