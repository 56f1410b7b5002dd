// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/passes.h"

#include <gtest/gtest.h>

#include <map>

#include "properties.h"
#include "symrelax/deduce.h"
#include "symrelax/error.h"
#include "symrelax/text.h"
#include "test_support.h"

namespace symrelax {
namespace {

std::map<ExprKind, int> kinds_in(const Function& f) {
  std::map<ExprKind, int> out;
  for (const auto& blk : f.body.blocks) {
    for (const auto& b : blk.bindings) ++out[b.value->kind];
  }
  return out;
}

int match_casts_in(const Function& f) {
  int out = 0;
  for (const auto& blk : f.body.blocks) {
    for (const auto& b : blk.bindings) out += b.is_match_cast();
  }
  return out;
}

Module pass(const std::string& name, const Module& m) { return run_pass(name, m); }

Module passes(std::initializer_list<const char*> names, Module m) {
  for (const char* n : names) m = run_pass(n, m);
  return m;
}

ErrorKind pass_error(const std::string& name, const Module& m) {
  try {
    run_pass(name, m);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << name << " succeeded";
  return ErrorKind::kRuntime;
}

TEST(Legalize, UniqueProgram) {
  Module m = pass("legalize", testing::parse_corpus("unique_match_cast"));
  const Function& f = *m.find_function("main");
  auto k = kinds_in(f);
  EXPECT_EQ(k[ExprKind::kCallTir], 4);
  EXPECT_EQ(k[ExprKind::kCallBuiltin], 1);
  EXPECT_EQ(k[ExprKind::kCallOp], 0);
  EXPECT_EQ(match_casts_in(f), 1);
  EXPECT_EQ(m.prim_funcs.size(), 4u);
}

TEST(Legalize, IsIdempotent) {
  Module once = pass("legalize", testing::parse_corpus("unique_match_cast"));
  Module twice = pass("legalize", once);
  EXPECT_EQ(print_module(twice), print_module(once));
}

TEST(Legalize, MatmulThenAdd) {
  Module m = pass("legalize", testing::parse_corpus("linear_bias"));
  EXPECT_EQ(kinds_in(*m.find_function("main"))[ExprKind::kCallTir], 2);
}

TEST(Legalize, CoarseOperandNeedsMatchCast) {
  Module m = parse_module("fn main(x: Tensor(ndim=2, f32)) { df { y = exp(x); } return y; }");
  EXPECT_EQ(pass_error("legalize", m), ErrorKind::kNeedsMatchCast);
}

TEST(Fuse, MatmulAddReluIsOneGroup) {
  Module m = parse_module(
      "fn main(x: Tensor((n, 8), f32), w: Tensor((8, 4), f32), b: Tensor((4,), f32)) sym(n) {\n"
      "  df { a = matmul(x, w); c = add(a, b); d = relu(c); }\n  return d;\n}\n");
  Module fused = passes({"legalize", "fuse"}, m);
  const Function& f = *fused.find_function("main");
  EXPECT_EQ(kinds_in(f)[ExprKind::kCallFunc], 1);
  EXPECT_EQ(kinds_in(f)[ExprKind::kCallTir], 0);
  int primitive = 0;
  for (const auto& g : fused.functions) primitive += g.has_attr("primitive");
  EXPECT_EQ(primitive, 1);
}

TEST(Fuse, UniqueIsABarrier) {
  Module fused = passes({"legalize", "fuse"}, testing::parse_corpus("unique_match_cast"));
  auto k = kinds_in(*fused.find_function("main"));
  EXPECT_EQ(k[ExprKind::kCallBuiltin], 1);
  EXPECT_GE(k[ExprKind::kCallFunc] + k[ExprKind::kCallTir], 2);
}

TEST(Fuse, CompoundDimsGetAShapeParameter) {
  Module fused = passes({"legalize", "fuse"}, testing::parse_corpus("compound_add_relu"));
  const Function* sub = nullptr;
  for (const auto& g : fused.functions) {
    if (g.has_attr("primitive")) sub = &g;
  }
  ASSERT_NE(sub, nullptr);
  ASSERT_EQ(sub->params.size(), 3u);
  EXPECT_TRUE(sub->params[2].ann.is_shape());
}

TEST(Fuse, CustomGroupMustBeConnected) {
  Module m = pass("legalize", testing::parse_corpus("exp_relu_chain"));
  try {
    fuse_ops(deduce_module(m).module, {{"main", {"lv0", "nope"}}});
    FAIL() << "expected InvalidCustomGroup";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidCustomGroup);
  }
}

TEST(FuseTir, MatmulAddMergesIntoTwoStages) {
  Module m = passes({"legalize", "fuse", "fuse-tir"}, testing::parse_corpus("linear_bias"));
  const Function& f = *m.find_function("main");
  EXPECT_EQ(kinds_in(f)[ExprKind::kCallTir], 1);
  for (const auto& g : m.functions) EXPECT_FALSE(g.has_attr("primitive")) << g.name;
  const PrimFunc* merged = nullptr;
  for (const auto& p : m.prim_funcs) {
    if (p.stages.size() == 2) merged = &p;
  }
  ASSERT_NE(merged, nullptr);
  EXPECT_EQ(merged->temps.size(), 1u);
  EXPECT_EQ(merged->op, "matmul+add");
}

TEST(FuseTir, SingletonGroupKeepsItsKernel) {
  Module m = parse_module("fn main(x: Tensor((n, 4), f32)) sym(n) { df { y = exp(x); } return y; }");
  Module out = passes({"legalize", "fuse", "fuse-tir"}, m);
  ASSERT_EQ(out.prim_funcs.size(), 1u);
  EXPECT_EQ(out.prim_funcs[0].stages.size(), 1u);
  EXPECT_EQ(kinds_in(*out.find_function("main"))[ExprKind::kCallTir], 1);
}

TEST(LowerLibs, LinearBiasIsDispatched) {
  Module m = passes({"legalize", "lower-libs"}, testing::parse_corpus("linear_bias"));
  auto k = kinds_in(*m.find_function("main"));
  EXPECT_EQ(k[ExprKind::kCallDpsLibrary], 1);
  EXPECT_EQ(k[ExprKind::kCallTir], 0);
}

TEST(LowerLibs, EmptyRegistryChangesNothing) {
  Module legal = deduce_module(pass("legalize", testing::parse_corpus("linear_bias"))).module;
  EXPECT_EQ(print_module(lower_to_library(legal, {})), print_module(legal));
}

TEST(PlanMemory, EqualSizesShareStorage) {
  Module m = parse_module(
      "fn main(x: Tensor((n, 4), f32)) sym(n) {\n  df {\n    a = flatten(x);\n    b = exp(a);\n"
      "    c = reshape(b, shape(n, 4));\n    d = relu(c);\n    e = exp(d);\n  }\n  return e;\n}\n");
  auto [planned, plan] = plan_memory(deduce_module(pass("legalize", m)).module);
  EXPECT_EQ(plan.storages.size(), 2u);
  std::map<std::string, std::string> storage_of;
  for (const auto& t : plan.tensors) storage_of[t.tensor] = t.storage;
  EXPECT_EQ(storage_of["a"], storage_of["c"]);
  EXPECT_NE(storage_of["a"], storage_of["b"]);
  std::string report = plan.report();
  EXPECT_EQ(report.substr(report.size() - 11), "storages=2\n");
}

TEST(PlanMemory, SingleIntermediate) {
  Module m = parse_module("fn main(x: Tensor((n, 4), f32)) sym(n) { df { a = exp(x); b = relu(a); } return b; }");
  auto [planned, plan] = plan_memory(deduce_module(pass("legalize", m)).module);
  ASSERT_EQ(plan.tensors.size(), 2u);
  EXPECT_EQ(plan.storages.size(), 2u);
  EXPECT_EQ(to_string(plan.storages[0].size), "16*n");
  EXPECT_GE(kinds_in(*planned.find_function("main"))[ExprKind::kCallBuiltin], 4);
}

TEST(PlanMemory, UpperBoundsGiveStaticSizes) {
  auto [planned, plan] = plan_memory(deduce_module(pass("legalize", testing::parse_corpus("bounded_mlp"))).module);
  ASSERT_FALSE(plan.storages.empty());
  for (const auto& s : plan.storages) EXPECT_TRUE(s.upper_bound.has_value()) << s.id;
}

TEST(RunPass, UnknownName) {
  EXPECT_EQ(pass_error("inline-everything", testing::parse_corpus("exp_relu_chain")), ErrorKind::kUsage);
  EXPECT_THROW(preset_passes("fastest"), Error);
}

TEST(RunPass, Presets) {
  EXPECT_EQ(preset_passes("default"),
            (std::vector<std::string>{"legalize", "fuse", "fuse-tir", "lower-libs", "plan-memory"}));
  EXPECT_EQ(preset_passes("dispatch"),
            (std::vector<std::string>{"legalize", "lower-libs", "fuse", "fuse-tir", "plan-memory"}));
  EXPECT_EQ(pass_names().size(), 5u);
}

TEST(RunPass, EveryCorpusProgramCompiles) {
  for (const auto& name : testing::corpus_names()) {
    for (const char* preset : {"default", "dispatch"}) {
      EXPECT_NO_THROW(testing::run_preset(testing::parse_corpus(name), preset)) << name << " " << preset;
    }
  }
}

TEST(RunPass, CompositionPreservesResults) {
  auto r = testing::pipeline_composition(11);
  EXPECT_GT(r.cases, 0);
  for (const auto& f : r.failures) ADD_FAILURE() << f;
}

}  // namespace
}  // namespace symrelax
