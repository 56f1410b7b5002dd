// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/deduce.h"

#include <gtest/gtest.h>

#include "symrelax/error.h"
#include "symrelax/inputs.h"
#include "symrelax/interpreter.h"
#include "symrelax/text.h"
#include "test_support.h"

namespace symrelax {
namespace {

class DeduceOpTest : public ::testing::Test {
 protected:
  SymVar n_ = SymVar::fresh("n");
  SymVar m_ = SymVar::fresh("m");
  SymVar k_ = SymVar::fresh("k");
  SymExpr n{n_};
  SymExpr m{m_};
  SymExpr k{k_};

  static Annotation t(std::vector<SymExpr> dims) { return Annotation::tensor(std::move(dims), DType::kF32); }
  static std::string rule(const std::string& op, std::vector<Annotation> args, const OpAttrs& attrs = {}) {
    return to_string(deduce_op(op, args, attrs).ann);
  }
  static ErrorKind rule_error(const std::string& op, std::vector<Annotation> args, const OpAttrs& attrs = {}) {
    try {
      deduce_op(op, args, attrs);
    } catch (const Error& e) {
      return e.kind();
    }
    ADD_FAILURE() << op << " deduced without error";
    return ErrorKind::kRuntime;
  }
};

TEST_F(DeduceOpTest, ShapeRules) {
  EXPECT_EQ(rule("flatten", {t({n, 4})}), "Tensor((4*n,), f32)");
  EXPECT_EQ(rule("unique", {t({m})}), "Tensor(ndim=1, f32)");
  EXPECT_EQ(rule("reshape", {t({4 * n}), Annotation::shape(ShapeSpec::known({n, 4}))}), "Tensor((n, 4), f32)");
  EXPECT_EQ(rule("matmul", {t({n, k}), t({k, m})}), "Tensor((n, m), f32)");
  EXPECT_EQ(rule("add", {t({n, 1}), t({n, m})}), "Tensor((n, m), f32)");
  EXPECT_EQ(rule("add", {t({n, 4}), t({4})}), "Tensor((n, 4), f32)");
  EXPECT_EQ(rule("permute_dims", {t({n, 4, m})}, {{"axes", {2, 0, 1}}}), "Tensor((m, n, 4), f32)");
  EXPECT_EQ(rule("concat", {t({n, 4}), t({m, 4})}, {{"axis", {0}}}), "Tensor((n + m, 4), f32)");
  EXPECT_EQ(rule("sum", {t({n, 4})}, {{"axis", {1}}, {"keepdims", {1}}}), "Tensor((n, 1), f32)");
  EXPECT_EQ(rule("sum", {t({n, 4})}, {{"axis", {0}}}), "Tensor((4,), f32)");
  EXPECT_EQ(rule("split", {t({2 * n, 4})}, {{"sections", {2}}}), "Tuple(Tensor((n, 4), f32), Tensor((n, 4), f32))");
}

TEST_F(DeduceOpTest, CoarseInputsGiveCoarseResults) {
  Annotation rank2 = Annotation::tensor(ShapeSpec::rank_only(2), DType::kF32);
  EXPECT_EQ(rule("exp", {rank2}), "Tensor(ndim=2, f32)");
  EXPECT_EQ(rule("flatten", {rank2}), "Tensor(ndim=1, f32)");
}

TEST_F(DeduceOpTest, Errors) {
  EXPECT_EQ(rule_error("add", {t({n, 4}), t({n, 5})}), ErrorKind::kAnnotationConflict);
  EXPECT_EQ(rule_error("matmul", {t({n, 4}), t({5, m})}), ErrorKind::kAnnotationConflict);
  EXPECT_EQ(rule_error("frobnicate", {t({n})}), ErrorKind::kUnknownOperator);
  EXPECT_EQ(rule_error("exp", {t({n}), t({n})}), ErrorKind::kArityMismatch);
}

TEST_F(DeduceOpTest, UndecidableBroadcastFallsBack) {
  RuleResult r = deduce_op("add", std::vector<Annotation>{t({n}), t({m})}, {});
  EXPECT_TRUE(r.fallback || !r.arg_checks.empty());
}

class DeduceCallTest : public DeduceOpTest {};

TEST_F(DeduceCallTest, SignatureOnlySubstitution) {
  Module mod = testing::parse_corpus("subfn_calls");
  Annotation sig = mod.find_function("subfn")->signature();
  std::vector<Annotation> args = {t({8, k})};
  CallResult r = deduce_call(sig, args);
  EXPECT_EQ(to_string(r.ret), "Tensor((8*k,), f32)");
  EXPECT_TRUE(r.arg_checks.empty());
}

TEST_F(DeduceCallTest, ExtraShapeParameterBindsCompoundDims) {
  SymVar cn = SymVar::fresh("n");
  Annotation sig = Annotation::callable(
      {Annotation::tensor({2 * SymExpr(cn)}, DType::kF32), Annotation::shape(ShapeSpec::known({SymExpr(cn)}))},
      Annotation::tensor({2 * SymExpr(cn)}, DType::kF32));
  std::vector<Annotation> args = {t({10}), Annotation::shape(ShapeSpec::known({5}))};
  CallResult r = deduce_call(sig, args);
  EXPECT_EQ(to_string(r.ret), "Tensor((10,), f32)");
  ASSERT_EQ(r.subst.count(cn), 1u);
  EXPECT_EQ(to_string(r.subst.at(cn)), "5");
}

TEST_F(DeduceCallTest, LinearDimsAreSolved) {
  SymVar cn = SymVar::fresh("c");
  Annotation sig = Annotation::callable({Annotation::tensor({2 * SymExpr(cn) + 2}, DType::kF32)},
                                        Annotation::tensor({SymExpr(cn)}, DType::kF32));
  std::vector<Annotation> args = {t({2 * n + 6})};
  EXPECT_EQ(to_string(deduce_call(sig, args).ret), "Tensor((n + 2,), f32)");
}

TEST_F(DeduceCallTest, CoarseShapeArgumentCoarsensTheResult) {
  SymVar a = SymVar::fresh("a");
  SymVar b = SymVar::fresh("b");
  Annotation sig = Annotation::callable({Annotation::shape(ShapeSpec::known({SymExpr(a), SymExpr(b)}))},
                                        Annotation::tensor({SymExpr(a) * SymExpr(b)}, DType::kF32));
  std::vector<Annotation> args = {Annotation::shape(ShapeSpec::rank_only(2))};
  CallResult r = deduce_call(sig, args);
  EXPECT_EQ(to_string(r.ret), "Tensor(ndim=1, f32)");
}

TEST_F(DeduceCallTest, PartiallyKnownArgumentNeedsACheck) {
  SymVar c = SymVar::fresh("c");
  Annotation sig = Annotation::callable(
      {Annotation::tensor({SymExpr(c), 4}, DType::kF32), Annotation::tensor({SymExpr(c), 4}, DType::kF32)},
      Annotation::tensor({SymExpr(c), 4}, DType::kF32));
  std::vector<Annotation> args = {t({n, 4}), Annotation::tensor(ShapeSpec::rank_only(2), DType::kF32)};
  CallResult r = deduce_call(sig, args);
  EXPECT_EQ(to_string(r.ret), "Tensor((n, 4), f32)");
  ASSERT_EQ(r.arg_checks.size(), 1u);
  EXPECT_EQ(r.arg_checks[0].first, 1);
  EXPECT_EQ(to_string(r.arg_checks[0].second), "Tensor((n, 4), f32)");
}

TEST_F(DeduceCallTest, ArityAndConflicts) {
  Module mod = testing::parse_corpus("subfn_calls");
  Annotation sig = mod.find_function("subfn")->signature();
  std::vector<Annotation> none;
  EXPECT_THROW(deduce_call(sig, none), Error);
  std::vector<Annotation> wrong_rank = {t({n})};
  try {
    deduce_call(sig, wrong_rank);
    FAIL() << "expected AnnotationConflict";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAnnotationConflict);
  }
}

const CheckSite* find_site(const std::vector<CheckSite>& sites, const std::string& id) {
  for (const auto& s : sites) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

TEST(DeduceModule, MatchCastRegistersFreshVariable) {
  auto dm = deduce_module(testing::parse_corpus("unique_match_cast"));
  const Function& f = *dm.module.find_function("main");
  ASSERT_EQ(f.sym_vars.size(), 2u);
  EXPECT_EQ(f.sym_vars[1].name(), "m");
  const CheckSite* s = find_site(dm.sites, "main/match_cast/lv4");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->kind, CheckSite::Kind::kMatchCast);
  EXPECT_EQ(s->describe(), "expected Tensor((m,), f32), got Tensor(ndim=1, f32) [main/match_cast/lv4]");
  EXPECT_EQ(to_string(*f.ret_ann), "Tuple(Tensor((n, 4), f32), Tensor((m,), f32))");
}

TEST(DeduceModule, SiteKinds) {
  auto annotated = deduce_module(testing::parse_corpus("annotated_call")).sites;
  ASSERT_NE(find_site(annotated, "main/annot/lv0"), nullptr);
  auto ret = deduce_module(testing::parse_corpus("return_check")).sites;
  const CheckSite* r = find_site(ret, "main/return");
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->kind, CheckSite::Kind::kReturn);
}

TEST(DeduceModule, StaticProgramsNeedNoChecks) {
  for (const char* name : {"exp_relu_chain", "subfn_calls", "compound_add_relu", "matmul_relu", "broadcast_bias"}) {
    EXPECT_TRUE(deduce_module(testing::parse_corpus(name)).sites.empty()) << name;
  }
}

TEST(DeduceModule, IsIdempotent) {
  for (const auto& name : testing::corpus_names()) {
    auto once = deduce_module(testing::parse_corpus(name));
    auto twice = deduce_module(once.module);
    EXPECT_EQ(print_module(once.module), print_module(twice.module)) << name;
    EXPECT_EQ(once.sites.size(), twice.sites.size()) << name;
  }
}

TEST(DeduceModule, StaticConflictIsReported) {
  Module m = parse_module("fn main(x: Tensor((n, 4), f32), y: Tensor((n, 5), f32)) sym(n) { df { z = add(x, y); } "
                          "return z; }");
  try {
    deduce_module(m);
    FAIL() << "expected AnnotationConflict";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAnnotationConflict);
    EXPECT_TRUE(e.span().valid());
  }
}

// Deduced annotations describe the values the interpreter produces.
TEST(DeduceModule, AnnotationsHoldAtRunTime) {
  for (const auto& name : testing::corpus_names()) {
    Module m = testing::deduced(testing::parse_corpus(name));
    const Function& f = *m.find_function("main");
    for (int64_t n : {1, 3}) {
      auto bind = testing::bind_all(f, n);
      auto args = random_inputs(f, bind, 9);
      InterpretOptions io;
      io.bind = bind;
      Value v = interpret(m, "main", args, io);
      SymValues env;
      for (const auto& p : f.params) {
        for (const auto& var : free_vars(p.ann)) env[var] = n;
      }
      EXPECT_NO_THROW(match_value(*f.ret_ann, v, env, "test")) << name << " n=" << n;
    }
  }
}

}  // namespace
}  // namespace symrelax
