// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/annotation.h"

#include <gtest/gtest.h>

#include "properties.h"

namespace symrelax {
namespace {

class AnnotationTest : public ::testing::Test {
 protected:
  SymVar n_ = SymVar::fresh("n");
  SymExpr n{n_};
  Annotation t(std::vector<SymExpr> dims, DType dt = DType::kF32) { return Annotation::tensor(std::move(dims), dt); }
};

TEST_F(AnnotationTest, SurfaceSyntax) {
  EXPECT_EQ(to_string(t({n, 4})), "Tensor((n, 4), f32)");
  EXPECT_EQ(to_string(t({4 * n})), "Tensor((4*n,), f32)");
  EXPECT_EQ(to_string(Annotation::tensor(ShapeSpec::rank_only(1), DType::kF32)), "Tensor(ndim=1, f32)");
  EXPECT_EQ(to_string(Annotation::object()), "Object");
  EXPECT_EQ(to_string(Annotation::tuple({t({n}), Annotation::shape(ShapeSpec::rank_only(2))})),
            "Tuple(Tensor((n,), f32), Shape(ndim=2))");
}

TEST_F(AnnotationTest, KnownShapeIsSubsumedByRankOnly) {
  Annotation rank2 = Annotation::tensor(ShapeSpec::rank_only(2), DType::kF32);
  EXPECT_EQ(subsumes(t({n, 4}), rank2), Tri::kYes);
  EXPECT_EQ(subsumes(rank2, t({n, 4})), Tri::kUnknown);
  EXPECT_EQ(subsumes(t({n}), rank2), Tri::kNo);
}

TEST_F(AnnotationTest, DtypeMismatchIsDecided) {
  EXPECT_EQ(subsumes(t({n}, DType::kI64), t({n})), Tri::kNo);
  EXPECT_EQ(subsumes(t({n}, DType::kI64), Annotation::tensor(ShapeSpec::known({n}), std::nullopt)), Tri::kYes);
}

TEST_F(AnnotationTest, SymbolicDimsCompareByProof) {
  EXPECT_EQ(subsumes(t({2 * n}), t({n + n})), Tri::kYes);
  EXPECT_EQ(subsumes(t({n + 1}), t({n})), Tri::kNo);
  SymVar m = SymVar::fresh("m");
  EXPECT_EQ(subsumes(t({SymExpr(m)}), t({n})), Tri::kUnknown);
}

TEST_F(AnnotationTest, JoinCoarsensDisagreeingArms) {
  Annotation j = join(t({n, 4}), t({n, 8}));
  EXPECT_EQ(to_string(j), "Tensor(ndim=2, f32)");
  EXPECT_EQ(to_string(join(t({n}), t({n, 4}))), "Tensor(f32)");
  EXPECT_EQ(to_string(join(t({n}), Annotation::shape(ShapeSpec::known({n})))), "Object");
}

TEST_F(AnnotationTest, SubstituteAndFreeVars) {
  SymVar m = SymVar::fresh("m");
  Annotation a = Annotation::tuple({t({n, SymExpr(m)}), Annotation::shape(ShapeSpec::known({2 * n}))});
  auto vs = free_vars(a);
  ASSERT_EQ(vs.size(), 2u);
  EXPECT_EQ(to_string(substitute(a, {{n_, SymExpr(3)}})), "Tuple(Tensor((3, m), f32), Shape((6,)))");
}

TEST(AnnotationProperty, SubsumptionIsAPartialOrder) {
  auto r = testing::annotation_properties(3000, 11);
  EXPECT_EQ(r.cases, 3000);
  for (const auto& f : r.failures) ADD_FAILURE() << f;
}

}  // namespace
}  // namespace symrelax
