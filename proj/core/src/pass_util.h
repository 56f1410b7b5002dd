// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the pass implementations.

#ifndef SYMRELAX_SRC_PASS_UTIL_H_
#define SYMRELAX_SRC_PASS_UTIL_H_

#include <map>
#include <set>
#include <string>

#include "symrelax/error.h"
#include "symrelax/ir.h"

namespace symrelax::detail {

using AnnEnv = std::map<std::string, Annotation>;

inline Expr with_span(const Expr& e, const SourceSpan& span) {
  auto n = std::make_shared<ExprNode>(*e);
  n->span = span;
  return n;
}

// Annotation of an operand (variable, constant, shape literal, tuple field).
inline Annotation operand_ann(const Expr& e, const AnnEnv& env) {
  switch (e->kind) {
    case ExprKind::kVarRef: {
      auto it = env.find(e->name);
      if (it == env.end()) {
        throw Error(ErrorKind::kNotLowered, "no annotation for " + e->name + "; run deduction first", e->span);
      }
      return it->second;
    }
    case ExprKind::kConstTensor: {
      std::vector<SymExpr> dims(e->data.shape().begin(), e->data.shape().end());
      return Annotation::tensor(ShapeSpec::known(dims), e->data.dtype());
    }
    case ExprKind::kShapeLiteral:
      return Annotation::shape(ShapeSpec::known(e->dims));
    case ExprKind::kTupleGet: {
      Annotation t = operand_ann(e->args[0], env);
      if (t.is_tuple() && e->index >= 0 && e->index < static_cast<int64_t>(t.fields().size())) {
        return t.fields()[static_cast<size_t>(e->index)];
      }
      return Annotation::object();
    }
    default:
      throw Error(ErrorKind::kNotLowered, "operands must be variables or constants", e->span);
  }
}

inline void add_binding_ann(const Binding& b, AnnEnv& env) {
  env[b.var] = b.ann ? *b.ann : Annotation::object();
}

inline AnnEnv param_env(const Function& f) {
  AnnEnv env;
  for (const auto& p : f.params) env[p.name] = p.ann;
  return env;
}

// Names of kernels called anywhere in `b`.
inline void collect_prim_refs(const Body& b, std::set<std::string>& out) {
  for (const auto& blk : b.blocks) {
    for (const auto& bind : blk.bindings) {
      const Expr& e = bind.value;
      if (e->kind == ExprKind::kCallTir) out.insert(e->name);
      if (e->kind == ExprKind::kIf) {
        collect_prim_refs(*e->then_body, out);
        collect_prim_refs(*e->else_body, out);
      }
    }
  }
}

}  // namespace symrelax::detail

#endif  // SYMRELAX_SRC_PASS_UTIL_H_
