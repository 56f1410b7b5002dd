// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "pass_util.h"
#include "symrelax/deduce.h"
#include "symrelax/passes.h"

namespace symrelax {

namespace {

using detail::AnnEnv;

class Legalizer {
 public:
  explicit Legalizer(Module& m) : m_(m) {}

  void run(Function& f) {
    AnnEnv env = detail::param_env(f);
    f.body = body(f.body, env);
  }

 private:
  Body body(const Body& b, AnnEnv& env) {
    Body out = b;
    for (auto& blk : out.blocks) {
      for (auto& bind : blk.bindings) {
        bind.value = rewrite(bind.value, bind.span, env);
        detail::add_binding_ann(bind, env);
      }
    }
    return out;
  }

  Expr rewrite(const Expr& e, const SourceSpan& span, AnnEnv& env) {
    if (e->kind == ExprKind::kIf) {
      auto n = std::make_shared<ExprNode>(*e);
      AnnEnv then_env = env;
      AnnEnv else_env = env;
      n->then_body = std::make_shared<const Body>(body(*e->then_body, then_env));
      n->else_body = std::make_shared<const Body>(body(*e->else_body, else_env));
      return n;
    }
    if (e->kind != ExprKind::kCallOp) return e;
    const SourceSpan& where = e->span.valid() ? e->span : span;
    std::vector<Annotation> anns;
    for (const auto& a : e->args) anns.push_back(detail::operand_ann(a, env));
    RuleResult r = deduce_op(e->name, anns, e->attrs);
    if (e->name == "unique") return detail::with_span(make_call_builtin("unique", e->args, r.ann), where);
    std::string name = m_.unique_global_name(e->name);
    PrimFunc p;
    try {
      p = derive_prim(e->name, e->attrs, anns, r.ann, name);
    } catch (const Error& err) {
      throw Error(err.kind(), err.detail(), where);
    }
    std::map<std::string, SymVar> caller_vars;
    for (const auto& v : free_vars(r.ann)) caller_vars.emplace(v.name(), v);
    for (const auto& a : anns) {
      for (const auto& v : free_vars(a)) caller_vars.emplace(v.name(), v);
    }
    std::optional<std::vector<SymExpr>> tir_vars;
    if (!p.scalar_params.empty()) {
      tir_vars.emplace();
      for (const auto& v : p.scalar_params) tir_vars->push_back(caller_vars.at(v.name()));
    }
    std::vector<Expr> args = e->args;
    if (e->name == "reshape") args.resize(1);
    m_.prim_funcs.push_back(std::move(p));
    return detail::with_span(make_call_tir(name, args, r.ann, tir_vars), where);
  }

  Module& m_;
};

}  // namespace

Module legalize(const Module& m) {
  Module out = m;
  Legalizer lz(out);
  for (auto& f : out.functions) lz.run(f);
  return out;
}

}  // namespace symrelax
