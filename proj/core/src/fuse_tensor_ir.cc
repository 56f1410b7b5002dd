// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "pass_util.h"
#include "symrelax/deduce.h"
#include "symrelax/passes.h"

namespace symrelax {

namespace {

using detail::AnnEnv;

[[noreturn]] void not_straight(const Function& f, const std::string& msg) {
  throw Error(ErrorKind::kNonStraightLineGroup, "@" + f.name + ": " + msg, f.span);
}

ScalarExpr rewrite_scalar(const ScalarExpr& e, const std::map<std::string, std::string>& names, const SymSubst& sub) {
  auto n = std::make_shared<ScalarNode>(*e);
  if (n->op == ScalarOp::kRead) {
    n->buffer = names.at(n->buffer);
    for (auto& i : n->indices) i = substitute(i, sub);
  }
  if (n->op == ScalarOp::kSelect) {
    n->cond_lhs = substitute(n->cond_lhs, sub);
    n->cond_rhs = substitute(n->cond_rhs, sub);
  }
  for (auto& o : n->operands) o = rewrite_scalar(o, names, sub);
  return n;
}

std::vector<SymExpr> subst_dims(const std::vector<SymExpr>& dims, const SymSubst& sub) {
  std::vector<SymExpr> out;
  for (const auto& d : dims) out.push_back(substitute(d, sub));
  return out;
}

// Merges the kernels called by primitive sub-function `f` into one PrimFunc.
// `to_merged` receives the mapping from f's variables to the kernel's.
PrimFunc merge_kernels(const Module& m, const Function& f, const std::string& name, SymSubst& to_merged) {
  if (f.body.blocks.size() != 1) not_straight(f, "expected a single block of kernel calls");
  const auto& bindings = f.body.blocks[0].bindings;
  if (bindings.empty()) not_straight(f, "empty group");
  if (f.body.result->kind != ExprKind::kVarRef || f.body.result->name != bindings.back().var) {
    not_straight(f, "the group must return its last binding");
  }
  PrimFunc merged;
  merged.name = name;
  std::set<SymVar> vars(f.sym_vars.begin(), f.sym_vars.end());
  for (const auto& p : f.params) {
    for (const auto& v : free_vars(p.ann)) vars.insert(v);
  }
  for (const auto& v : vars) {
    SymVar nv = SymVar::fresh(v.name());
    to_merged[v] = nv;
    merged.sym_vars.push_back(nv);
  }
  AnnEnv env = detail::param_env(f);
  std::map<std::string, std::string> buffer_of;
  for (const auto& p : f.params) {
    if (p.ann.is_shape()) continue;
    const auto* dims = p.ann.known_dims();
    if (!p.ann.is_tensor() || !dims || !p.ann.dtype()) not_straight(f, "parameter " + p.name + " is not a known tensor");
    merged.params.push_back({p.name, subst_dims(*dims, to_merged), *p.ann.dtype()});
    buffer_of[p.name] = p.name;
  }
  std::string ops;
  for (size_t bi = 0; bi < bindings.size(); ++bi) {
    const Binding& b = bindings[bi];
    const Expr& e = b.value;
    if (e->kind != ExprKind::kCallTir || !e->dests.empty() || b.is_match_cast()) {
      not_straight(f, "binding " + b.var + " is not a kernel call");
    }
    const PrimFunc* p = m.find_prim(e->name);
    if (!p) throw Error(ErrorKind::kUnboundSymbol, "call to undefined prim_fn @" + e->name);
    const auto* out_dims = e->out_ann->known_dims();
    if (!e->out_ann->is_tensor() || !out_dims || p->num_outputs != 1) {
      not_straight(f, "binding " + b.var + " must produce one known tensor");
    }
    bool last = bi + 1 == bindings.size();
    BufferDecl out_decl{b.var, subst_dims(*out_dims, to_merged), *e->out_ann->dtype()};
    if (!last) merged.temps.push_back(out_decl);
    buffer_of[b.var] = b.var;

    std::vector<std::vector<SymExpr>> dims;
    std::map<std::string, std::string> names;
    for (size_t i = 0; i < e->args.size(); ++i) {
      const Expr& a = e->args[i];
      if (a->kind != ExprKind::kVarRef || !buffer_of.count(a->name)) {
        not_straight(f, "kernel operands must be parameters or earlier results");
      }
      Annotation aa = detail::operand_ann(a, env);
      const auto* ad = aa.known_dims();
      if (!ad) not_straight(f, "operand " + a->name + " has an unknown shape");
      dims.push_back(*ad);
      names[p->params[i].name] = buffer_of[a->name];
    }
    dims.push_back(*out_dims);
    names[p->params.back().name] = b.var;
    std::vector<SymExpr> tir_vars = e->tir_vars.value_or(std::vector<SymExpr>{});
    SymSubst ksub = bind_prim_vars(*p, dims, tir_vars);
    for (auto& [k, v] : ksub) v = substitute(v, to_merged);
    for (const auto& t : p->temps) {
      std::string tn = b.var + "_" + t.name;
      names[t.name] = tn;
      merged.temps.push_back({tn, subst_dims(t.dims, ksub), t.dtype});
      if (p->workspace == t.name && !merged.workspace) merged.workspace = tn;
    }
    for (const auto& s : p->stages) {
      Stage ns = s;
      ns.out = names.at(s.out);
      for (auto& r : ns.reduce) r.extent = substitute(r.extent, ksub);
      ns.body = rewrite_scalar(s.body, names, ksub);
      merged.stages.push_back(std::move(ns));
    }
    if (last) merged.params.push_back(out_decl);
    ops += (ops.empty() ? "" : "+") + (p->op.empty() ? p->name : p->op);
    detail::add_binding_ann(b, env);
  }
  merged.num_outputs = 1;
  merged.scalar_params = infer_scalar_params(merged);
  merged.op = ops;
  return merged;
}

struct Merged {
  std::string prim;
  SymSubst to_merged;
  std::vector<SymVar> scalar_params;
};

class TirFuser {
 public:
  TirFuser(const Module& in, Module& out) : in_(in), out_(out) {}

  void run(Function& f) {
    AnnEnv env = detail::param_env(f);
    f.body = body(f.body, env);
  }

  const std::set<std::string>& consumed() const { return consumed_; }

 private:
  Body body(const Body& b, AnnEnv& env) {
    Body out = b;
    for (auto& blk : out.blocks) {
      for (auto& bind : blk.bindings) {
        bind.value = rewrite(bind, env);
        detail::add_binding_ann(bind, env);
      }
    }
    return out;
  }

  Expr rewrite(const Binding& b, AnnEnv& env) {
    const Expr& e = b.value;
    if (e->kind == ExprKind::kIf) {
      auto n = std::make_shared<ExprNode>(*e);
      AnnEnv then_env = env;
      AnnEnv else_env = env;
      n->then_body = std::make_shared<const Body>(body(*e->then_body, then_env));
      n->else_body = std::make_shared<const Body>(body(*e->else_body, else_env));
      return n;
    }
    if (e->kind != ExprKind::kCallFunc) return e;
    const Function* callee = in_.find_function(e->name);
    if (!callee || !callee->has_attr("primitive")) return e;
    const Merged& mk = merged_for(*callee);

    std::vector<Annotation> arg_anns;
    std::vector<Expr> tensor_args;
    for (size_t i = 0; i < e->args.size(); ++i) {
      arg_anns.push_back(detail::operand_ann(e->args[i], env));
      if (i >= callee->params.size() || !callee->params[i].ann.is_shape()) tensor_args.push_back(e->args[i]);
    }
    CallResult cr = deduce_call(callee->signature(), arg_anns);
    std::optional<std::vector<SymExpr>> tir_vars;
    if (!mk.scalar_params.empty()) {
      tir_vars.emplace();
      for (const auto& mv : mk.scalar_params) {
        for (const auto& [sv, target] : mk.to_merged) {
          if (target.is_var() && target.var() == mv) {
            auto it = cr.subst.find(sv);
            if (it == cr.subst.end()) {
              throw Error(ErrorKind::kUnboundSymbol, "cannot pass " + sv.name() + " to merged kernel @" + mk.prim);
            }
            tir_vars->push_back(it->second);
          }
        }
      }
    }
    Annotation out_ann = b.ann ? *b.ann : cr.ret;
    return detail::with_span(make_call_tir(mk.prim, tensor_args, out_ann, tir_vars), e->span);
  }

  const Merged& merged_for(const Function& callee) {
    auto it = merged_.find(callee.name);
    if (it != merged_.end()) return it->second;
    consumed_.insert(callee.name);
    Merged mk;
    std::string name = callee.name;
    while (out_.find_prim(name)) name += "_tir";
    PrimFunc p = merge_kernels(in_, callee, name, mk.to_merged);
    mk.prim = p.name;
    mk.scalar_params = p.scalar_params;
    out_.prim_funcs.push_back(std::move(p));
    return merged_.emplace(callee.name, std::move(mk)).first->second;
  }

  const Module& in_;
  Module& out_;
  std::map<std::string, Merged> merged_;
  std::set<std::string> consumed_;
};

}  // namespace

Module fuse_tensor_ir(const Module& m) {
  Module out = m;
  TirFuser fuser(m, out);
  for (auto& f : out.functions) {
    if (!f.has_attr("primitive")) fuser.run(f);
  }
  std::set<std::string> before;
  for (const auto& f : m.functions) detail::collect_prim_refs(f.body, before);
  std::erase_if(out.functions, [&](const Function& f) { return fuser.consumed().count(f.name) > 0; });
  std::set<std::string> after;
  for (const auto& f : out.functions) detail::collect_prim_refs(f.body, after);
  std::erase_if(out.prim_funcs, [&](const PrimFunc& p) { return before.count(p.name) && !after.count(p.name); });
  return out;
}

}  // namespace symrelax
