// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "pass_util.h"
#include "symrelax/passes.h"

namespace symrelax {

std::vector<LibraryPattern> reference_library_patterns() {
  return {
      {"linear_bias", {"matmul", "add"}, "linear_bias"},
      {"matmul", {"matmul"}, "matmul"},
  };
}

namespace {

using detail::AnnEnv;

struct Use {
  size_t block;
  size_t binding;
};

class LibraryLowering {
 public:
  LibraryLowering(Module& m, std::vector<LibraryPattern> patterns) : m_(m), patterns_(std::move(patterns)) {
    std::stable_sort(patterns_.begin(), patterns_.end(),
                     [](const LibraryPattern& a, const LibraryPattern& b) { return a.ops.size() > b.ops.size(); });
  }

  void run(Function& f) {
    count_uses(f);
    AnnEnv env = detail::param_env(f);
    for (size_t bi = 0; bi < f.body.blocks.size(); ++bi) {
      auto& bindings = f.body.blocks[bi].bindings;
      std::vector<bool> removed(bindings.size(), false);
      for (size_t i = 0; i < bindings.size(); ++i) {
        if (removed[i]) continue;
        for (const auto& pat : patterns_) {
          if (try_match(pat, bi, i, bindings, env, removed)) break;
        }
        detail::add_binding_ann(bindings[i], env);
      }
      std::vector<Binding> kept;
      for (size_t i = 0; i < bindings.size(); ++i) {
        if (!removed[i]) kept.push_back(std::move(bindings[i]));
      }
      bindings = std::move(kept);
    }
  }

 private:
  void count_uses(const Function& f) {
    uses_.clear();
    for (size_t bi = 0; bi < f.body.blocks.size(); ++bi) {
      const auto& bindings = f.body.blocks[bi].bindings;
      for (size_t i = 0; i < bindings.size(); ++i) {
        std::vector<std::string> names;
        collect_uses(bindings[i].value, names);
        for (const auto& n : names) uses_[n].push_back({bi, i});
      }
    }
    std::vector<std::string> names;
    collect_uses(f.body.result, names);
    for (const auto& n : names) uses_[n].push_back({static_cast<size_t>(-1), 0});
  }

  // Operator computed by a binding, or "" when it is not a single operator.
  std::string op_of(const Binding& b) const {
    const Expr& e = b.value;
    if (b.is_match_cast()) return "";
    if (e->kind == ExprKind::kCallOp) return e->name;
    if (e->kind == ExprKind::kCallTir && e->dests.empty()) {
      const PrimFunc* p = m_.find_prim(e->name);
      if (p && p->op.find('+') == std::string::npos) return p->op;
    }
    return "";
  }

  // Operands in graph-operator order (call_tir drops reshape's shape operand,
  // which no pattern uses).
  static const std::vector<Expr>& operands(const Binding& b) { return b.value->args; }

  bool try_match(const LibraryPattern& pat, size_t bi, size_t start, std::vector<Binding>& bindings,
                 const AnnEnv& env, std::vector<bool>& removed) {
    std::vector<size_t> chain{start};
    if (op_of(bindings[start]) != pat.ops[0]) return false;
    for (size_t k = 1; k < pat.ops.size(); ++k) {
      const std::string& prev = bindings[chain.back()].var;
      auto it = uses_.find(prev);
      if (it == uses_.end() || it->second.size() != 1 || it->second[0].block != bi) return false;
      size_t j = it->second[0].binding;
      if (j <= chain.back() || removed[j] || op_of(bindings[j]) != pat.ops[k]) return false;
      chain.push_back(j);
    }
    AnnEnv local = env;
    for (size_t i = start; i < chain.back(); ++i) detail::add_binding_ann(bindings[i], local);
    auto ann = [&](const Expr& e) { return detail::operand_ann(e, local); };
    const Binding& first = bindings[chain.front()];
    const Binding& last = bindings[chain.back()];
    const auto& mm = operands(first);
    if (mm.size() != 2) return false;
    std::vector<Expr> args = mm;
    Annotation out = last.ann ? *last.ann : *last.value->out_ann;
    const auto* out_dims = out.known_dims();
    if (!out.is_tensor() || !out_dims || out.dtype() != DType::kF32) return false;
    for (const auto& a : mm) {
      Annotation x = ann(a);
      if (!x.is_tensor() || x.dtype() != DType::kF32 || x.shape_spec().rank() != 2) return false;
    }
    if (pat.ops.size() == 2) {
      const auto& add = operands(last);
      if (add.size() != 2) return false;
      bool lhs = add[0]->kind == ExprKind::kVarRef && add[0]->name == first.var;
      bool rhs = add[1]->kind == ExprKind::kVarRef && add[1]->name == first.var;
      if (lhs == rhs) return false;
      const Expr& bias = lhs ? add[1] : add[0];
      Annotation b = ann(bias);
      const auto* bd = b.known_dims();
      if (!b.is_tensor() || b.dtype() != DType::kF32 || !bd || bd->size() != 1 ||
          prove_equal((*bd)[0], (*out_dims)[1]) != Provability::kProvablyEqual) {
        return false;
      }
      args.push_back(bias);
    }
    for (size_t k = 0; k + 1 < chain.size(); ++k) removed[chain[k]] = true;
    Binding& target = bindings[chain.back()];
    target.value = detail::with_span(make_call_library(pat.extern_name, args, out), target.value->span);
    if (!m_.has_extern(pat.extern_name)) m_.externs.push_back({pat.extern_name});
    return true;
  }

  Module& m_;
  std::vector<LibraryPattern> patterns_;
  std::map<std::string, std::vector<Use>> uses_;
};

}  // namespace

Module lower_to_library(const Module& m, const std::vector<LibraryPattern>& registry) {
  if (registry.empty()) return m;
  Module out = m;
  LibraryLowering lower(out, registry);
  for (auto& f : out.functions) {
    if (!f.has_attr("primitive")) lower.run(f);
  }
  std::set<std::string> before;
  for (const auto& f : m.functions) detail::collect_prim_refs(f.body, before);
  std::set<std::string> after;
  for (const auto& f : out.functions) detail::collect_prim_refs(f.body, after);
  std::erase_if(out.prim_funcs, [&](const PrimFunc& p) { return before.count(p.name) && !after.count(p.name); });
  return out;
}

}  // namespace symrelax
