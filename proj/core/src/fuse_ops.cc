// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "pass_util.h"
#include "symrelax/passes.h"

namespace symrelax {

namespace {

using detail::AnnEnv;

constexpr size_t kOutside = static_cast<size_t>(-1);

[[noreturn]] void invalid_group(const std::string& msg) { throw Error(ErrorKind::kInvalidCustomGroup, msg); }

bool fusable_kind(PatternKind k) { return k != PatternKind::kOpaque; }

bool chain_kind(PatternKind k) {
  return k == PatternKind::kElementWise || k == PatternKind::kBroadcast || k == PatternKind::kInjective;
}

struct Node {
  bool candidate = false;
  PatternKind kind = PatternKind::kOpaque;
  std::vector<std::string> inputs;  // variable operands
  std::set<size_t> consumers;       // binding indices in this block, or kOutside
};

class BlockFuser {
 public:
  BlockFuser(Module& m, Block blk, const AnnEnv& env, const std::map<std::string, size_t>& outer_uses)
      : m_(m), blk_(std::move(blk)), env_(env) {
    for (size_t i = 0; i < blk_.bindings.size(); ++i) index_[blk_.bindings[i].var] = i;
    nodes_.resize(blk_.bindings.size());
    for (size_t i = 0; i < blk_.bindings.size(); ++i) {
      const Binding& b = blk_.bindings[i];
      Node& n = nodes_[i];
      collect_uses(b.value, n.inputs);
      for (const auto& u : n.inputs) {
        auto it = index_.find(u);
        if (it != index_.end()) nodes_[it->second].consumers.insert(i);
      }
      const Expr& e = b.value;
      if (e->kind == ExprKind::kCallTir && e->dests.empty() && !b.is_match_cast() && e->out_ann->is_tensor()) {
        const PrimFunc* p = m.find_prim(e->name);
        bool ann_ok = !b.ann || subsumes(*e->out_ann, *b.ann) == Tri::kYes;
        if (p && ann_ok) {
          n.kind = classify(*p);
          n.candidate = true;
        }
      }
    }
    for (const auto& [var, count] : outer_uses) {
      auto it = index_.find(var);
      if (it != index_.end() && count > 0) nodes_[it->second].consumers.insert(kOutside);
    }
    group_of_.assign(blk_.bindings.size(), -1);
  }

  void add_custom(const FusionGroup& g) {
    std::vector<size_t> members;
    for (const auto& v : g.vars) {
      auto it = index_.find(v);
      if (it == index_.end()) invalid_group("custom group member " + v + " is not bound in one dataflow block");
      size_t i = it->second;
      if (!nodes_[i].candidate) invalid_group("custom group member " + v + " is not a fusable kernel call");
      if (!fusable_kind(nodes_[i].kind)) invalid_group("custom group member " + v + " is opaque");
      if (group_of_[i] >= 0) invalid_group("custom groups overlap at " + v);
      members.push_back(i);
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.empty()) invalid_group("empty custom group");
    std::set<size_t> in(members.begin(), members.end());
    // Connectivity over def-use edges inside the group.
    std::set<size_t> seen{members[0]};
    std::vector<size_t> work{members[0]};
    while (!work.empty()) {
      size_t i = work.back();
      work.pop_back();
      for (size_t c : nodes_[i].consumers) {
        if (in.count(c) && seen.insert(c).second) work.push_back(c);
      }
      for (const auto& u : nodes_[i].inputs) {
        auto it = index_.find(u);
        if (it != index_.end() && in.count(it->second) && seen.insert(it->second).second) work.push_back(it->second);
      }
    }
    if (seen.size() != in.size()) invalid_group("custom group members are not connected");
    for (size_t i : members) {
      if (i == members.back()) continue;
      for (size_t c : nodes_[i].consumers) {
        if (!in.count(c)) invalid_group("custom group value " + blk_.bindings[i].var + " escapes the group");
      }
    }
    assign(members);
  }

  void default_groups() {
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (free(i) && nodes_[i].kind == PatternKind::kReduction) grow_from_anchor(i);
    }
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (!free(i) || !chain_kind(nodes_[i].kind)) continue;
      std::vector<size_t> members{i};
      extend_downstream(members, chain_kind);
      if (members.size() >= 2) assign(members);
    }
  }

  // Rewritten bindings; each group becomes a sub-function appended to the module.
  std::vector<Binding> apply() {
    std::vector<Binding> out;
    for (size_t i = 0; i < blk_.bindings.size(); ++i) {
      int g = group_of_[i];
      if (g < 0) {
        out.push_back(blk_.bindings[i]);
      } else if (groups_[static_cast<size_t>(g)].back() == i) {
        out.push_back(outline(groups_[static_cast<size_t>(g)]));
      }
    }
    return out;
  }

 private:
  bool free(size_t i) const { return nodes_[i].candidate && group_of_[i] < 0; }

  void assign(const std::vector<size_t>& members) {
    for (size_t i : members) group_of_[i] = static_cast<int>(groups_.size());
    groups_.push_back(members);
  }

  template <typename Pred>
  void extend_downstream(std::vector<size_t>& members, Pred ok) {
    while (true) {
      const Node& last = nodes_[members.back()];
      if (last.consumers.size() != 1) return;
      size_t c = *last.consumers.begin();
      if (c == kOutside || !free(c) || !ok(nodes_[c].kind)) return;
      if (std::find(members.begin(), members.end(), c) != members.end()) return;
      members.push_back(c);
    }
  }

  void grow_from_anchor(size_t anchor) {
    std::set<size_t> group{anchor};
    bool progress = true;
    while (progress) {
      progress = false;
      for (size_t i : std::vector<size_t>(group.begin(), group.end())) {
        for (const auto& u : nodes_[i].inputs) {
          auto it = index_.find(u);
          if (it == index_.end()) continue;
          size_t p = it->second;
          if (group.count(p) || !free(p) || !chain_kind(nodes_[p].kind)) continue;
          bool only_group = std::all_of(nodes_[p].consumers.begin(), nodes_[p].consumers.end(),
                                        [&](size_t c) { return group.count(c) > 0; });
          if (!only_group) continue;
          group.insert(p);
          progress = true;
        }
      }
    }
    std::vector<size_t> members(group.begin(), group.end());
    extend_downstream(members, [](PatternKind k) {
      return k == PatternKind::kElementWise || k == PatternKind::kBroadcast;
    });
    if (members.size() >= 2) assign(members);
  }

  Binding outline(const std::vector<size_t>& members) {
    std::set<std::string> defined;
    for (size_t i : members) defined.insert(blk_.bindings[i].var);
    std::vector<std::string> inputs;
    for (size_t i : members) {
      for (const auto& u : nodes_[i].inputs) {
        if (!defined.count(u) && std::find(inputs.begin(), inputs.end(), u) == inputs.end()) inputs.push_back(u);
      }
    }
    // Variables the sub-function needs, and which of them a tensor parameter
    // provides as a bare dimension.
    std::set<SymVar> needed;
    std::set<SymVar> bare;
    for (const auto& in : inputs) {
      const Annotation& a = env_.at(in);
      for (const auto& v : free_vars(a)) needed.insert(v);
      if (const auto* dims = a.known_dims()) {
        for (const auto& d : *dims) {
          if (d.is_var()) bare.insert(d.var());
        }
      }
    }
    for (size_t i : members) {
      const Binding& b = blk_.bindings[i];
      for (const auto& v : free_vars(*b.value->out_ann)) needed.insert(v);
      if (b.value->tir_vars) {
        for (const auto& t : *b.value->tir_vars) {
          for (const auto& v : free_vars(t)) needed.insert(v);
        }
      }
    }
    std::vector<SymVar> extra;
    for (const auto& v : needed) {
      if (!bare.count(v)) extra.push_back(v);  // std::set iterates in id order
    }

    Function sub;
    std::string base = "fused";
    for (size_t i : members) base += "_" + kernel_label(blk_.bindings[i]);
    sub.name = m_.unique_global_name(base);
    sub.attrs = {"primitive"};
    SymSubst fresh;
    for (const auto& v : needed) {
      SymVar nv = SymVar::fresh(v.name());
      fresh[v] = nv;
      sub.sym_vars.push_back(nv);
    }
    std::vector<Expr> call_args;
    for (const auto& in : inputs) {
      sub.params.push_back({in, substitute(env_.at(in), fresh)});
      call_args.push_back(make_var(in));
    }
    std::vector<std::string> taken = inputs;
    for (size_t i : members) taken.push_back(blk_.bindings[i].var);
    std::map<const ExprNode*, std::string> lifted;
    for (size_t i : members) {
      for (const auto& a : blk_.bindings[i].value->args) {
        if (a->kind != ExprKind::kConstTensor || lifted.count(a.get())) continue;
        std::string name = fresh_local_name("c", taken);
        lifted[a.get()] = name;
        std::vector<SymExpr> dims(a->data.shape().begin(), a->data.shape().end());
        sub.params.push_back({name, Annotation::tensor(ShapeSpec::known(dims), a->data.dtype())});
        call_args.push_back(a);
      }
    }
    if (!extra.empty()) {
      std::vector<SymExpr> local;
      std::vector<SymExpr> caller;
      for (const auto& v : extra) {
        local.push_back(fresh.at(v));
        caller.push_back(v);
      }
      sub.params.push_back({fresh_local_name("s", taken), Annotation::shape(ShapeSpec::known(local))});
      call_args.push_back(make_shape(caller));
    }
    Block body{true, {}};
    for (size_t i : members) {
      Binding b = blk_.bindings[i];
      auto n = std::make_shared<ExprNode>(*b.value);
      for (auto& a : n->args) {
        auto it = lifted.find(a.get());
        if (it != lifted.end()) a = make_var(it->second);
      }
      n->out_ann = substitute(*n->out_ann, fresh);
      if (n->tir_vars) {
        for (auto& t : *n->tir_vars) t = substitute(t, fresh);
      }
      b.value = n;
      if (b.ann) b.ann = substitute(*b.ann, fresh);
      body.bindings.push_back(std::move(b));
    }
    const Binding& last = blk_.bindings[members.back()];
    sub.ret_ann = substitute(last.ann ? *last.ann : *last.value->out_ann, fresh);
    sub.body.blocks.push_back(std::move(body));
    sub.body.result = make_var(last.var);
    sub.span = last.span;
    m_.functions.push_back(std::move(sub));

    Binding call = last;
    call.value = detail::with_span(make_call_func(m_.functions.back().name, call_args), last.value->span);
    return call;
  }

  std::string kernel_label(const Binding& b) const {
    const PrimFunc* p = m_.find_prim(b.value->name);
    return p && !p->op.empty() ? p->op : b.value->name;
  }

  Module& m_;
  Block blk_;
  const AnnEnv& env_;
  std::map<std::string, size_t> index_;
  std::vector<Node> nodes_;
  std::vector<int> group_of_;
  std::vector<std::vector<size_t>> groups_;
};

// Uses of each variable outside block `block` (other blocks and the result).
std::map<std::string, size_t> outer_uses(const Function& f, size_t block) {
  std::vector<std::string> uses;
  for (size_t k = 0; k < f.body.blocks.size(); ++k) {
    if (k == block) continue;
    for (const auto& b : f.body.blocks[k].bindings) collect_uses(b.value, uses);
  }
  collect_uses(f.body.result, uses);
  std::map<std::string, size_t> out;
  for (const auto& u : uses) out[u] += 1;
  return out;
}

}  // namespace

Module fuse_ops(const Module& m, const std::vector<FusionGroup>& custom_groups) {
  Module out = m;
  for (const auto& g : custom_groups) {
    const Function* f = out.find_function(g.function);
    if (!f) invalid_group("custom group names unknown function @" + g.function);
  }
  size_t original = out.functions.size();
  for (size_t fi = 0; fi < original; ++fi) {
    if (out.functions[fi].has_attr("primitive")) continue;
    std::vector<const FusionGroup*> mine;
    for (const auto& g : custom_groups) {
      if (g.function == out.functions[fi].name) mine.push_back(&g);
    }
    AnnEnv env = detail::param_env(out.functions[fi]);
    std::vector<const FusionGroup*> placed;
    for (size_t bi = 0; bi < out.functions[fi].body.blocks.size(); ++bi) {
      const Function& f = out.functions[fi];
      for (const auto& b : f.body.blocks[bi].bindings) detail::add_binding_ann(b, env);
      if (!f.body.blocks[bi].dataflow) continue;
      std::set<std::string> here;
      for (const auto& b : f.body.blocks[bi].bindings) here.insert(b.var);
      BlockFuser fuser(out, f.body.blocks[bi], env, outer_uses(f, bi));
      for (const auto* g : mine) {
        if (!g->vars.empty() && here.count(g->vars[0])) {
          fuser.add_custom(*g);
          placed.push_back(g);
        }
      }
      fuser.default_groups();
      auto bindings = fuser.apply();
      out.functions[fi].body.blocks[bi].bindings = std::move(bindings);
    }
    for (const auto* g : mine) {
      if (std::find(placed.begin(), placed.end(), g) == placed.end()) {
        invalid_group("custom group members are not bound in a dataflow block of @" + g->function);
      }
    }
  }
  return out;
}

}  // namespace symrelax
