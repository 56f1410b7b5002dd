// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <sstream>

#include "pass_util.h"
#include "symrelax/passes.h"

namespace symrelax {

std::string StoragePlan::report() const {
  std::ostringstream out;
  for (const auto& s : storages) {
    out << "storage " << s.function << "/" << s.id << " size=" << to_string(s.size)
        << " ub=" << (s.upper_bound ? std::to_string(*s.upper_bound) : std::string("none")) << "\n";
  }
  for (const auto& t : tensors) {
    out << "tensor " << t.function << "/" << t.tensor << " -> "
        << (t.storage.empty() ? std::string("runtime") : t.function + "/" + t.storage) << " size=" << to_string(t.size)
        << " live=[" << t.def << ", " << t.last_use << "]\n";
  }
  out << "storages=" << storages.size() << "\n";
  return out.str();
}

namespace {

bool is_dps(const Expr& e) { return e->kind == ExprKind::kCallTir || e->kind == ExprKind::kCallDpsLibrary; }

// Uses that read a tensor without aliasing it.
bool consuming_use(const Binding& b) {
  if (b.is_match_cast()) return false;
  switch (b.value->kind) {
    case ExprKind::kCallTir:
    case ExprKind::kCallDpsLibrary:
    case ExprKind::kCallOp:
      return true;
    case ExprKind::kCallBuiltin:
      return b.value->name != "alloc_tensor";
    default:
      return false;
  }
}

SymExpr byte_size(const std::vector<SymExpr>& dims, DType dt) {
  SymExpr n = dtype_bytes(dt);
  for (const auto& d : dims) n = n * d;
  return normalize(n);
}

struct LocalStorage {
  std::string var;
  SymExpr size;  // size of the first tensor placed here
  std::optional<int64_t> ub;
  DType dtype = DType::kF32;
  bool reusable = false;
  size_t busy_until = 0;
  size_t first_user = 0;
  bool hoisted = false;
};

class Planner {
 public:
  Planner(Module& m, StoragePlan& plan, Function& f) : m_(m), plan_(plan), f_(f), taken_(local_names(f)) {
    for (const auto& p : f.params) {
      for (const auto& v : free_vars(p.ann)) param_vars_.insert(v);
    }
    for (const auto& p : f.params) taken_.push_back(p.name);
    env_ = detail::param_env(f);
  }

  void run() { f_.body = body(f_.body, {}); }

 private:
  Body body(const Body& b, std::vector<std::string> outer) {
    Body out = b;
    collect_uses(b.result, outer);
    for (size_t k = 0; k < out.blocks.size(); ++k) {
      std::vector<std::string> elsewhere = outer;
      for (size_t j = 0; j < out.blocks.size(); ++j) {
        if (j == k) continue;
        for (const auto& bind : out.blocks[j].bindings) collect_uses(bind.value, elsewhere);
      }
      out.blocks[k] = block(out.blocks[k], std::set<std::string>(elsewhere.begin(), elsewhere.end()));
    }
    return out;
  }

  std::optional<int64_t> upper_bound(const SymExpr& e) const {
    auto r = bound_interval(e, [&](const SymVar& v) -> std::optional<Interval> {
      auto it = f_.upper_bounds.find(v);
      if (it == f_.upper_bounds.end()) return std::nullopt;
      return Interval{0, it->second};
    });
    if (!r) return std::nullopt;
    return r->hi;
  }

  bool hoistable(const SymExpr& e) const {
    for (const auto& v : free_vars(e)) {
      if (!param_vars_.count(v)) return false;
    }
    return true;
  }

  size_t place(const std::string& tensor, const std::vector<SymExpr>& dims, DType dt, bool pool, size_t def,
               size_t last) {
    SymExpr size = byte_size(dims, dt);
    auto ub = upper_bound(size);
    if (pool) {
      for (size_t s = 0; s < storages_.size(); ++s) {
        LocalStorage& st = storages_[s];
        if (!st.reusable || st.dtype != dt || st.busy_until >= def) continue;
        bool fits = prove_equal(st.size, size) == Provability::kProvablyEqual || (st.ub && ub && *st.ub >= *ub);
        if (!fits) continue;
        st.busy_until = last;
        record(tensor, st.var, def, last, size);
        return s;
      }
    }
    LocalStorage st;
    st.var = fresh_local_name("st" + std::to_string(next_storage_++), taken_);
    st.size = size;
    st.ub = ub;
    st.dtype = dt;
    st.reusable = pool;
    st.busy_until = last;
    st.first_user = def;
    SymExpr alloc = pool && ub ? SymExpr(*ub) : size;
    st.hoisted = hoistable(alloc);
    storages_.push_back(st);
    plan_.storages.push_back({f_.name, st.var, size, ub, dt});
    record(tensor, st.var, def, last, size);
    return storages_.size() - 1;
  }

  void record(const std::string& tensor, const std::string& storage, size_t def, size_t last, const SymExpr& size) {
    plan_.tensors.push_back({f_.name, tensor, storage, static_cast<int>(def), static_cast<int>(last), size});
  }

  // Kernel with its workspace temporary moved to an extra trailing output.
  const PrimFunc& lifted(const PrimFunc& p) {
    auto it = lifted_.find(p.name);
    if (it != lifted_.end()) return *m_.find_prim(it->second);
    PrimFunc q = p;
    q.name = m_.unique_global_name(p.name + "_ws");
    auto t = std::find_if(q.temps.begin(), q.temps.end(), [&](const BufferDecl& d) { return d.name == *p.workspace; });
    q.params.push_back(*t);
    q.temps.erase(t);
    q.num_outputs += 1;
    q.workspace.reset();
    lifted_[p.name] = q.name;
    m_.prim_funcs.push_back(std::move(q));
    return m_.prim_funcs.back();
  }

  Block block(const Block& blk, const std::set<std::string>& elsewhere) {
    storages_.clear();
    const auto& bs = blk.bindings;
    std::map<std::string, size_t> last_use;
    std::set<std::string> escaping(elsewhere.begin(), elsewhere.end());
    for (size_t i = 0; i < bs.size(); ++i) {
      std::vector<std::string> used;
      collect_uses(bs[i].value, used);
      for (const auto& u : used) {
        last_use[u] = i;
        if (!blk.dataflow || !consuming_use(bs[i])) escaping.insert(u);
      }
    }
    detail::AnnEnv& env = env_;
    std::vector<std::vector<Binding>> before(bs.size());
    std::vector<Binding> rewritten = bs;
    for (size_t i = 0; i < bs.size(); ++i) {
      if (i > 0) detail::add_binding_ann(rewritten[i - 1], env);
      Binding& b = rewritten[i];
      if (b.value->kind == ExprKind::kIf) {
        auto n = std::make_shared<ExprNode>(*b.value);
        auto saved = std::move(storages_);
        n->then_body = std::make_shared<const Body>(body(*b.value->then_body, {}));
        n->else_body = std::make_shared<const Body>(body(*b.value->else_body, {}));
        storages_ = std::move(saved);
        b.value = n;
        continue;
      }
      if (!is_dps(b.value) || !b.value->dests.empty() || b.is_match_cast()) continue;
      const Annotation& out = *b.value->out_ann;
      std::vector<std::pair<std::vector<SymExpr>, DType>> outs;
      if (out.is_tensor() && out.known_dims() && out.dtype()) {
        outs.push_back({*out.known_dims(), *out.dtype()});
      } else if (out.is_tuple()) {
        for (const auto& fa : out.fields()) {
          if (!fa.is_tensor() || !fa.known_dims() || !fa.dtype()) {
            outs.clear();
            break;
          }
          outs.push_back({*fa.known_dims(), *fa.dtype()});
        }
      }
      if (outs.empty()) {
        record(b.var, "", i, i, SymExpr(0));
        continue;
      }
      bool pool = blk.dataflow && out.is_tensor();
      size_t last = last_use.count(b.var) ? std::max(last_use[b.var], i) : i;
      if (escaping.count(b.var)) last = bs.size();
      std::vector<std::string> dests;
      for (size_t k = 0; k < outs.size(); ++k) {
        std::string label = outs.size() == 1 ? b.var : b.var + "." + std::to_string(k);
        size_t s = place(label, outs[k].first, outs[k].second, pool, i, last);
        dests.push_back(alloc_tensor(before[i], s, b.var, outs[k].first, outs[k].second));
      }
      Expr call = b.value;
      if (call->kind == ExprKind::kCallTir) {
        const PrimFunc* p = m_.find_prim(call->name);
        if (p && p->workspace) {
          std::vector<std::vector<SymExpr>> dims;
          for (const auto& a : call->args) {
            Annotation aa = detail::operand_ann(a, env);
            const auto* d = aa.known_dims();
            dims.push_back(d ? *d : std::vector<SymExpr>{});
          }
          for (const auto& o : outs) dims.push_back(o.first);
          SymSubst ksub = bind_prim_vars(*p, dims, call->tir_vars.value_or(std::vector<SymExpr>{}));
          const BufferDecl* ws = p->find_buffer(*p->workspace);
          std::vector<SymExpr> wdims;
          for (const auto& d : ws->dims) wdims.push_back(substitute(d, ksub));
          DType wdt = ws->dtype;
          std::string wname = b.var + ".workspace";
          size_t s = place(wname, wdims, wdt, blk.dataflow, i, i);
          dests.push_back(alloc_tensor(before[i], s, b.var + "_ws", wdims, wdt));
          auto n = std::make_shared<ExprNode>(*call);
          n->name = lifted(*p).name;
          call = n;
        }
      }
      b.value = with_dests(call, dests);
    }

    if (!rewritten.empty()) detail::add_binding_ann(rewritten.back(), env);

    Block out{blk.dataflow, {}};
    auto storage_binding = [&](const LocalStorage& st) {
      SymExpr alloc = st.reusable && st.ub ? SymExpr(*st.ub) : st.size;
      return Binding{Binding::Kind::kBind, st.var, Annotation::object(), make_alloc_storage(alloc, st.dtype), {}};
    };
    for (const auto& st : storages_) {
      if (st.hoisted) out.bindings.push_back(storage_binding(st));
    }
    for (size_t i = 0; i < rewritten.size(); ++i) {
      for (const auto& st : storages_) {
        if (!st.hoisted && st.first_user == i) out.bindings.push_back(storage_binding(st));
      }
      for (auto& pre : before[i]) out.bindings.push_back(std::move(pre));
      out.bindings.push_back(std::move(rewritten[i]));
    }
    return out;
  }

  std::string alloc_tensor(std::vector<Binding>& into, size_t storage, const std::string& base,
                           const std::vector<SymExpr>& dims, DType dt) {
    std::string name = fresh_local_name(base + "_buf", taken_);
    into.push_back({Binding::Kind::kBind, name, Annotation::tensor(ShapeSpec::known(dims), dt),
                    make_alloc_tensor(storages_[storage].var, dims, dt), {}});
    return name;
  }

  Module& m_;
  StoragePlan& plan_;
  Function& f_;
  std::vector<std::string> taken_;
  std::set<SymVar> param_vars_;
  std::vector<LocalStorage> storages_;
  int next_storage_ = 0;
  std::map<std::string, std::string> lifted_;
  detail::AnnEnv env_;
};

}  // namespace

std::pair<Module, StoragePlan> plan_memory(const Module& m) {
  Module out = m;
  StoragePlan plan;
  for (size_t i = 0; i < out.functions.size(); ++i) {
    Function f = out.functions[i];
    Planner(out, plan, f).run();
    out.functions[i] = std::move(f);
  }
  return {std::move(out), std::move(plan)};
}

}  // namespace symrelax
