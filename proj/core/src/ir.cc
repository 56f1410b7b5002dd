// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/ir.h"

#include <algorithm>
#include <cstring>
#include <set>

namespace symrelax {

namespace {

std::shared_ptr<ExprNode> node(ExprKind kind) {
  auto n = std::make_shared<ExprNode>();
  n->kind = kind;
  return n;
}

}  // namespace

Expr make_var(std::string name, SourceSpan span) {
  auto n = node(ExprKind::kVarRef);
  n->name = std::move(name);
  n->span = std::move(span);
  return n;
}

Expr make_const(NDArray data) {
  auto n = node(ExprKind::kConstTensor);
  n->data = std::move(data);
  return n;
}

Expr make_shape(std::vector<SymExpr> dims) {
  auto n = node(ExprKind::kShapeLiteral);
  for (auto& d : dims) d = normalize(d);
  n->dims = std::move(dims);
  return n;
}

Expr make_tuple(std::vector<Expr> fields) {
  auto n = node(ExprKind::kTupleMake);
  n->args = std::move(fields);
  return n;
}

Expr make_tuple_get(Expr tuple, int64_t index) {
  auto n = node(ExprKind::kTupleGet);
  n->args = {std::move(tuple)};
  n->index = index;
  return n;
}

Expr make_call_op(std::string op, std::vector<Expr> args, OpAttrs attrs) {
  auto n = node(ExprKind::kCallOp);
  n->name = std::move(op);
  n->args = std::move(args);
  n->attrs = std::move(attrs);
  return n;
}

Expr make_call_func(std::string callee, std::vector<Expr> args) {
  auto n = node(ExprKind::kCallFunc);
  n->name = std::move(callee);
  n->args = std::move(args);
  return n;
}

Expr make_call_tir(std::string prim, std::vector<Expr> args, Annotation out_ann,
                   std::optional<std::vector<SymExpr>> tir_vars, std::vector<std::string> dests) {
  auto n = node(ExprKind::kCallTir);
  n->name = std::move(prim);
  n->args = std::move(args);
  n->out_ann = std::move(out_ann);
  if (tir_vars) {
    for (auto& v : *tir_vars) v = normalize(v);
  }
  n->tir_vars = std::move(tir_vars);
  n->dests = std::move(dests);
  return n;
}

Expr make_call_library(std::string extern_name, std::vector<Expr> args, Annotation out_ann,
                       std::vector<std::string> dests) {
  auto n = node(ExprKind::kCallDpsLibrary);
  n->name = std::move(extern_name);
  n->args = std::move(args);
  n->out_ann = std::move(out_ann);
  n->dests = std::move(dests);
  return n;
}

Expr make_call_builtin(std::string builtin, std::vector<Expr> args, Annotation out_ann) {
  auto n = node(ExprKind::kCallBuiltin);
  n->name = std::move(builtin);
  n->args = std::move(args);
  n->out_ann = std::move(out_ann);
  return n;
}

Expr make_alloc_storage(SymExpr size_bytes, DType dtype) {
  auto n = node(ExprKind::kCallBuiltin);
  n->name = "alloc_storage";
  n->dims = {normalize(size_bytes)};
  n->dtype = dtype;
  return n;
}

Expr make_alloc_tensor(std::string storage, std::vector<SymExpr> shape, DType dtype) {
  auto n = node(ExprKind::kCallBuiltin);
  n->name = "alloc_tensor";
  n->args = {make_var(std::move(storage))};
  for (auto& d : shape) d = normalize(d);
  n->dims = std::move(shape);
  n->dtype = dtype;
  return n;
}

Expr make_if(Expr cond, Body then_body, Body else_body) {
  auto n = node(ExprKind::kIf);
  n->args = {std::move(cond)};
  n->then_body = std::make_shared<const Body>(std::move(then_body));
  n->else_body = std::make_shared<const Body>(std::move(else_body));
  return n;
}

Expr with_dests(const Expr& e, std::vector<std::string> dests) {
  auto n = std::make_shared<ExprNode>(*e);
  n->dests = std::move(dests);
  return n;
}

// ---------------------------------------------------------------------------

std::optional<SymVar> Function::find_sym(const std::string& sym) const {
  for (const auto& v : sym_vars) {
    if (v.name() == sym) return v;
  }
  return std::nullopt;
}

bool Function::has_attr(const std::string& attr) const {
  return std::find(attrs.begin(), attrs.end(), attr) != attrs.end();
}

Annotation Function::signature() const {
  std::vector<Annotation> ps;
  for (const auto& p : params) ps.push_back(p.ann);
  return Annotation::callable(std::move(ps), ret_ann.value_or(Annotation::object()));
}

const Function* Module::find_function(const std::string& name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Function* Module::find_function(const std::string& name) {
  for (auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const PrimFunc* Module::find_prim(const std::string& name) const {
  for (const auto& p : prim_funcs) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool Module::has_extern(const std::string& name) const {
  return std::any_of(externs.begin(), externs.end(), [&](const ExternDecl& e) { return e.name == name; });
}

std::string Module::unique_global_name(const std::string& base) const {
  auto taken = [&](const std::string& n) { return find_function(n) != nullptr || find_prim(n) != nullptr; };
  if (!taken(base)) return base;
  for (int i = 1;; ++i) {
    std::string n = base + "_" + std::to_string(i);
    if (!taken(n)) return n;
  }
}

// ---------------------------------------------------------------------------
// well_formed

namespace {

class WellFormed {
 public:
  explicit WellFormed(const Module& m) : m_(m) {}

  std::vector<Diagnostic> run() {
    std::set<std::string> names;
    for (const auto& f : m_.functions) {
      if (!names.insert(f.name).second) report("duplicate function " + f.name, f.span);
    }
    for (const auto& p : m_.prim_funcs) {
      if (!names.insert(p.name).second) report("duplicate definition " + p.name, {});
      check_prim(p);
    }
    for (const auto& f : m_.functions) check_function(f);
    return std::move(diags_);
  }

 private:
  void report(std::string msg, const SourceSpan& span) { diags_.push_back({std::move(msg), span}); }

  void check_prim(const PrimFunc& p) {
    if (p.num_outputs < 1 || p.num_outputs > static_cast<int>(p.params.size())) {
      report("kernel " + p.name + " has no output buffers", {});
    }
    std::set<SymVar> vars(p.sym_vars.begin(), p.sym_vars.end());
    auto check_dims = [&](const BufferDecl& b) {
      for (const auto& d : b.dims) {
        for (const auto& v : free_vars(d)) {
          if (!vars.count(v)) report("kernel " + p.name + " uses undeclared variable " + v.name(), {});
        }
      }
    };
    for (const auto& b : p.params) check_dims(b);
    for (const auto& b : p.temps) check_dims(b);
    for (const auto& s : p.stages) {
      if (!p.find_buffer(s.out)) report("kernel " + p.name + " writes undeclared buffer " + s.out, {});
      if (!s.reduce.empty() && !s.init) report("kernel " + p.name + " reduction without init", {});
    }
  }

  void check_ann(const Annotation& a, const Function& f, const SourceSpan& span) {
    for (const auto& v : free_vars(a)) {
      if (std::find(f.sym_vars.begin(), f.sym_vars.end(), v) == f.sym_vars.end()) {
        report("symbolic variable " + v.name() + " is not declared in " + f.name, span);
      }
    }
  }

  void check_function(const Function& f) {
    std::vector<std::set<std::string>> scopes(1);
    for (const auto& p : f.params) {
      if (!scopes.back().insert(p.name).second) report("duplicate parameter " + p.name, f.span);
      check_ann(p.ann, f, f.span);
    }
    if (f.ret_ann) check_ann(*f.ret_ann, f, f.span);
    check_body(f.body, f, scopes);
  }

  bool defined(const std::string& n, const std::vector<std::set<std::string>>& scopes) const {
    return std::any_of(scopes.begin(), scopes.end(), [&](const auto& s) { return s.count(n) > 0; });
  }

  void check_body(const Body& body, const Function& f, std::vector<std::set<std::string>>& scopes) {
    for (const auto& blk : body.blocks) {
      for (const auto& b : blk.bindings) {
        if (blk.dataflow && b.value->kind == ExprKind::kIf) {
          report("if inside dataflow block of " + f.name + " (binding " + b.var + ")", b.span);
        }
        check_expr(b.value, f, scopes, b.span);
        if (b.ann) check_ann(*b.ann, f, b.span);
        if (b.is_match_cast() && !b.ann) report("match_cast without annotation", b.span);
        if (defined(b.var, scopes)) report("variable " + b.var + " defined twice", b.span);
        scopes.back().insert(b.var);
      }
    }
    if (!body.result) {
      report("missing return in " + f.name, f.span);
    } else {
      check_expr(body.result, f, scopes, f.span);
    }
  }

  void check_expr(const Expr& e, const Function& f, std::vector<std::set<std::string>>& scopes,
                  const SourceSpan& span) {
    const SourceSpan& where = e->span.valid() ? e->span : span;
    switch (e->kind) {
      case ExprKind::kVarRef:
        if (!defined(e->name, scopes)) report("use of undefined variable " + e->name, where);
        return;
      case ExprKind::kCallOp:
        if (!is_known_op(e->name)) report("unknown operator " + e->name, where);
        break;
      case ExprKind::kCallFunc:
        if (!m_.find_function(e->name)) report("unresolved function @" + e->name, where);
        break;
      case ExprKind::kCallTir:
        if (!m_.find_prim(e->name)) report("unresolved kernel @" + e->name, where);
        if (e->out_ann) check_dps_ann(*e->out_ann, where);
        break;
      case ExprKind::kCallDpsLibrary:
        if (!m_.has_extern(e->name)) report("undeclared extern \"" + e->name + "\"", where);
        if (e->out_ann) check_dps_ann(*e->out_ann, where);
        break;
      case ExprKind::kShapeLiteral:
        for (const auto& d : e->dims) {
          for (const auto& v : free_vars(d)) {
            if (std::find(f.sym_vars.begin(), f.sym_vars.end(), v) == f.sym_vars.end()) {
              report("symbolic variable " + v.name() + " is not declared in " + f.name, where);
            }
          }
        }
        break;
      default:
        break;
    }
    if (e->out_ann) check_ann(*e->out_ann, f, where);
    for (const auto& a : e->args) check_expr(a, f, scopes, span);
    for (const auto& d : e->dests) {
      if (!defined(d, scopes)) report("use of undefined destination " + d, where);
    }
    if (e->kind == ExprKind::kIf) {
      scopes.emplace_back();
      check_body(*e->then_body, f, scopes);
      scopes.back().clear();
      check_body(*e->else_body, f, scopes);
      scopes.pop_back();
    }
  }

  void check_dps_ann(const Annotation& a, const SourceSpan& span) {
    auto ok = [](const Annotation& t) {
      return t.is_tensor() && t.shape_spec().kind != ShapeSpec::Kind::kUnconstrained;
    };
    bool good = ok(a);
    if (a.is_tuple()) {
      good = std::all_of(a.fields().begin(), a.fields().end(), ok);
    }
    if (!good) report("destination-passing call needs tensor output annotation, got " + to_string(a), span);
  }

  const Module& m_;
  std::vector<Diagnostic> diags_;
};

}  // namespace

std::vector<Diagnostic> well_formed(const Module& m) { return WellFormed(m).run(); }

// ---------------------------------------------------------------------------

void collect_uses(const Expr& e, std::vector<std::string>& out) {
  if (e->kind == ExprKind::kVarRef) out.push_back(e->name);
  for (const auto& a : e->args) collect_uses(a, out);
  for (const auto& d : e->dests) out.push_back(d);
  if (e->kind == ExprKind::kIf) {
    for (const auto* body : {e->then_body.get(), e->else_body.get()}) {
      for (const auto& blk : body->blocks) {
        for (const auto& b : blk.bindings) collect_uses(b.value, out);
      }
      collect_uses(body->result, out);
    }
  }
}

Function dataflow_dce(const Function& f) {
  Function out = f;
  std::set<std::string> live;
  std::vector<std::string> uses;
  collect_uses(f.body.result, uses);
  live.insert(uses.begin(), uses.end());
  for (size_t bi = out.body.blocks.size(); bi-- > 0;) {
    Block& blk = out.body.blocks[bi];
    std::vector<Binding> kept;
    for (size_t i = blk.bindings.size(); i-- > 0;) {
      const Binding& b = blk.bindings[i];
      bool keep = !blk.dataflow || b.is_match_cast() || live.count(b.var) > 0;
      if (!keep) continue;
      uses.clear();
      collect_uses(b.value, uses);
      live.insert(uses.begin(), uses.end());
      kept.push_back(b);
    }
    std::reverse(kept.begin(), kept.end());
    blk.bindings = std::move(kept);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Body erase_body(const Body& body);

Expr erase_expr(const Expr& e) {
  if (e->kind == ExprKind::kCallOp) {
    throw Error(ErrorKind::kNotLowered, "operator " + e->name + " has not been lowered", e->span);
  }
  auto n = std::make_shared<ExprNode>(*e);
  if (n->out_ann) n->out_ann = Annotation::object();
  for (auto& a : n->args) a = erase_expr(a);
  if (n->kind == ExprKind::kIf) {
    n->then_body = std::make_shared<const Body>(erase_body(*e->then_body));
    n->else_body = std::make_shared<const Body>(erase_body(*e->else_body));
  }
  return n;
}

Body erase_body(const Body& body) {
  Body out;
  for (const auto& blk : body.blocks) {
    Block nb{blk.dataflow, {}};
    for (const auto& b : blk.bindings) {
      Binding x = b;
      if (x.ann) x.ann = Annotation::object();
      x.value = erase_expr(b.value);
      nb.bindings.push_back(std::move(x));
    }
    out.blocks.push_back(std::move(nb));
  }
  out.result = erase_expr(body.result);
  return out;
}

}  // namespace

Module erase_annotations(const Module& m) {
  Module out = m;
  for (auto& f : out.functions) {
    for (auto& p : f.params) p.ann = Annotation::object();
    if (f.ret_ann) f.ret_ann = Annotation::object();
    f.body = erase_body(f.body);
  }
  return out;
}

// ---------------------------------------------------------------------------
// structural equality with alpha-renaming of local variables

namespace {

class AlphaEq {
 public:
  bool functions(const Function& a, const Function& b) {
    map_.clear();
    if (a.name != b.name || a.attrs != b.attrs || a.params.size() != b.params.size()) return false;
    if (a.sym_vars.size() != b.sym_vars.size()) return false;
    for (size_t i = 0; i < a.sym_vars.size(); ++i) {
      if (a.sym_vars[i].name() != b.sym_vars[i].name()) return false;
    }
    if (a.upper_bounds.size() != b.upper_bounds.size()) return false;
    for (auto ia = a.upper_bounds.begin(), ib = b.upper_bounds.begin(); ia != a.upper_bounds.end(); ++ia, ++ib) {
      if (ia->first.name() != ib->first.name() || ia->second != ib->second) return false;
    }
    for (size_t i = 0; i < a.params.size(); ++i) {
      if (!structurally_equal(a.params[i].ann, b.params[i].ann)) return false;
      map_[a.params[i].name] = b.params[i].name;
    }
    if (a.ret_ann.has_value() != b.ret_ann.has_value()) return false;
    if (a.ret_ann && !structurally_equal(*a.ret_ann, *b.ret_ann)) return false;
    return bodies(a.body, b.body);
  }

 private:
  bool name(const std::string& a, const std::string& b) const {
    auto it = map_.find(a);
    return it == map_.end() ? a == b : it->second == b;
  }

  static bool dims(const std::vector<SymExpr>& a, const std::vector<SymExpr>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
      if (to_string(a[i]) != to_string(b[i])) return false;
    }
    return true;
  }

  static bool opt_ann(const std::optional<Annotation>& a, const std::optional<Annotation>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || structurally_equal(*a, *b);
  }

  bool bodies(const Body& a, const Body& b) {
    if (a.blocks.size() != b.blocks.size()) return false;
    for (size_t i = 0; i < a.blocks.size(); ++i) {
      const Block& x = a.blocks[i];
      const Block& y = b.blocks[i];
      if (x.dataflow != y.dataflow || x.bindings.size() != y.bindings.size()) return false;
      for (size_t j = 0; j < x.bindings.size(); ++j) {
        const Binding& p = x.bindings[j];
        const Binding& q = y.bindings[j];
        if (p.kind != q.kind || !opt_ann(p.ann, q.ann) || !exprs(p.value, q.value)) return false;
        map_[p.var] = q.var;
      }
    }
    return exprs(a.result, b.result);
  }

  bool exprs(const Expr& a, const Expr& b) {
    if (a->kind != b->kind) return false;
    if (a->kind == ExprKind::kVarRef) return name(a->name, b->name);
    if (a->name != b->name || a->index != b->index || a->dtype != b->dtype || a->attrs != b->attrs) return false;
    if (!dims(a->dims, b->dims) || !opt_ann(a->out_ann, b->out_ann)) return false;
    if (a->tir_vars.has_value() != b->tir_vars.has_value()) return false;
    if (a->tir_vars && !dims(*a->tir_vars, *b->tir_vars)) return false;
    if (a->dests.size() != b->dests.size() || a->args.size() != b->args.size()) return false;
    for (size_t i = 0; i < a->dests.size(); ++i) {
      if (!name(a->dests[i], b->dests[i])) return false;
    }
    for (size_t i = 0; i < a->args.size(); ++i) {
      if (!exprs(a->args[i], b->args[i])) return false;
    }
    if (a->kind == ExprKind::kConstTensor) {
      const NDArray& x = a->data;
      const NDArray& y = b->data;
      if (x.dtype() != y.dtype() || x.shape() != y.shape()) return false;
      if (std::memcmp(x.raw(), y.raw(), static_cast<size_t>(x.nbytes())) != 0) return false;
    }
    if (a->kind == ExprKind::kIf) {
      auto saved = map_;
      bool ok = bodies(*a->then_body, *b->then_body);
      map_ = saved;
      ok = ok && bodies(*a->else_body, *b->else_body);
      map_ = saved;
      return ok;
    }
    return true;
  }

  std::map<std::string, std::string> map_;
};

}  // namespace

bool structurally_equal(const Module& a, const Module& b) {
  if (a.functions.size() != b.functions.size() || a.prim_funcs.size() != b.prim_funcs.size() ||
      a.externs.size() != b.externs.size()) {
    return false;
  }
  for (size_t i = 0; i < a.externs.size(); ++i) {
    if (a.externs[i].name != b.externs[i].name) return false;
  }
  for (size_t i = 0; i < a.prim_funcs.size(); ++i) {
    if (!structurally_equal(a.prim_funcs[i], b.prim_funcs[i])) return false;
  }
  AlphaEq eq;
  for (size_t i = 0; i < a.functions.size(); ++i) {
    if (!eq.functions(a.functions[i], b.functions[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

std::string fresh_local_name(const std::string& base, std::vector<std::string>& taken) {
  std::string n = base;
  for (int i = 1; std::find(taken.begin(), taken.end(), n) != taken.end(); ++i) n = base + std::to_string(i);
  taken.push_back(n);
  return n;
}

namespace {

void body_names(const Body& body, std::vector<std::string>& out) {
  for (const auto& blk : body.blocks) {
    for (const auto& b : blk.bindings) {
      out.push_back(b.var);
      if (b.value->kind == ExprKind::kIf) {
        body_names(*b.value->then_body, out);
        body_names(*b.value->else_body, out);
      }
    }
  }
}

}  // namespace

std::vector<std::string> local_names(const Function& f) {
  std::vector<std::string> out;
  for (const auto& p : f.params) out.push_back(p.name);
  body_names(f.body, out);
  return out;
}

std::string fresh_sym_name(const Function& f, const std::string& base) {
  std::string n = base;
  for (int i = 1; f.find_sym(n); ++i) n = base + std::to_string(i);
  return n;
}

}  // namespace symrelax
