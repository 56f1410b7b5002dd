// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/interpreter.h"

#include "symrelax/deduce.h"
#include "symrelax/error.h"
#include "symrelax/reference_ops.h"

namespace symrelax {

namespace {

struct DimPair {
  SymExpr dim;
  int64_t actual;
};

bool collect_dims(const Annotation& ann, const Value& v, std::vector<DimPair>& out) {
  auto shape_ok = [&](const ShapeSpec& spec, const std::vector<int64_t>& shape) {
    switch (spec.kind) {
      case ShapeSpec::Kind::kUnconstrained:
        return true;
      case ShapeSpec::Kind::kRankOnly:
        return spec.ndim == static_cast<int>(shape.size());
      case ShapeSpec::Kind::kKnown:
        if (spec.dims.size() != shape.size()) return false;
        for (size_t i = 0; i < shape.size(); ++i) out.push_back({spec.dims[i], shape[i]});
        return true;
    }
    return false;
  };
  switch (ann.kind()) {
    case Annotation::Kind::kObject:
    case Annotation::Kind::kCallable:
      return true;
    case Annotation::Kind::kTensor: {
      const auto* t = std::get_if<NDArray>(&v);
      if (!t) return false;
      if (ann.dtype() && *ann.dtype() != t->dtype()) return false;
      return shape_ok(ann.shape_spec(), t->shape());
    }
    case Annotation::Kind::kShape: {
      const auto* s = std::get_if<ShapeTuple>(&v);
      return s && shape_ok(ann.shape_spec(), *s);
    }
    case Annotation::Kind::kTuple: {
      const auto* t = std::get_if<std::shared_ptr<TupleValue>>(&v);
      if (!t || (*t)->fields.size() != ann.fields().size()) return false;
      for (size_t i = 0; i < ann.fields().size(); ++i) {
        if (!collect_dims(ann.fields()[i], (*t)->fields[i], out)) return false;
      }
      return true;
    }
  }
  return false;
}

}  // namespace

void match_value(const Annotation& ann, const Value& v, SymValues& env, const std::string& site) {
  auto fail = [&]() {
    SymSubst known;
    for (const auto& [var, val] : env) known[var] = SymExpr(val);
    throw ShapeCheckFailed(site, to_string(substitute(ann, known)), describe(v));
  };
  std::vector<DimPair> pairs;
  if (!collect_dims(ann, v, pairs)) fail();
  for (const auto& p : pairs) {
    if (p.dim.is_var() && !env.count(p.dim.var())) env[p.dim.var()] = p.actual;
  }
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& p : pairs) {
      std::vector<SymVar> open;
      for (const auto& x : free_vars(p.dim)) {
        if (!env.count(x)) open.push_back(x);
      }
      if (open.size() != 1) continue;
      auto lf = linear_in(p.dim, open[0]);
      if (!lf) continue;
      int64_t diff = p.actual - evaluate(lf->rest, env);
      if (diff % lf->coeff != 0) fail();
      env[open[0]] = diff / lf->coeff;
      progress = true;
    }
  }
  for (const auto& p : pairs) {
    for (const auto& x : free_vars(p.dim)) {
      if (!env.count(x)) {
        throw Error(ErrorKind::kUnboundSymbol, "cannot determine " + x.name() + " at check " + site);
      }
    }
    if (evaluate(p.dim, env) != p.actual) fail();
  }
}

namespace {

struct Frame {
  const Function* fn = nullptr;
  std::map<std::string, Value> vars;
  SymValues env;
};

class Interpreter {
 public:
  Interpreter(const Module& m, const InterpretOptions& opts)
      : m_(m), libs_(opts.libs ? *opts.libs : LibraryRegistry::reference()), stats_(opts.stats) {
    for (auto& s : deduce_module(m).sites) sites_[{s.function, s.var}].push_back(std::move(s));
  }

  Value call(const Function& f, const std::vector<Value>& args, SymValues env) {
    if (args.size() != f.params.size()) {
      throw Error(ErrorKind::kArityMismatch, "@" + f.name + " takes " + std::to_string(f.params.size()) +
                                                 " arguments, got " + std::to_string(args.size()));
    }
    Frame fr;
    fr.fn = &f;
    fr.env = std::move(env);
    for (size_t i = 0; i < args.size(); ++i) {
      match_value(f.params[i].ann, args[i], fr.env, f.name + "/param/" + f.params[i].name);
      fr.vars[f.params[i].name] = args[i];
    }
    Value result = run_body(f.body, fr);
    for (const auto& s : sites_for(f.name, "")) {
      if (s.kind == CheckSite::Kind::kReturn) match_value(s.expected, result, fr.env, s.id);
    }
    return result;
  }

 private:
  const std::vector<CheckSite>& sites_for(const std::string& fn, const std::string& var) const {
    static const std::vector<CheckSite> kNone;
    auto it = sites_.find({fn, var});
    return it == sites_.end() ? kNone : it->second;
  }

  Value run_body(const Body& b, Frame& fr) {
    for (const auto& blk : b.blocks) {
      for (const auto& bind : blk.bindings) {
        Value v = eval(bind.value, fr, bind.var);
        for (const auto& s : sites_for(fr.fn->name, bind.var)) {
          if (s.kind != CheckSite::Kind::kCallArg) match_value(s.expected, v, fr.env, s.id);
        }
        fr.vars[bind.var] = std::move(v);
      }
    }
    return eval(b.result, fr, "");
  }

  std::vector<Value> eval_args(const Expr& e, Frame& fr, const std::string& var) {
    std::vector<Value> out;
    for (const auto& a : e->args) out.push_back(eval(a, fr, var));
    for (const auto& s : sites_for(fr.fn->name, var)) {
      if (s.kind == CheckSite::Kind::kCallArg && s.arg_index >= 0 && s.arg_index < static_cast<int>(out.size())) {
        match_value(s.expected, out[static_cast<size_t>(s.arg_index)], fr.env, s.id);
      }
    }
    return out;
  }

  NDArray alloc_for(const Annotation& ann, const Frame& fr) {
    const auto* dims = ann.known_dims();
    if (!ann.is_tensor() || !dims || !ann.dtype()) {
      throw Error(ErrorKind::kRuntime, "cannot allocate an output of type " + to_string(ann));
    }
    std::vector<int64_t> shape;
    for (const auto& d : *dims) shape.push_back(evaluate(d, fr.env));
    return NDArray::empty(*ann.dtype(), shape, stats_);
  }

  // Inputs followed by outputs (planned destinations or fresh allocations).
  std::vector<NDArray> dps_buffers(const Expr& e, const std::vector<Value>& args, const Frame& fr) {
    std::vector<NDArray> bufs;
    for (const auto& a : args) {
      const auto* t = std::get_if<NDArray>(&a);
      if (!t) throw Error(ErrorKind::kRuntime, e->name + ": argument is " + describe(a) + ", not a tensor");
      bufs.push_back(*t);
    }
    const Annotation& out = *e->out_ann;
    if (!e->dests.empty()) {
      for (const auto& d : e->dests) {
        auto it = fr.vars.find(d);
        const auto* t = it == fr.vars.end() ? nullptr : std::get_if<NDArray>(&it->second);
        if (!t) throw Error(ErrorKind::kRuntime, "destination " + d + " is not a tensor");
        bufs.push_back(*t);
      }
    } else if (out.is_tuple()) {
      for (const auto& f : out.fields()) bufs.push_back(alloc_for(f, fr));
    } else {
      bufs.push_back(alloc_for(out, fr));
    }
    return bufs;
  }

  static Value dps_result(const std::vector<NDArray>& bufs, size_t first_out, const Annotation& out) {
    if (!out.is_tuple()) return bufs[first_out];
    std::vector<Value> fields;
    for (size_t i = 0; i < out.fields().size(); ++i) fields.emplace_back(bufs[first_out + i]);
    return make_tuple_value(std::move(fields));
  }

  Value eval(const Expr& e, Frame& fr, const std::string& var) {
    switch (e->kind) {
      case ExprKind::kVarRef: {
        auto it = fr.vars.find(e->name);
        if (it == fr.vars.end()) throw Error(ErrorKind::kUnboundSymbol, "undefined variable " + e->name, e->span);
        return it->second;
      }
      case ExprKind::kConstTensor:
        return e->data;
      case ExprKind::kShapeLiteral: {
        ShapeTuple s;
        for (const auto& d : e->dims) s.push_back(evaluate(d, fr.env));
        return s;
      }
      case ExprKind::kTupleMake: {
        std::vector<Value> fields;
        for (const auto& a : e->args) fields.push_back(eval(a, fr, var));
        return make_tuple_value(std::move(fields));
      }
      case ExprKind::kTupleGet: {
        Value t = eval(e->args[0], fr, var);
        const auto* tup = std::get_if<std::shared_ptr<TupleValue>>(&t);
        if (!tup || e->index < 0 || e->index >= static_cast<int64_t>((*tup)->fields.size())) {
          throw Error(ErrorKind::kRuntime, "bad tuple access on " + describe(t));
        }
        return (*tup)->fields[static_cast<size_t>(e->index)];
      }
      case ExprKind::kCallOp: {
        auto args = eval_args(e, fr, var);
        return eval_op(e->name, e->attrs, args, stats_);
      }
      case ExprKind::kCallFunc: {
        auto args = eval_args(e, fr, var);
        const Function* callee = m_.find_function(e->name);
        if (!callee) throw Error(ErrorKind::kUnboundSymbol, "call to undefined function @" + e->name);
        return call(*callee, args, {});
      }
      case ExprKind::kCallTir: {
        auto args = eval_args(e, fr, var);
        const PrimFunc* p = m_.find_prim(e->name);
        if (!p) throw Error(ErrorKind::kUnboundSymbol, "call to undefined prim_fn @" + e->name);
        std::vector<int64_t> scalars;
        if (e->tir_vars) {
          for (const auto& d : *e->tir_vars) scalars.push_back(evaluate(d, fr.env));
        }
        auto bufs = dps_buffers(e, args, fr);
        exec_prim(*p, bufs, scalars);
        return dps_result(bufs, args.size(), *e->out_ann);
      }
      case ExprKind::kCallDpsLibrary: {
        auto args = eval_args(e, fr, var);
        const LibraryRoutine* r = libs_.find(e->name);
        if (!r) throw Error(ErrorKind::kUnresolvedExtern, "no library routine named \"" + e->name + "\"");
        auto bufs = dps_buffers(e, args, fr);
        (*r)(bufs);
        return dps_result(bufs, args.size(), *e->out_ann);
      }
      case ExprKind::kCallBuiltin: {
        if (e->name == "alloc_storage") {
          return std::make_shared<Storage>(evaluate(e->dims[0], fr.env), stats_);
        }
        auto args = eval_args(e, fr, var);
        if (e->name == "alloc_tensor") {
          const auto* st = std::get_if<std::shared_ptr<Storage>>(&args[0]);
          if (!st) throw Error(ErrorKind::kRuntime, "alloc_tensor needs a storage, got " + describe(args[0]));
          std::vector<int64_t> shape;
          for (const auto& d : e->dims) shape.push_back(evaluate(d, fr.env));
          return NDArray::view(*st, 0, *e->dtype, shape);
        }
        const BuiltinRoutine* b = find_builtin(e->name);
        if (!b) throw Error(ErrorKind::kUnresolvedExtern, "no builtin named \"" + e->name + "\"");
        return (*b)(args, stats_);
      }
      case ExprKind::kIf: {
        Value c = eval(e->args[0], fr, var);
        const auto* t = std::get_if<NDArray>(&c);
        if (!t || t->numel() < 1) throw Error(ErrorKind::kRuntime, "if condition must be a non-empty tensor");
        return run_body(t->get(0) != 0 ? *e->then_body : *e->else_body, fr);
      }
    }
    return std::monostate{};
  }

  const Module& m_;
  const LibraryRegistry& libs_;
  std::shared_ptr<AllocStats> stats_;
  std::map<std::pair<std::string, std::string>, std::vector<CheckSite>> sites_;
};

}  // namespace

Value interpret(const Module& m, const std::string& entry, const std::vector<Value>& args,
                const InterpretOptions& opts) {
  const Function* f = m.find_function(entry);
  if (!f) throw Error(ErrorKind::kUsage, "no function named @" + entry);
  SymValues env;
  for (const auto& [name, value] : opts.bind) {
    auto v = f->find_sym(name);
    if (!v) throw Error(ErrorKind::kUsage, "@" + entry + " has no symbolic variable " + name);
    env[*v] = value;
  }
  Interpreter in(m, opts);
  return in.call(*f, args, std::move(env));
}

}  // namespace symrelax
