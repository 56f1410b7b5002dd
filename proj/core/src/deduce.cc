// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/deduce.h"

#include <algorithm>
#include <set>

#include "symrelax/error.h"

namespace symrelax {

std::string CheckSite::describe() const {
  return "expected " + to_string(expected) + ", got " + to_string(actual) + " [" + id + "]";
}

namespace {

[[noreturn]] void conflict(const std::string& msg, const SourceSpan& span = {}) {
  throw Error(ErrorKind::kAnnotationConflict, msg, span);
}

Annotation as_tensor(const Annotation& a, const std::string& op, size_t i) {
  if (a.is_tensor()) return a;
  if (a.is_object()) return Annotation::tensor(ShapeSpec::unconstrained(), std::nullopt);
  conflict(op + " operand " + std::to_string(i) + " must be a tensor, got " + to_string(a));
}

std::optional<DType> merge_dtype(const std::optional<DType>& a, const std::optional<DType>& b,
                                 const std::string& op) {
  if (a && b && *a != *b) {
    conflict(op + " mixes " + dtype_name(*a) + " and " + dtype_name(*b));
  }
  return a ? a : b;
}

SymExpr product(const std::vector<SymExpr>& dims) {
  SymExpr p = 1;
  for (const auto& d : dims) p = p * d;
  return normalize(p);
}

void require_arity(const std::string& op, std::span<const Annotation> args, size_t n) {
  if (args.size() != n) {
    throw Error(ErrorKind::kArityMismatch,
                op + " takes " + std::to_string(n) + " arguments, got " + std::to_string(args.size()));
  }
}

RuleResult rule_broadcast(const std::string& op, std::span<const Annotation> args) {
  require_arity(op, args, 2);
  Annotation a = as_tensor(args[0], op, 0);
  Annotation b = as_tensor(args[1], op, 1);
  auto dt = merge_dtype(a.dtype(), b.dtype(), op);
  if (op == "divide" && dt && *dt != DType::kF32) conflict("divide is defined for f32 only");
  int ra = a.shape_spec().rank();
  int rb = b.shape_spec().rank();
  if (ra < 0 || rb < 0) return {Annotation::tensor(ShapeSpec::unconstrained(), dt), {}, false};
  int r = std::max(ra, rb);
  if (!a.shape_spec().is_known() || !b.shape_spec().is_known()) {
    return {Annotation::tensor(ShapeSpec::rank_only(r), dt), {}, false};
  }
  const auto& da = a.shape_spec().dims;
  const auto& db = b.shape_spec().dims;
  std::vector<SymExpr> out(static_cast<size_t>(r));
  bool fallback = false;
  for (int k = 0; k < r; ++k) {
    int ia = k - (r - ra);
    int ib = k - (r - rb);
    if (ia < 0) {
      out[k] = db[ib];
      continue;
    }
    if (ib < 0) {
      out[k] = da[ia];
      continue;
    }
    const SymExpr& x = da[ia];
    const SymExpr& y = db[ib];
    Provability p = prove_equal(x, y);
    if (p == Provability::kProvablyEqual) {
      out[k] = x;
    } else if (x.as_const() == 1) {
      out[k] = y;
    } else if (y.as_const() == 1) {
      out[k] = x;
    } else if (p == Provability::kProvablyUnequal) {
      conflict(op + " cannot broadcast " + to_string(x) + " with " + to_string(y));
    } else {
      fallback = true;
    }
  }
  if (fallback) return {Annotation::tensor(ShapeSpec::rank_only(r), dt), {}, true};
  return {Annotation::tensor(ShapeSpec::known(out), dt), {}, false};
}

RuleResult rule_matmul(std::span<const Annotation> args) {
  require_arity("matmul", args, 2);
  Annotation a = as_tensor(args[0], "matmul", 0);
  Annotation b = as_tensor(args[1], "matmul", 1);
  auto dt = merge_dtype(a.dtype(), b.dtype(), "matmul");
  for (const auto* x : {&a, &b}) {
    int r = x->shape_spec().rank();
    if (r >= 0 && r != 2) conflict("matmul expects rank-2 operands, got " + to_string(*x));
  }
  if (!a.shape_spec().is_known() || !b.shape_spec().is_known()) {
    return {Annotation::tensor(ShapeSpec::rank_only(2), dt), {}, false};
  }
  const auto& da = a.shape_spec().dims;
  const auto& db = b.shape_spec().dims;
  RuleResult r{Annotation::tensor(ShapeSpec::known({da[0], db[1]}), dt), {}, false};
  switch (prove_equal(da[1], db[0])) {
    case Provability::kProvablyEqual:
      break;
    case Provability::kProvablyUnequal:
      conflict("matmul inner dimensions " + to_string(da[1]) + " and " + to_string(db[0]) + " differ");
    case Provability::kUnknown:
      r.arg_checks.push_back({1, Annotation::tensor(ShapeSpec::known({da[1], db[1]}), b.dtype())});
      break;
  }
  return r;
}

RuleResult rule_reshape(std::span<const Annotation> args) {
  require_arity("reshape", args, 2);
  Annotation a = as_tensor(args[0], "reshape", 0);
  const Annotation& s = args[1];
  if (!s.is_shape() && !s.is_object()) conflict("reshape takes a shape value, got " + to_string(s));
  if (!s.is_shape() || s.shape_spec().kind == ShapeSpec::Kind::kUnconstrained) {
    return {Annotation::tensor(ShapeSpec::unconstrained(), a.dtype()), {}, false};
  }
  if (!s.shape_spec().is_known()) return {Annotation::tensor(s.shape_spec(), a.dtype()), {}, false};
  const auto& nd = s.shape_spec().dims;
  if (a.shape_spec().is_known() &&
      prove_equal(product(a.shape_spec().dims), product(nd)) == Provability::kProvablyUnequal) {
    conflict("reshape changes the element count from " + to_string(product(a.shape_spec().dims)) + " to " +
             to_string(product(nd)));
  }
  return {Annotation::tensor(ShapeSpec::known(nd), a.dtype()), {}, false};
}

RuleResult rule_permute(std::span<const Annotation> args, const OpAttrs& attrs) {
  require_arity("permute_dims", args, 1);
  Annotation a = as_tensor(args[0], "permute_dims", 0);
  int r = a.shape_spec().rank();
  if (r < 0) return {a, {}, false};
  std::vector<int64_t> axes = attr_ints(attrs, "axes");
  if (axes.empty()) {
    for (int k = r; k-- > 0;) axes.push_back(k);
  }
  if (static_cast<int>(axes.size()) != r) conflict("permute_dims axes do not match rank " + std::to_string(r));
  std::vector<bool> seen(static_cast<size_t>(r), false);
  for (auto& x : axes) {
    x = normalize_axis(x, r);
    if (seen[static_cast<size_t>(x)]) conflict("permute_dims axes are not a permutation");
    seen[static_cast<size_t>(x)] = true;
  }
  if (!a.shape_spec().is_known()) return {a, {}, false};
  std::vector<SymExpr> out;
  for (auto x : axes) out.push_back(a.shape_spec().dims[static_cast<size_t>(x)]);
  return {Annotation::tensor(ShapeSpec::known(out), a.dtype()), {}, false};
}

RuleResult rule_concat(std::span<const Annotation> args, const OpAttrs& attrs) {
  if (args.empty()) throw Error(ErrorKind::kArityMismatch, "concat needs at least one argument");
  std::vector<Annotation> ts;
  std::optional<DType> dt;
  int rank = -1;
  bool all_known = true;
  for (size_t i = 0; i < args.size(); ++i) {
    ts.push_back(as_tensor(args[i], "concat", i));
    dt = merge_dtype(dt, ts.back().dtype(), "concat");
    int r = ts.back().shape_spec().rank();
    if (r >= 0) {
      if (rank >= 0 && r != rank) conflict("concat operands differ in rank");
      rank = r;
    }
    all_known &= ts.back().shape_spec().is_known();
  }
  if (rank < 0) return {Annotation::tensor(ShapeSpec::unconstrained(), dt), {}, false};
  auto axis = static_cast<size_t>(normalize_axis(attr_int(attrs, "axis").value_or(0), rank));
  if (!all_known) return {Annotation::tensor(ShapeSpec::rank_only(rank), dt), {}, false};
  RuleResult res;
  std::vector<SymExpr> out = ts[0].shape_spec().dims;
  SymExpr total = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    const auto& d = ts[i].shape_spec().dims;
    total = total + d[axis];
    bool unknown = false;
    for (size_t k = 0; k < d.size(); ++k) {
      if (k == axis) continue;
      Provability p = prove_equal(d[k], out[k]);
      if (p == Provability::kProvablyUnequal) {
        conflict("concat operands differ in dimension " + std::to_string(k));
      }
      unknown |= p == Provability::kUnknown;
    }
    if (unknown) {
      std::vector<SymExpr> want = out;
      want[axis] = d[axis];
      res.arg_checks.push_back({static_cast<int>(i), Annotation::tensor(ShapeSpec::known(want), ts[i].dtype())});
    }
  }
  out[axis] = total;
  res.ann = Annotation::tensor(ShapeSpec::known(out), dt);
  return res;
}

RuleResult rule_split(std::span<const Annotation> args, const OpAttrs& attrs) {
  require_arity("split", args, 1);
  Annotation a = as_tensor(args[0], "split", 0);
  auto sections = attr_int(attrs, "sections");
  auto indices = attr_ints(attrs, "indices");
  if (!sections && indices.empty()) conflict("split needs sections= or indices=");
  if (sections && *sections <= 0) conflict("split sections must be positive");
  size_t pieces = sections ? static_cast<size_t>(*sections) : indices.size() + 1;
  for (size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] < indices[i - 1]) conflict("split indices must be ascending");
  }
  int r = a.shape_spec().rank();
  if (r < 0) {
    return {Annotation::tuple(std::vector<Annotation>(pieces, Annotation::tensor(ShapeSpec::unconstrained(),
                                                                                 a.dtype()))),
            {},
            false};
  }
  auto axis = static_cast<size_t>(normalize_axis(attr_int(attrs, "axis").value_or(0), r));
  if (!a.shape_spec().is_known()) {
    return {Annotation::tuple(std::vector<Annotation>(pieces, Annotation::tensor(ShapeSpec::rank_only(r), a.dtype()))),
            {},
            false};
  }
  RuleResult res;
  const auto& d = a.shape_spec().dims;
  std::vector<SymExpr> sizes;
  if (sections) {
    auto q = exact_div(d[axis], *sections);
    if (!q) {
      if (d[axis].as_const()) conflict("split of " + to_string(d[axis]) + " into uneven sections");
      q = normalize(floordiv(d[axis], *sections));
      std::vector<SymExpr> want = d;
      want[axis] = normalize(*q * *sections);
      res.arg_checks.push_back({0, Annotation::tensor(ShapeSpec::known(want), a.dtype())});
    }
    sizes.assign(pieces, *q);
  } else {
    SymExpr prev = 0;
    for (auto i : indices) {
      sizes.push_back(normalize(SymExpr(i) - prev));
      prev = i;
    }
    sizes.push_back(normalize(d[axis] - prev));
  }
  std::vector<Annotation> fields;
  for (const auto& s : sizes) {
    std::vector<SymExpr> dims = d;
    dims[axis] = s;
    fields.push_back(Annotation::tensor(ShapeSpec::known(dims), a.dtype()));
  }
  res.ann = Annotation::tuple(std::move(fields));
  return res;
}

RuleResult rule_sum(std::span<const Annotation> args, const OpAttrs& attrs) {
  require_arity("sum", args, 1);
  Annotation a = as_tensor(args[0], "sum", 0);
  bool keepdims = attr_int(attrs, "keepdims").value_or(0) != 0;
  auto axes = attr_ints(attrs, "axis");
  int r = a.shape_spec().rank();
  if (r < 0) return {Annotation::tensor(ShapeSpec::unconstrained(), a.dtype()), {}, false};
  std::vector<bool> reduced(static_cast<size_t>(r), axes.empty());
  for (auto x : axes) reduced[static_cast<size_t>(normalize_axis(x, r))] = true;
  int out_rank = 0;
  for (int k = 0; k < r; ++k) out_rank += (keepdims || !reduced[static_cast<size_t>(k)]) ? 1 : 0;
  if (!a.shape_spec().is_known()) return {Annotation::tensor(ShapeSpec::rank_only(out_rank), a.dtype()), {}, false};
  std::vector<SymExpr> out;
  for (int k = 0; k < r; ++k) {
    if (!reduced[static_cast<size_t>(k)]) {
      out.push_back(a.shape_spec().dims[static_cast<size_t>(k)]);
    } else if (keepdims) {
      out.emplace_back(1);
    }
  }
  return {Annotation::tensor(ShapeSpec::known(out), a.dtype()), {}, false};
}

}  // namespace

RuleResult deduce_op(const std::string& op, std::span<const Annotation> args, const OpAttrs& attrs) {
  if (!is_known_op(op)) throw Error(ErrorKind::kUnknownOperator, "unknown operator " + op);
  if (is_binary_broadcast_op(op)) return rule_broadcast(op, args);
  if (is_unary_elementwise_op(op)) {
    require_arity(op, args, 1);
    return {as_tensor(args[0], op, 0), {}, false};
  }
  if (op == "matmul") return rule_matmul(args);
  if (op == "flatten") {
    require_arity(op, args, 1);
    Annotation a = as_tensor(args[0], op, 0);
    if (!a.shape_spec().is_known()) return {Annotation::tensor(ShapeSpec::rank_only(1), a.dtype()), {}, false};
    return {Annotation::tensor(ShapeSpec::known({product(a.shape_spec().dims)}), a.dtype()), {}, false};
  }
  if (op == "reshape") return rule_reshape(args);
  if (op == "permute_dims") return rule_permute(args, attrs);
  if (op == "concat") return rule_concat(args, attrs);
  if (op == "split") return rule_split(args, attrs);
  if (op == "sum") return rule_sum(args, attrs);
  // unique: data-dependent length.
  require_arity(op, args, 1);
  Annotation a = as_tensor(args[0], op, 0);
  int r = a.shape_spec().rank();
  if (r >= 0 && r != 1) conflict("unique expects a rank-1 tensor, got " + to_string(a));
  return {Annotation::tensor(ShapeSpec::rank_only(1), a.dtype()), {}, false};
}

// ---------------------------------------------------------------------------
// Call boundaries

namespace {

void collect_dim_pairs(const Annotation& param, const Annotation& arg,
                       std::vector<std::pair<SymExpr, SymExpr>>& out) {
  if (param.is_tuple() && arg.is_tuple() && param.fields().size() == arg.fields().size()) {
    for (size_t i = 0; i < param.fields().size(); ++i) collect_dim_pairs(param.fields()[i], arg.fields()[i], out);
    return;
  }
  const auto* pd = param.known_dims();
  const auto* ad = arg.known_dims();
  if (!pd || !ad || pd->size() != ad->size() || param.kind() != arg.kind()) return;
  for (size_t i = 0; i < pd->size(); ++i) out.push_back({(*pd)[i], (*ad)[i]});
}

bool mentions_any(const SymExpr& e, const std::set<SymVar>& vars) {
  for (const auto& v : free_vars(e)) {
    if (vars.count(v)) return true;
  }
  return false;
}

// Replaces shapes that still mention `unbound` variables with their rank.
Annotation coarsen(const Annotation& a, const std::set<SymVar>& unbound) {
  switch (a.kind()) {
    case Annotation::Kind::kTensor:
    case Annotation::Kind::kShape: {
      const auto* dims = a.known_dims();
      if (!dims) return a;
      bool bad = std::any_of(dims->begin(), dims->end(), [&](const SymExpr& d) { return mentions_any(d, unbound); });
      if (!bad) return a;
      ShapeSpec s = ShapeSpec::rank_only(static_cast<int>(dims->size()));
      return a.is_tensor() ? Annotation::tensor(s, a.dtype()) : Annotation::shape(s);
    }
    case Annotation::Kind::kTuple: {
      std::vector<Annotation> f;
      for (const auto& x : a.fields()) f.push_back(coarsen(x, unbound));
      return Annotation::tuple(std::move(f));
    }
    default:
      return a;
  }
}

}  // namespace

CallResult deduce_call(const Annotation& callee_sig, std::span<const Annotation> arg_anns) {
  if (callee_sig.kind() != Annotation::Kind::kCallable) conflict("callee is not callable");
  const auto& params = callee_sig.fields();
  if (params.size() != arg_anns.size()) {
    throw Error(ErrorKind::kArityMismatch, "call passes " + std::to_string(arg_anns.size()) + " arguments, callee takes " +
                                               std::to_string(params.size()));
  }
  auto sig_vars = free_vars(callee_sig);
  std::set<SymVar> callee_vars(sig_vars.begin(), sig_vars.end());
  std::vector<std::pair<SymExpr, SymExpr>> pairs;
  for (size_t i = 0; i < params.size(); ++i) collect_dim_pairs(params[i], arg_anns[i], pairs);

  CallResult res;
  for (const auto& [p, a] : pairs) {
    if (p.is_var() && callee_vars.count(p.var()) && !res.subst.count(p.var())) res.subst[p.var()] = a;
  }
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& [p, a] : pairs) {
      std::vector<SymVar> open;
      for (const auto& v : free_vars(p)) {
        if (callee_vars.count(v) && !res.subst.count(v)) open.push_back(v);
      }
      if (open.size() != 1) continue;
      auto lf = linear_in(p, open[0]);
      if (!lf || lf->coeff == 0) continue;
      auto q = exact_div(normalize(a - substitute(lf->rest, res.subst)), lf->coeff);
      if (!q) continue;
      res.subst[open[0]] = *q;
      progress = true;
    }
  }
  std::set<SymVar> unbound;
  for (const auto& v : callee_vars) {
    if (!res.subst.count(v)) unbound.insert(v);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Annotation expected = coarsen(substitute(params[i], res.subst), unbound);
    switch (subsumes(arg_anns[i], expected)) {
      case Tri::kYes:
        break;
      case Tri::kNo:
        conflict("argument " + std::to_string(i) + " has " + to_string(arg_anns[i]) + ", callee expects " +
                 to_string(expected));
      case Tri::kUnknown:
        res.arg_checks.push_back({static_cast<int>(i), expected});
        break;
    }
  }
  res.ret = coarsen(substitute(callee_sig.ret(), res.subst), unbound);
  return res;
}

// ---------------------------------------------------------------------------
// Functions

namespace {

class ModuleDeducer;

class FunctionDeducer {
 public:
  FunctionDeducer(ModuleDeducer& md, const Function& f) : md_(md), f_(f) {}

  DeducedFunction run();

 private:
  Body body(const Body& b, std::map<std::string, Annotation>& env);
  std::pair<Annotation, Expr> expr(const Expr& e, const std::string& var, const SourceSpan& span,
                                   std::map<std::string, Annotation>& env);

  void add_site(CheckSite::Kind kind, const std::string& var, int arg, const Annotation& expected,
                const Annotation& actual, const SourceSpan& span) {
    CheckSite s;
    s.kind = kind;
    s.function = f_.name;
    s.var = var;
    s.arg_index = arg;
    s.expected = expected;
    s.actual = actual;
    s.span = span;
    switch (kind) {
      case CheckSite::Kind::kMatchCast:
        s.id = f_.name + "/match_cast/" + var;
        break;
      case CheckSite::Kind::kAnnotation:
        s.id = f_.name + "/annot/" + var;
        break;
      case CheckSite::Kind::kCallArg:
        s.id = f_.name + "/call/" + var + "/arg" + std::to_string(arg);
        break;
      case CheckSite::Kind::kOpResult:
        s.id = f_.name + "/op/" + var;
        break;
      case CheckSite::Kind::kReturn:
        s.id = f_.name + "/return";
        break;
    }
    sites_.push_back(std::move(s));
  }

  ModuleDeducer& md_;
  const Function& f_;
  std::vector<CheckSite> sites_;
};

class ModuleDeducer {
 public:
  explicit ModuleDeducer(const Module& m) : m_(m) {}

  const Module& module() const { return m_; }

  const DeducedFunction& function(const std::string& name) {
    auto it = done_.find(name);
    if (it != done_.end()) return it->second;
    const Function* f = m_.find_function(name);
    if (!f) throw Error(ErrorKind::kUnboundSymbol, "call to undefined function @" + name);
    if (!active_.insert(name).second) {
      throw Error(ErrorKind::kAnnotationConflict, "recursive call to @" + name + " needs a declared return annotation");
    }
    DeducedFunction d = FunctionDeducer(*this, *f).run();
    active_.erase(name);
    return done_.emplace(name, std::move(d)).first->second;
  }

  Annotation signature(const std::string& name) {
    const Function* f = m_.find_function(name);
    if (!f) throw Error(ErrorKind::kUnboundSymbol, "call to undefined function @" + name);
    if (f->ret_ann) return f->signature();
    return function(name).func.signature();
  }

 private:
  const Module& m_;
  std::map<std::string, DeducedFunction> done_;
  std::set<std::string> active_;
};

DeducedFunction FunctionDeducer::run() {
  std::map<std::string, Annotation> env;
  for (const auto& p : f_.params) env[p.name] = p.ann;
  DeducedFunction out;
  out.func = f_;
  out.func.body = body(f_.body, env);
  auto [res, _] = expr(f_.body.result, "", f_.span, env);
  if (f_.ret_ann) {
    switch (subsumes(res, *f_.ret_ann)) {
      case Tri::kYes:
        break;
      case Tri::kNo:
        conflict(f_.name + " returns " + to_string(res) + ", declared " + to_string(*f_.ret_ann), f_.span);
      case Tri::kUnknown:
        add_site(CheckSite::Kind::kReturn, "", -1, *f_.ret_ann, res, f_.span);
        break;
    }
  } else {
    out.func.ret_ann = res;
  }
  // Return-site records come last so sites stay in program order.
  out.sites = std::move(sites_);
  return out;
}

Body FunctionDeducer::body(const Body& b, std::map<std::string, Annotation>& env) {
  Body out;
  for (const auto& blk : b.blocks) {
    Block nb{blk.dataflow, {}};
    for (const auto& bind : blk.bindings) {
      Binding nbind = bind;
      auto [ann, value] = expr(bind.value, bind.var, bind.span, env);
      nbind.value = value;
      if (bind.is_match_cast()) {
        switch (subsumes(ann, *bind.ann)) {
          case Tri::kYes:
            break;
          case Tri::kNo:
            conflict("match_cast of " + to_string(ann) + " to " + to_string(*bind.ann) + " always fails", bind.span);
          case Tri::kUnknown:
            add_site(CheckSite::Kind::kMatchCast, bind.var, -1, *bind.ann, ann, bind.span);
            break;
        }
        env[bind.var] = *bind.ann;
      } else if (bind.ann) {
        switch (subsumes(ann, *bind.ann)) {
          case Tri::kYes:
            env[bind.var] = ann;
            break;
          case Tri::kNo:
            conflict(bind.var + " is annotated " + to_string(*bind.ann) + " but deduced " + to_string(ann), bind.span);
          case Tri::kUnknown:
            add_site(CheckSite::Kind::kAnnotation, bind.var, -1, *bind.ann, ann, bind.span);
            env[bind.var] = *bind.ann;
            break;
        }
      } else {
        nbind.ann = ann;
        env[bind.var] = ann;
      }
      nb.bindings.push_back(std::move(nbind));
    }
    out.blocks.push_back(std::move(nb));
  }
  out.result = b.result;
  return out;
}

std::pair<Annotation, Expr> FunctionDeducer::expr(const Expr& e, const std::string& var, const SourceSpan& span,
                                                  std::map<std::string, Annotation>& env) {
  const SourceSpan& where = e->span.valid() ? e->span : span;
  auto arg_anns = [&]() {
    std::vector<Annotation> out;
    for (const auto& a : e->args) out.push_back(expr(a, var, span, env).first);
    return out;
  };
  switch (e->kind) {
    case ExprKind::kVarRef: {
      auto it = env.find(e->name);
      if (it == env.end()) throw Error(ErrorKind::kUnboundSymbol, "undefined variable " + e->name, where);
      return {it->second, e};
    }
    case ExprKind::kConstTensor: {
      std::vector<SymExpr> dims(e->data.shape().begin(), e->data.shape().end());
      return {Annotation::tensor(ShapeSpec::known(dims), e->data.dtype()), e};
    }
    case ExprKind::kShapeLiteral:
      return {Annotation::shape(ShapeSpec::known(e->dims)), e};
    case ExprKind::kTupleMake:
      return {Annotation::tuple(arg_anns()), e};
    case ExprKind::kTupleGet: {
      Annotation t = expr(e->args[0], var, span, env).first;
      if (t.is_object()) return {t, e};
      if (!t.is_tuple()) conflict("indexing a non-tuple " + to_string(t), where);
      if (e->index < 0 || e->index >= static_cast<int64_t>(t.fields().size())) {
        conflict("tuple index " + std::to_string(e->index) + " out of range for " + to_string(t), where);
      }
      return {t.fields()[static_cast<size_t>(e->index)], e};
    }
    case ExprKind::kCallOp: {
      auto args = arg_anns();
      RuleResult r;
      try {
        r = deduce_op(e->name, args, e->attrs);
      } catch (const Error& err) {
        if (err.span().valid()) throw;
        throw Error(err.kind(), err.detail(), where);
      }
      for (const auto& [i, want] : r.arg_checks) {
        add_site(CheckSite::Kind::kCallArg, var, i, want, args[static_cast<size_t>(i)], where);
      }
      if (r.fallback) add_site(CheckSite::Kind::kOpResult, var, -1, r.ann, r.ann, where);
      return {r.ann, e};
    }
    case ExprKind::kCallFunc: {
      auto args = arg_anns();
      CallResult r;
      try {
        r = deduce_call(md_.signature(e->name), args);
      } catch (const Error& err) {
        if (err.span().valid()) throw;
        throw Error(err.kind(), "@" + e->name + ": " + err.detail(), where);
      }
      for (const auto& [i, want] : r.arg_checks) {
        add_site(CheckSite::Kind::kCallArg, var, i, want, args[static_cast<size_t>(i)], where);
      }
      return {r.ret, e};
    }
    case ExprKind::kCallTir:
    case ExprKind::kCallDpsLibrary:
      arg_anns();
      return {*e->out_ann, e};
    case ExprKind::kCallBuiltin:
      arg_anns();
      if (e->name == "alloc_storage") return {Annotation::object(), e};
      if (e->name == "alloc_tensor") return {Annotation::tensor(ShapeSpec::known(e->dims), e->dtype), e};
      return {e->out_ann.value_or(Annotation::object()), e};
    case ExprKind::kIf: {
      Annotation c = expr(e->args[0], var, span, env).first;
      if (!c.is_tensor() && !c.is_object()) conflict("if condition must be a tensor, got " + to_string(c), where);
      std::map<std::string, Annotation> then_env = env;
      std::map<std::string, Annotation> else_env = env;
      Body tb = body(*e->then_body, then_env);
      Annotation ta = expr(tb.result, var, span, then_env).first;
      Body eb = body(*e->else_body, else_env);
      Annotation ea = expr(eb.result, var, span, else_env).first;
      auto n = std::make_shared<ExprNode>(*e);
      n->then_body = std::make_shared<const Body>(std::move(tb));
      n->else_body = std::make_shared<const Body>(std::move(eb));
      return {join(ta, ea), n};
    }
  }
  return {Annotation::object(), e};
}

}  // namespace

DeducedFunction deduce_function(const Module& m, const std::string& name) {
  ModuleDeducer md(m);
  return md.function(name);
}

DeducedModule deduce_module(const Module& m) {
  ModuleDeducer md(m);
  DeducedModule out;
  out.module = m;
  for (auto& f : out.module.functions) {
    const DeducedFunction& d = md.function(f.name);
    f = d.func;
    out.sites.insert(out.sites.end(), d.sites.begin(), d.sites.end());
  }
  return out;
}

std::multimap<std::string, std::string> site_notes(const std::vector<CheckSite>& sites) {
  std::multimap<std::string, std::string> out;
  for (const auto& s : sites) {
    std::string key = s.function + "/" + (s.kind == CheckSite::Kind::kReturn ? std::string("return") : s.var);
    out.emplace(key, "dyncheck: " + s.describe());
  }
  return out;
}

}  // namespace symrelax
