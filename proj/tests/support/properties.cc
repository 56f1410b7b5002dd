// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "properties.h"

#include <functional>
#include <memory>
#include <sstream>

#include "symrelax/annotation.h"
#include "symrelax/deduce.h"
#include "symrelax/error.h"
#include "symrelax/inputs.h"
#include "symrelax/interpreter.h"
#include "symrelax/symexpr.h"
#include "symrelax/tprog.h"
#include "test_support.h"

namespace symrelax::testing {

namespace {

// ---------------------------------------------------------------------------
// Integer expressions against a reference evaluator.

struct RefExpr {
  enum class Op { kConst, kVar, kAdd, kSub, kMul, kDiv, kMod, kMax, kMin };
  Op op = Op::kConst;
  int64_t value = 0;  // constant, or variable index
  std::shared_ptr<RefExpr> lhs;
  std::shared_ptr<RefExpr> rhs;
};
using RefPtr = std::shared_ptr<RefExpr>;

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int64_t ref_eval(const RefExpr& e, const std::vector<int64_t>& env) {
  switch (e.op) {
    case RefExpr::Op::kConst:
      return e.value;
    case RefExpr::Op::kVar:
      return env[static_cast<size_t>(e.value)];
    default:
      break;
  }
  int64_t a = ref_eval(*e.lhs, env);
  int64_t b = ref_eval(*e.rhs, env);
  switch (e.op) {
    case RefExpr::Op::kAdd:
      return a + b;
    case RefExpr::Op::kSub:
      return a - b;
    case RefExpr::Op::kMul:
      return a * b;
    case RefExpr::Op::kDiv:
      return floor_div(a, b);
    case RefExpr::Op::kMod:
      return a - floor_div(a, b) * b;
    case RefExpr::Op::kMax:
      return std::max(a, b);
    default:
      return std::min(a, b);
  }
}

RefPtr ref_leaf(std::mt19937_64& rng, int nvars, bool positive) {
  auto e = std::make_shared<RefExpr>();
  if (rng() % 2 == 0) {
    e->op = RefExpr::Op::kVar;
    e->value = static_cast<int64_t>(rng() % static_cast<uint64_t>(nvars));
  } else {
    e->value = positive ? 1 + static_cast<int64_t>(rng() % 6) : static_cast<int64_t>(rng() % 13) - 6;
  }
  return e;
}

RefPtr ref_random(std::mt19937_64& rng, int depth, int nvars) {
  if (depth == 0 || rng() % 4 == 0) return ref_leaf(rng, nvars, false);
  auto e = std::make_shared<RefExpr>();
  static constexpr RefExpr::Op kOps[] = {RefExpr::Op::kAdd, RefExpr::Op::kAdd, RefExpr::Op::kSub,
                                         RefExpr::Op::kMul, RefExpr::Op::kMul, RefExpr::Op::kDiv,
                                         RefExpr::Op::kMod, RefExpr::Op::kMax, RefExpr::Op::kMin};
  e->op = kOps[rng() % std::size(kOps)];
  e->lhs = ref_random(rng, depth - 1, nvars);
  // Divisors are positive constants or variables, which are always >= 1.
  bool divides = e->op == RefExpr::Op::kDiv || e->op == RefExpr::Op::kMod;
  e->rhs = divides ? ref_leaf(rng, nvars, true) : ref_random(rng, depth - 1, nvars);
  return e;
}

// Builds the SymExpr through the public operators. With `commute`, operands
// of + and * are swapped.
SymExpr to_sym(const RefExpr& e, const std::vector<SymVar>& vars, bool commute) {
  switch (e.op) {
    case RefExpr::Op::kConst:
      return SymExpr(e.value);
    case RefExpr::Op::kVar:
      return SymExpr(vars[static_cast<size_t>(e.value)]);
    default:
      break;
  }
  SymExpr a = to_sym(*e.lhs, vars, commute);
  SymExpr b = to_sym(*e.rhs, vars, commute);
  switch (e.op) {
    case RefExpr::Op::kAdd:
      return commute ? b + a : a + b;
    case RefExpr::Op::kSub:
      return a - b;
    case RefExpr::Op::kMul:
      return commute ? b * a : a * b;
    case RefExpr::Op::kDiv:
      return floordiv(a, b);
    case RefExpr::Op::kMod:
      return mod(a, b);
    case RefExpr::Op::kMax:
      return max(a, b);
    default:
      return min(a, b);
  }
}

// ---------------------------------------------------------------------------
// Annotations.

struct AnnGen {
  std::mt19937_64& rng;
  std::vector<SymExpr> pool;

  bool coin() { return rng() % 2 == 0; }

  ShapeSpec spec() {
    switch (rng() % 4) {
      case 0:
        return ShapeSpec::unconstrained();
      case 1:
        return ShapeSpec::rank_only(static_cast<int>(rng() % 3));
      default: {
        std::vector<SymExpr> dims(rng() % 3);
        for (auto& d : dims) d = pool[rng() % pool.size()];
        return ShapeSpec::known(dims);
      }
    }
  }

  Annotation ann(int depth) {
    switch (rng() % (depth > 0 ? 5 : 4)) {
      case 0:
        return Annotation::object();
      case 1:
        return Annotation::shape(spec());
      case 4: {
        std::vector<Annotation> fields(rng() % 3);
        for (auto& f : fields) f = ann(depth - 1);
        return Annotation::tuple(fields);
      }
      default: {
        std::optional<DType> dt;
        if (rng() % 3) dt = coin() ? DType::kF32 : DType::kI64;
        return Annotation::tensor(spec(), dt);
      }
    }
  }

  // A random supertype of `a` by dropping detail.
  Annotation coarsen(const Annotation& a) {
    if (rng() % 5 == 0) return Annotation::object();
    auto weaker = [&](const ShapeSpec& s) {
      if (!coin()) return s;
      if (s.is_known()) return coin() ? ShapeSpec::rank_only(s.rank()) : ShapeSpec::unconstrained();
      return ShapeSpec::unconstrained();
    };
    switch (a.kind()) {
      case Annotation::Kind::kTensor: {
        std::optional<DType> dt = a.dtype();
        if (coin()) dt.reset();
        return Annotation::tensor(weaker(a.shape_spec()), dt);
      }
      case Annotation::Kind::kShape:
        return Annotation::shape(weaker(a.shape_spec()));
      case Annotation::Kind::kTuple: {
        std::vector<Annotation> fields;
        for (const auto& f : a.fields()) fields.push_back(coarsen(f));
        return Annotation::tuple(fields);
      }
      default:
        return a;
    }
  }
};

// ---------------------------------------------------------------------------
// Random modules.

struct ModuleGen {
  std::mt19937_64& rng;
  // Shape classes: A=(n, 4), B=(4, n), F=(4*n,), R=(n, 1).
  std::vector<std::pair<std::string, char>> vals;
  std::ostringstream body;
  int next = 0;

  std::string pick(char cls) {
    std::vector<std::string> c;
    for (const auto& [name, k] : vals) {
      if (k == cls) c.push_back(name);
    }
    return c.empty() ? "" : c[rng() % c.size()];
  }
  std::string number() {
    static const char* kNums[] = {"0", "1", "-1", "0.5", "2", "0.25", "-0.75", "1.5"};
    return kNums[rng() % std::size(kNums)];
  }
  void emit(const std::string& rhs, char cls) {
    std::string name = "lv" + std::to_string(next++);
    body << "    " << name << " = " << rhs << ";\n";
    vals.push_back({name, cls});
  }
  bool step() {
    static const char* kBinary[] = {"add", "sub", "mul"};
    switch (rng() % 9) {
      case 0:
      case 1: {
        char cls = "ABF"[rng() % 3];
        std::string v = pick(cls);
        if (v.empty()) return false;
        emit(std::string(rng() % 2 ? "exp" : "relu") + "(" + v + ")", cls);
        return true;
      }
      case 2:
      case 3: {
        char cls = "ABF"[rng() % 3];
        std::string a = pick(cls);
        std::string b = pick(cls);
        if (a.empty()) return false;
        emit(std::string(kBinary[rng() % 3]) + "(" + a + ", " + b + ")", cls);
        return true;
      }
      case 4: {
        bool from_a = rng() % 2;
        std::string v = pick(from_a ? 'A' : 'B');
        if (v.empty()) return false;
        emit("permute_dims(" + v + ", axes=[1, 0])", from_a ? 'B' : 'A');
        return true;
      }
      case 5: {
        std::string v = pick('A');
        if (v.empty()) return false;
        emit("flatten(" + v + ")", 'F');
        return true;
      }
      case 6: {
        std::string v = pick('F');
        if (v.empty()) return false;
        emit("reshape(" + v + ", shape(n, 4))", 'A');
        return true;
      }
      case 7: {
        std::string v = pick('A');
        if (v.empty()) return false;
        if (rng() % 2) {
          emit("sum(" + v + ", axis=[1], keepdims=1)", 'R');
        } else {
          emit("add(" + v + ", const(f32, (4,), [" + number() + ", " + number() + ", " + number() + ", " + number() +
                   "]))",
               'A');
        }
        return true;
      }
      default: {
        std::string a = pick('A');
        std::string r = pick('R');
        if (a.empty() || r.empty()) return false;
        emit("add(" + r + ", const(f32, (1,), [8]))", 'R');
        emit("divide(" + a + ", " + vals.back().first + ")", 'A');
        return true;
      }
    }
  }
};

void check_round_trip(const Module& m, const std::string& what, PropertyResult& r) {
  ++r.cases;
  try {
    std::string t1 = print_module(m);
    Module m2 = parse_module(t1, what);
    std::string t2 = print_module(m2);
    if (t1 != t2) {
      r.fail(what + ": printed text changed after reparse");
    } else if (!structurally_equal(m, m2)) {
      r.fail(what + ": reparsed module differs structurally");
    }
  } catch (const std::exception& e) {
    r.fail(what + ": " + e.what());
  }
}

Value interpret_at(const Module& m, const std::map<std::string, int64_t>& bind, const std::vector<Value>& args) {
  InterpretOptions io;
  io.bind = bind;
  return interpret(m, "main", args, io);
}

}  // namespace

PropertyResult symexpr_properties(int cases, uint64_t seed) {
  PropertyResult r;
  std::mt19937_64 rng(seed);
  std::vector<SymVar> vars = {SymVar::fresh("a"), SymVar::fresh("b"), SymVar::fresh("c")};
  for (int i = 0; i < cases; ++i) {
    ++r.cases;
    RefPtr ref = ref_random(rng, 4, 3);
    RefPtr other = ref_random(rng, 3, 3);
    SymExpr e = to_sym(*ref, vars, false);
    SymExpr c = to_sym(*ref, vars, true);
    SymExpr o = to_sym(*other, vars, false);
    SymExpr n = normalize(e);
    std::string tag = "case " + std::to_string(i) + " " + to_string(e);
    if (!structurally_equal(normalize(n), n)) r.fail(tag + ": normalize is not idempotent");
    if (prove_equal(e, c) != Provability::kProvablyEqual) r.fail(tag + ": commuted form not proved equal");
    Provability verdict = prove_equal(e, o);
    for (int k = 0; k < 3; ++k) {
      std::vector<int64_t> env = {1 + static_cast<int64_t>(rng() % 9), 1 + static_cast<int64_t>(rng() % 9),
                                  1 + static_cast<int64_t>(rng() % 9)};
      SymValues sv = {{vars[0], env[0]}, {vars[1], env[1]}, {vars[2], env[2]}};
      int64_t want = ref_eval(*ref, env);
      try {
        if (evaluate(e, sv) != want || evaluate(n, sv) != want) {
          r.fail(tag + ": evaluates to " + std::to_string(evaluate(n, sv)) + ", reference " + std::to_string(want));
        }
        int64_t ov = ref_eval(*other, env);
        if (verdict == Provability::kProvablyEqual && ov != want) r.fail(tag + ": proved equal but differs");
        if (verdict == Provability::kProvablyUnequal && ov == want) r.fail(tag + ": proved unequal but agrees");
      } catch (const std::exception& ex) {
        r.fail(tag + ": " + ex.what());
      }
    }
  }
  return r;
}

PropertyResult annotation_properties(int cases, uint64_t seed) {
  PropertyResult r;
  std::mt19937_64 rng(seed);
  SymVar n = SymVar::fresh("n");
  SymVar m = SymVar::fresh("m");
  AnnGen gen{rng, {SymExpr(n), SymExpr(m), SymExpr(4), 2 * SymExpr(n), SymExpr(n) + 1, SymExpr(n) * SymExpr(m)}};
  for (int i = 0; i < cases; ++i) {
    ++r.cases;
    Annotation a = gen.ann(2);
    Annotation b = gen.coin() ? gen.coarsen(a) : gen.ann(2);
    Annotation c = gen.coin() ? gen.coarsen(b) : gen.ann(2);
    std::string tag = to_string(a) + " / " + to_string(b) + " / " + to_string(c);
    if (subsumes(a, a) != Tri::kYes) r.fail("not reflexive: " + to_string(a));
    if (subsumes(a, Annotation::object()) != Tri::kYes) r.fail("Object is not on top: " + to_string(a));
    if (subsumes(a, gen.coarsen(a)) != Tri::kYes) r.fail("coarsening is not a supertype: " + to_string(a));
    Tri ab = subsumes(a, b);
    Tri bc = subsumes(b, c);
    if (ab == Tri::kYes && bc == Tri::kYes && subsumes(a, c) != Tri::kYes) r.fail("not transitive: " + tag);
    if (ab == Tri::kYes && subsumes(b, a) == Tri::kYes && !structurally_equal(a, b)) {
      r.fail("not antisymmetric: " + tag);
    }
    Annotation j = join(a, b);
    if (subsumes(a, j) != Tri::kYes || subsumes(b, j) != Tri::kYes) r.fail("join is not an upper bound: " + tag);
    if (ab == Tri::kYes && !structurally_equal(j, b)) r.fail("join with a supertype is not the supertype: " + tag);
  }
  return r;
}

std::string random_module_text(std::mt19937_64& rng) {
  ModuleGen g{rng, {{"x", 'A'}, {"y", 'A'}}, {}, 0};
  int steps = 2 + static_cast<int>(rng() % 8);
  for (int made = 0, tries = 0; made < steps && tries < 100; ++tries) {
    if (g.step()) ++made;
  }
  std::string ret = g.vals.back().first;
  if (g.vals.size() > 3 && rng() % 3 == 0) ret = "(" + g.vals[g.vals.size() - 2].first + ", " + ret + ")";
  std::ostringstream out;
  out << "fn main(x: Tensor((n, 4), f32), y: Tensor((n, 4), f32)) sym(n) {\n  df {\n"
      << g.body.str() << "  }\n  return " << ret << ";\n}\n";
  return out.str();
}

PropertyResult round_trip_properties(int generated, uint64_t seed) {
  PropertyResult r;
  for (const auto& name : corpus_names()) {
    try {
      Module m = parse_corpus(name);
      check_round_trip(m, name, r);
      check_round_trip(deduced(m), name + " (deduced)", r);
      Module cur = m;
      for (const auto& p : preset_passes("default")) {
        cur = run_pass(p, cur);
        check_round_trip(cur, name + " after " + p, r);
      }
    } catch (const std::exception& e) {
      r.fail(name + ": " + e.what());
    }
  }
  std::mt19937_64 rng(seed);
  int prims = 0;
  for (int i = 0; i < generated; ++i) {
    std::string text = random_module_text(rng);
    std::string tag = "generated " + std::to_string(i);
    try {
      Module m = parse_module(text);
      check_round_trip(m, tag, r);
      Module lowered = run_pass("fuse-tir", run_pass("fuse", run_pass("legalize", m)));
      for (const auto& p : lowered.prim_funcs) {
        ++r.cases;
        ++prims;
        Module back = parse_module(print_prim_func(p), tag);
        if (back.prim_funcs.size() != 1 || !structurally_equal(back.prim_funcs[0], p)) {
          r.fail(tag + ": prim_fn @" + p.name + " changed after reparse");
        }
      }
    } catch (const std::exception& e) {
      r.fail(tag + ": " + e.what() + "\n" + text);
    }
  }
  if (prims < generated) r.fail("only " + std::to_string(prims) + " kernels generated");
  return r;
}

PropertyResult classify_golden() {
  PropertyResult r;
  SymVar n = SymVar::fresh("n");
  auto t = [](std::vector<SymExpr> dims) { return Annotation::tensor(std::move(dims), DType::kF32); };
  SymExpr N(n);
  struct Row {
    std::string op;
    std::vector<Annotation> args;
    OpAttrs attrs;
    PatternKind want;
  };
  std::vector<Row> rows = {
      {"add", {t({N, 4}), t({N, 4})}, {}, PatternKind::kElementWise},
      {"mul", {t({N, 4}), t({N, 4})}, {}, PatternKind::kElementWise},
      {"exp", {t({N, 4})}, {}, PatternKind::kElementWise},
      {"relu", {t({2 * N})}, {}, PatternKind::kElementWise},
      {"add", {t({N, 4}), t({4})}, {}, PatternKind::kBroadcast},
      {"divide", {t({N, 4}), t({N, 1})}, {}, PatternKind::kBroadcast},
      {"reshape", {t({4 * N}), Annotation::shape(ShapeSpec::known({N, 4}))}, {}, PatternKind::kInjective},
      {"flatten", {t({N, 4})}, {}, PatternKind::kInjective},
      {"permute_dims", {t({N, 4})}, {{"axes", {1, 0}}}, PatternKind::kInjective},
      {"concat", {t({N, 4}), t({N, 2})}, {{"axis", {1}}}, PatternKind::kInjective},
      {"matmul", {t({N, 4}), t({4, 8})}, {}, PatternKind::kReduction},
      {"sum", {t({N, 4})}, {{"axis", {1}}}, PatternKind::kReduction},
  };
  for (const auto& row : rows) {
    ++r.cases;
    try {
      Annotation out = deduce_op(row.op, row.args, row.attrs).ann;
      PatternKind got = classify(derive_prim(row.op, row.attrs, row.args, out, row.op + "_kernel"));
      if (got != row.want) {
        r.fail(row.op + ": got " + pattern_kind_name(got) + ", want " + pattern_kind_name(row.want));
      }
    } catch (const std::exception& e) {
      r.fail(row.op + ": " + e.what());
    }
  }
  ++r.cases;
  try {
    Module m = parse_corpus("compound_add_relu");
    m = run_preset(m, "default");
    for (const auto& p : m.prim_funcs) {
      if (p.stages.size() > 1 && classify(p) != PatternKind::kOpaque) r.fail(p.name + ": multi-stage is not Opaque");
    }
  } catch (const std::exception& e) {
    r.fail(std::string("fused kernel: ") + e.what());
  }
  return r;
}

PropertyResult pipeline_composition(uint64_t seed) {
  PropertyResult r;
  for (const auto& name : corpus_names()) {
    Module original = deduced(parse_corpus(name));
    const Function* f = original.find_function("main");
    auto bind = bind_all(*f, 3);
    std::vector<Value> args;
    Value want;
    try {
      args = random_inputs(*f, bind, seed);
      want = interpret_at(original, bind, args);
    } catch (const std::exception& e) {
      r.fail(name + ": reference run failed: " + e.what());
      continue;
    }
    for (const std::string preset : {"default", "dispatch"}) {
      std::string tag = name + " [" + preset + "]";
      try {
        Module cur = original;
        for (const auto& p : preset_passes(preset)) {
          ++r.cases;
          cur = run_pass(p, cur);
          std::string why;
          if (!same_value(interpret_at(cur, bind, args), want, 1e-5, &why)) r.fail(tag + " after " + p + ": " + why);
        }
        ++r.cases;
        if (print_module(cur) != print_module(run_preset(original, preset))) {
          r.fail(tag + ": pass-by-pass result differs from the preset");
        }
        ++r.cases;
        std::string why;
        if (!same_value(run_vm(compile(original, preset), "main", args), want, 1e-5, &why)) {
          r.fail(tag + " on the VM: " + why);
        }
      } catch (const std::exception& e) {
        r.fail(tag + ": " + e.what());
      }
    }
  }
  return r;
}

}  // namespace symrelax::testing
