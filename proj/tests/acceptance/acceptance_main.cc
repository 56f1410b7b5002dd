// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "properties.h"
#include "symrelax/deduce.h"
#include "symrelax/error.h"
#include "symrelax/inputs.h"
#include "symrelax/interpreter.h"
#include "symrelax/passes.h"
#include "symrelax/text.h"
#include "symrelax/vm.h"
#include "test_support.h"

namespace {

using namespace symrelax;
using namespace symrelax::testing;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (cond) return;
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string ann_of(const Function& f, const std::string& var) {
  for (const auto& blk : f.body.blocks) {
    for (const auto& b : blk.bindings) {
      if (b.var == var) return b.ann ? to_string(*b.ann) : "<none>";
    }
  }
  return "<missing>";
}

const Binding* binding_of(const Function& f, const std::string& var) {
  for (const auto& blk : f.body.blocks) {
    for (const auto& b : blk.bindings) {
      if (b.var == var) return &b;
    }
  }
  return nullptr;
}

// 1. Deduction on flatten/reshape/exp/unique/match_cast.
Outcome unique_annotations() {
  Outcome o;
  Module m = deduced(parse_corpus("unique_match_cast"));
  const Function& f = *m.find_function("main");
  std::map<std::string, std::string> want = {
      {"lv0", "Tensor((4*n,), f32)"}, {"lv1", "Tensor((n, 4), f32)"}, {"lv3", "Tensor(ndim=1, f32)"},
      {"lv4", "Tensor((m,), f32)"},   {"lv5", "Tensor((m,), f32)"},
  };
  for (const auto& [var, ann] : want) {
    std::string got = ann_of(f, var);
    o.require(got == ann, var + ": got " + got + ", want " + ann);
  }
  const Binding* cast = binding_of(f, "lv4");
  if (cast && cast->ann && cast->ann->known_dims()) {
    SymExpr md = cast->ann->known_dims()->at(0);
    o.require(md.is_var(), "match_cast dim is not a variable");
    if (md.is_var()) {
      SymVar n = *f.find_sym("n");
      o.require(md.var() != n, "m is not fresh");
      o.require(std::find(f.sym_vars.begin(), f.sym_vars.end(), md.var()) != f.sym_vars.end(),
                "m is not a function variable");
    }
  }
  return o;
}

// 2. Signature-only deduction at two call sites.
Outcome call_site_deduction() {
  Outcome o;
  Module m = deduced(parse_corpus("subfn_calls"));
  const Function& f = *m.find_function("main");
  std::string y0 = ann_of(f, "y0");
  std::string y1 = ann_of(f, "y1");
  o.require(y0 == "Tensor((4*n,), f32)", "y0: " + y0);
  o.require(y1 == "Tensor((2*n,), f32)", "y1: " + y1);
  Annotation sig = m.find_function("subfn")->signature();
  SymVar n = *f.find_sym("n");
  auto a = Annotation::tensor({SymExpr(n), 4}, DType::kF32);
  auto b = Annotation::tensor({2, SymExpr(n)}, DType::kF32);
  std::vector<Annotation> a1 = {a};
  std::vector<Annotation> b1 = {b};
  CallResult ca = deduce_call(sig, a1);
  CallResult cb = deduce_call(sig, b1);
  o.require(to_string(ca.ret) == "Tensor((4*n,), f32)", "call 1: " + to_string(ca.ret));
  o.require(to_string(cb.ret) == "Tensor((2*n,), f32)", "call 2: " + to_string(cb.ret));
  o.require(ca.arg_checks.empty() && cb.arg_checks.empty(), "call sites need runtime checks");
  return o;
}

// 3. Fusion over compound dims.
Outcome compound_fusion() {
  Outcome o;
  Module m = deduced(parse_corpus("compound_add_relu"));
  Module fused = run_pass("fuse", run_pass("legalize", m));
  const Function* sub = nullptr;
  for (const auto& f : fused.functions) {
    if (f.has_attr("primitive")) {
      o.require(sub == nullptr, "more than one primitive sub-function");
      sub = &f;
    }
  }
  o.require(sub != nullptr, "no primitive sub-function");
  if (!sub) return o;
  int shape_params = 0;
  for (const auto& p : sub->params) shape_params += p.ann.is_shape();
  o.require(shape_params == 1, "shape parameters: " + std::to_string(shape_params));
  o.require(sub->params.size() == 3, "sub-function parameters: " + std::to_string(sub->params.size()));

  Module merged = run_pass("fuse-tir", fused);
  const Function& main = *merged.find_function("main");
  int calls = 0;
  const Expr* call = nullptr;
  for (const auto& blk : main.body.blocks) {
    for (const auto& b : blk.bindings) {
      if (b.value->kind == ExprKind::kCallTir) {
        ++calls;
        call = &b.value;
      }
      o.require(b.value->kind != ExprKind::kCallFunc, "a sub-function call remains");
    }
  }
  o.require(calls == 1, "call_tir count: " + std::to_string(calls));
  if (!call) return o;
  const PrimFunc* p = merged.find_prim((*call)->name);
  o.require(p != nullptr, "merged kernel missing");
  if (!p) return o;
  o.require(p->stages.size() == 2, "stages: " + std::to_string(p->stages.size()));
  o.require(p->scalar_params.size() == 1 && p->scalar_params[0].name() == "n",
            "scalar params: " + std::to_string(p->scalar_params.size()));
  o.require(p->sym_vars.size() == 1, "kernel variables: " + std::to_string(p->sym_vars.size()));
  o.require((*call)->tir_vars && (*call)->tir_vars->size() == 1, "call passes more than one scalar");
  return o;
}

// Liveness recomputed from the module: [definition, last use] per binding of
// each dataflow block, with escaping values live to the block end.
std::map<std::string, std::pair<int, int>> liveness(const Function& f) {
  std::map<std::string, std::pair<int, int>> out;
  for (size_t bi = 0; bi < f.body.blocks.size(); ++bi) {
    const auto& bs = f.body.blocks[bi].bindings;
    std::set<std::string> escaping;
    std::vector<std::string> uses;
    collect_uses(f.body.result, uses);
    for (size_t k = 0; k < f.body.blocks.size(); ++k) {
      if (k == bi) continue;
      for (const auto& b : f.body.blocks[k].bindings) collect_uses(b.value, uses);
    }
    escaping.insert(uses.begin(), uses.end());
    for (size_t i = 0; i < bs.size(); ++i) {
      int last = static_cast<int>(i);
      for (size_t j = i + 1; j < bs.size(); ++j) {
        std::vector<std::string> u;
        collect_uses(bs[j].value, u);
        if (std::find(u.begin(), u.end(), bs[i].var) != u.end()) last = static_cast<int>(j);
      }
      if (escaping.count(bs[i].var)) last = static_cast<int>(bs.size());
      out[bs[i].var] = {static_cast<int>(i), last};
    }
  }
  return out;
}

// 4. Storage reuse on a chain of four intermediates.
Outcome chain_storages() {
  Outcome o;
  Module legal = run_pass("legalize", deduced(parse_corpus("exp_relu_chain")));
  auto [planned, plan] = plan_memory(deduced(legal));
  o.require(plan.storages.size() == 2, "storages: " + std::to_string(plan.storages.size()));
  o.require(plan.report().ends_with("storages=2\n"), "report does not end with storages=2");
  auto live = liveness(*legal.find_function("main"));
  std::map<std::string, std::vector<std::string>> by_storage;
  for (const auto& t : plan.tensors) {
    o.require(live.count(t.tensor) > 0, "unknown tensor " + t.tensor);
    if (!t.storage.empty()) by_storage[t.storage].push_back(t.tensor);
  }
  o.require(by_storage.size() == 2, "tensors spread over " + std::to_string(by_storage.size()) + " storages");
  for (const auto& [st, ts] : by_storage) {
    for (size_t i = 0; i < ts.size(); ++i) {
      for (size_t j = i + 1; j < ts.size(); ++j) {
        auto a = live[ts[i]];
        auto b = live[ts[j]];
        bool disjoint = a.second < b.first || b.second < a.first;
        o.require(disjoint, st + ": " + ts[i] + " and " + ts[j] + " overlap");
      }
    }
  }
  return o;
}

// 5. Interpreter vs VM over the corpus.
Outcome differential() {
  Outcome o;
  auto names = corpus_names();
  o.require(names.size() >= 25, "corpus has " + std::to_string(names.size()) + " programs");
  int runs = 0;
  for (const auto& name : names) {
    Module m = deduced(parse_corpus(name));
    const Function& f = *m.find_function("main");
    VMProgram prog;
    try {
      prog = compile(m);
    } catch (const std::exception& e) {
      o.require(false, name + ": " + e.what());
      continue;
    }
    for (int64_t n : {1, 2, 3, 5, 8, 17}) {
      for (uint64_t seed = 0; seed < 5; ++seed) {
        std::string tag = name + " n=" + std::to_string(n) + " seed=" + std::to_string(seed);
        try {
          auto bind = bind_all(f, n);
          auto args = random_inputs(f, bind, seed);
          InterpretOptions io;
          io.bind = bind;
          Value want = interpret(m, "main", args, io);
          Value got = run_vm(prog, "main", args);
          std::string why;
          o.require(same_value(got, want, 1e-5, &why), tag + ": " + why);
          ++runs;
        } catch (const std::exception& e) {
          o.require(false, tag + ": " + e.what());
        }
      }
    }
  }
  o.detail = std::to_string(runs) + " runs" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// 6. Upper-bound planning allocates everything up front.
Outcome allocation_budget() {
  Outcome o;
  Module m = deduced(parse_corpus("bounded_mlp"));
  Module cur = m;
  auto passes = preset_passes("default");
  for (size_t i = 0; i + 1 < passes.size(); ++i) cur = run_pass(passes[i], cur);
  auto [planned, plan] = plan_memory(deduced(cur));
  int64_t ub_total = 0;
  size_t main_storages = 0;
  for (const auto& s : plan.storages) {
    if (s.function != "main") continue;
    ++main_storages;
    o.require(s.upper_bound.has_value(), s.id + " has no upper bound");
    ub_total += s.upper_bound.value_or(0);
  }
  VMProgram prog = parse_vm(print_vm(lower_to_vm(planned)));
  const Function& f = *m.find_function("main");
  for (int call = 0; call < 100; ++call) {
    int64_t n = 1 + (call * 37) % 64;
    auto args = random_inputs(f, {{"n", n}}, static_cast<uint64_t>(call));
    RunStats stats;
    run_vm(prog, "main", args, &stats);
    std::string tag = "call " + std::to_string(call) + " n=" + std::to_string(n);
    o.require(stats.late_storage_allocs == 0, tag + ": storage allocated after a kernel");
    o.require(stats.storage_allocs == static_cast<int64_t>(main_storages),
              tag + ": " + std::to_string(stats.storage_allocs) + " storages");
    o.require(stats.peak_bytes <= ub_total, tag + ": peak " + std::to_string(stats.peak_bytes));
    if (!o.pass) break;
  }
  o.detail = std::to_string(main_storages) + " storages, ub " + std::to_string(ub_total) + " bytes" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

struct Adversary {
  std::string program;
  std::vector<Value> args;
  std::string site;
};

NDArray f32(std::vector<int64_t> shape) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> v(static_cast<size_t>(n));
  for (size_t i = 0; i < v.size(); ++i) v[i] = 0.25f * static_cast<float>(i % 7);
  return NDArray::from_f32(shape, v);
}

// 7. Runtime checks name the failing site.
Outcome adversarial() {
  Outcome o;
  const std::string square = "fn main(x: Tensor((n, n), f32)) sym(n) {\n  df {\n    lv0 = exp(x);\n  }\n  return lv0;\n}\n";
  const std::string pair =
      "fn main(x: Tensor((n, 4), f32), y: Tensor((n, 4), f32)) sym(n) {\n  df {\n    lv0 = add(x, y);\n  }\n"
      "  return lv0;\n}\n";
  const std::string cast =
      "fn main(x: Tensor(ndim=2, f32)) {\n  df {\n    lv0 = match_cast(x, Tensor((k, k), f32));\n"
      "    lv1 = exp(lv0);\n  }\n  return lv1;\n}\n";
  const std::string unique =
      "fn main(x: Tensor((n,), f32)) sym(n) {\n  df {\n    lv0 = unique(x);\n"
      "    lv1 = match_cast(lv0, Tensor((n,), f32));\n    lv2 = exp(lv1);\n  }\n  return lv2;\n}\n";
  const std::string annot =
      "fn swap(x: Tensor((m, 4), f32)) -> Tensor(ndim=2, f32) sym(m) {\n  df {\n"
      "    lv0 = permute_dims(x, axes=[1, 0]);\n  }\n  return lv0;\n}\n\n"
      "fn main(x: Tensor((n, 4), f32)) sym(n) {\n  df {\n    lv0: Tensor((n, 4), f32) = @swap(x);\n"
      "    lv1 = exp(lv0);\n  }\n  return lv1;\n}\n";
  const std::string ret =
      "fn flat(x: Tensor((k, 2), f32)) -> Tensor(ndim=1, f32) sym(k) {\n  df {\n    lv0 = flatten(x);\n  }\n"
      "  return lv0;\n}\n\n"
      "fn main(x: Tensor((n, 2), f32)) -> Tensor((n,), f32) sym(n) {\n  df {\n    lv0 = @flat(x);\n  }\n"
      "  return lv0;\n}\n";
  const std::string callarg =
      "fn add2(a: Tensor((k, 4), f32), b: Tensor((k, 4), f32)) -> Tensor((k, 4), f32) sym(k) {\n  df {\n"
      "    lv0 = add(a, b);\n  }\n  return lv0;\n}\n\n"
      "fn main(x: Tensor((n, 4), f32), y: Tensor(ndim=2, f32)) sym(n) {\n  df {\n    lv0 = @add2(x, y);\n  }\n"
      "  return lv0;\n}\n";
  const std::string tuple =
      "fn main(t: Tuple(Tensor((n, 3), f32), Tensor((3,), f32))) sym(n) {\n  df {\n    a = t[0];\n"
      "    b = t[1];\n    lv0 = add(a, b);\n  }\n  return lv0;\n}\n";
  std::vector<float> dup = {1, 1, 2, 2};

  std::vector<Adversary> cases = {
      {square, {f32({2, 3})}, "main/param/x"},
      {square, {f32({4})}, "main/param/x"},
      {pair, {f32({2, 4}), f32({3, 4})}, "main/param/y"},
      {pair, {f32({2, 4}), NDArray::from_i64({2, 4}, std::vector<int64_t>(8, 1))}, "main/param/y"},
      {cast, {f32({2, 3})}, "main/match_cast/lv0"},
      {unique, {NDArray::from_f32({4}, dup)}, "main/match_cast/lv1"},
      {annot, {f32({3, 4})}, "main/annot/lv0"},
      {ret, {f32({3, 2})}, "main/return"},
      {callarg, {f32({2, 4}), f32({3, 4})}, "main/call/lv0/arg1"},
      {tuple, {make_tuple_value({f32({2, 3}), f32({4})})}, "main/param/t"},
  };
  for (size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    std::string tag = "case " + std::to_string(i + 1);
    Module m = deduced(parse_module(c.program));
    auto expect_site = [&](const std::string& engine, const std::function<void()>& run) {
      try {
        run();
        o.require(false, tag + " " + engine + ": no error");
      } catch (const ShapeCheckFailed& e) {
        o.require(e.site() == c.site, tag + " " + engine + ": site " + e.site() + ", want " + c.site);
      } catch (const std::exception& e) {
        o.require(false, tag + " " + engine + ": " + e.what());
      }
    };
    expect_site("interpreter", [&] { interpret(m, "main", c.args); });
    VMProgram prog;
    try {
      prog = compile(m);
    } catch (const std::exception& e) {
      o.require(false, tag + " build: " + e.what());
      continue;
    }
    expect_site("vm", [&] { run_vm(prog, "main", c.args); });
  }
  return o;
}

// 8. Property suites.
Outcome properties() {
  Outcome o;
  auto report = [&](const std::string& name, const PropertyResult& r) {
    o.require(r.ok(), name + " (" + std::to_string(r.failures.size()) + " failures" +
                          (r.failures.empty() ? "" : ", first: " + r.failures[0]) + ")");
    return r.cases;
  };
  int64_t total = 0;
  total += report("symexpr", symexpr_properties(10000, 1));
  total += report("annotation", annotation_properties(3000, 2));
  total += report("round-trip", round_trip_properties(100, 3));
  total += report("classify", classify_golden());
  total += report("pipeline", pipeline_composition(4));
  o.detail = std::to_string(total) + " cases" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria = {
      {"match_cast deduction annotations", 1, unique_annotations},
      {"cross-function deduction", 1, call_site_deduction},
      {"fusion with compound shapes", 1, compound_fusion},
      {"memory planning", 1, chain_storages},
      {"interpreter vs vm differential suite", 60, differential},
      {"upper-bound allocation budget", 5, allocation_budget},
      {"runtime check sites", 1, adversarial},
      {"property suites", 60, properties},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) o.require(false, "took " + std::to_string(secs) + " s");
    failed += !o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << c.name << " (" << static_cast<int>(secs * 1000)
         << " ms)";
    if (!o.detail.empty()) line << ": " << o.detail;
    std::cout << line.str() << std::endl;
  }
  std::cout << (criteria.size() - static_cast<size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
