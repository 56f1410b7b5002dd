// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "symrelax/deduce.h"
#include "symrelax/inputs.h"
#include "symrelax/interpreter.h"
#include "symrelax/passes.h"
#include "symrelax/text.h"
#include "symrelax/vm.h"

namespace symrelax {
namespace {

constexpr const char* kMlp = R"(fn main(x: Tensor((n, 16), f32), w: Tensor((16, 16), f32)) sym(n) bound(n <= 64) {
  df {
    lv0 = matmul(x, w);
    lv1 = relu(lv0);
    lv2 = matmul(lv1, w);
    lv3 = exp(lv2);
    lv4 = sum(lv3, axis=[1], keepdims=1);
    lv5 = divide(lv3, lv4);
  }
  return lv5;
}
)";

Module compile_preset(const Module& src, const std::string& preset) {
  Module m = src;
  for (const auto& p : preset_passes(preset)) m = run_pass(p, m);
  return m;
}

void BM_Normalize(benchmark::State& state) {
  SymExpr n{SymVar::fresh("n")};
  SymExpr m{SymVar::fresh("m")};
  SymExpr e = n;
  for (int64_t i = 0; i < state.range(0); ++i) e = (e + m) * (n - 1) + floordiv(e, 4) - 2 * m;
  for (auto _ : state) benchmark::DoNotOptimize(normalize(e));
}
BENCHMARK(BM_Normalize)->Arg(1)->Arg(2)->Arg(3);

void BM_ProveEqual(benchmark::State& state) {
  SymExpr n{SymVar::fresh("n")};
  SymExpr m{SymVar::fresh("m")};
  SymExpr a = (n + m) * (n + m);
  SymExpr b = n * n + 2 * n * m + m * m;
  for (auto _ : state) benchmark::DoNotOptimize(prove_equal(a, b));
}
BENCHMARK(BM_ProveEqual);

void BM_ExecMatmul(benchmark::State& state) {
  const int64_t rows = state.range(0);
  SymExpr n{SymVar::fresh("n")};
  std::vector<Annotation> args = {Annotation::tensor({n, 64}, DType::kF32), Annotation::tensor({64, 64}, DType::kF32)};
  Annotation out = deduce_op("matmul", args, {}).ann;
  PrimFunc p = derive_prim("matmul", {}, args, out, "matmul");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> a(static_cast<size_t>(rows * 64));
  std::vector<float> b(64 * 64);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);
  std::vector<NDArray> bufs = {NDArray::from_f32({rows, 64}, a), NDArray::from_f32({64, 64}, b),
                               NDArray::empty(DType::kF32, {rows, 64})};
  for (auto _ : state) exec_prim(p, bufs, std::span<const int64_t>{});
  state.SetItemsProcessed(state.iterations() * rows * 64 * 64);
}
BENCHMARK(BM_ExecMatmul)->Arg(1)->Arg(16)->Arg(64);

void BM_Pipeline(benchmark::State& state) {
  Module src = parse_module(kMlp);
  for (auto _ : state) benchmark::DoNotOptimize(lower_to_vm(compile_preset(src, "default")));
}
BENCHMARK(BM_Pipeline);

void BM_Interpret(benchmark::State& state) {
  Module src = parse_module(kMlp);
  const Function& f = *src.find_function("main");
  InterpretOptions io;
  io.bind = {{"n", state.range(0)}};
  auto args = random_inputs(f, io.bind, 3);
  for (auto _ : state) benchmark::DoNotOptimize(interpret(src, "main", args, io));
}
BENCHMARK(BM_Interpret)->Arg(1)->Arg(64);

void BM_VmRun(benchmark::State& state) {
  Module src = parse_module(kMlp);
  VMProgram p = lower_to_vm(compile_preset(src, "default"));
  const Function& f = *src.find_function("main");
  auto args = random_inputs(f, {{"n", state.range(0)}}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(run_vm(p, "main", args));
}
BENCHMARK(BM_VmRun)->Arg(1)->Arg(64);

}  // namespace
}  // namespace symrelax

BENCHMARK_MAIN();
