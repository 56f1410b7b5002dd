// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/vm.h"

#include <gtest/gtest.h>

#include "symrelax/error.h"
#include "symrelax/inputs.h"
#include "symrelax/interpreter.h"
#include "symrelax/text.h"
#include "test_support.h"

namespace symrelax {
namespace {

int count_op(const VMFunction& f, Opcode op) {
  int n = 0;
  for (const auto& ins : f.code) n += ins.op == op;
  return n;
}

const VMFunction& entry(const VMProgram& p) { return p.functions.at(static_cast<size_t>(p.find_function("main"))); }

TEST(VmListing, RoundTripsForTheCorpus) {
  for (const auto& name : testing::corpus_names()) {
    for (const char* preset : {"default", "dispatch"}) {
      VMProgram p = lower_to_vm(testing::run_preset(testing::parse_corpus(name), preset));
      std::string text = print_vm(p);
      VMProgram back = parse_vm(text);
      EXPECT_EQ(print_vm(back), text) << name;
      ASSERT_EQ(back.functions.size(), p.functions.size()) << name;
      for (size_t i = 0; i < p.functions.size(); ++i) EXPECT_EQ(back.functions[i].code, p.functions[i].code) << name;
    }
  }
}

TEST(VmLower, UniqueProgramPrologue) {
  VMProgram p = testing::compile(testing::parse_corpus("unique_match_cast"));
  const VMFunction& f = entry(p);
  ASSERT_GE(f.code.size(), 3u);
  EXPECT_EQ(f.code[0].op, Opcode::kBindShape);
  EXPECT_EQ(f.code[1].op, Opcode::kCheckShape);
  EXPECT_EQ(f.code[1].site, "main/param/x");
  EXPECT_EQ(f.code[2].op, Opcode::kComputeShape);
  int match_cast_checks = 0;
  for (const auto& ins : f.code) match_cast_checks += ins.op == Opcode::kCheckShape && ins.site == "main/match_cast/lv4";
  EXPECT_EQ(match_cast_checks, 1);
  EXPECT_EQ(count_op(f, Opcode::kInvokeBuiltin), 1);
}

TEST(VmLower, StaticProgramComputesNoShapes) {
  Module m = parse_module(
      "fn main(x: Tensor((2, 4), f32)) { df { a = exp(x); b = relu(a); c = exp(b); } return c; }");
  VMProgram p = testing::compile(m);
  const VMFunction& f = entry(p);
  EXPECT_EQ(count_op(f, Opcode::kComputeShape), 0);
  EXPECT_EQ(count_op(f, Opcode::kBindShape), 0);
}

TEST(VmLower, RequiresPlannedModule) {
  Module legal = testing::run_preset(testing::parse_corpus("exp_relu_chain"), "default");
  try {
    lower_to_vm(deduce_module(testing::parse_corpus("exp_relu_chain")).module);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::kNotPlanned || e.kind() == ErrorKind::kNotLowered);
  }
  EXPECT_NO_THROW(lower_to_vm(legal));
}

TEST(VmRun, SquareParameterRejectsRectangle) {
  Module m = parse_module("fn main(x: Tensor((n, n), f32)) sym(n) { df { y = exp(x); } return y; }");
  VMProgram p = testing::compile(m);
  std::vector<Value> args = {NDArray::from_f32({2, 3}, {1, 2, 3, 4, 5, 6})};
  try {
    run_vm(p, "main", args);
    FAIL() << "expected ShapeCheckFailed";
  } catch (const ShapeCheckFailed& e) {
    EXPECT_EQ(e.site(), "main/param/x");
  }
  std::vector<Value> ok = {NDArray::from_f32({2, 2}, {0, 0, 0, 0})};
  Value v = run_vm(p, "main", ok);
  EXPECT_EQ(std::get<NDArray>(v).to_doubles(), (std::vector<double>{1, 1, 1, 1}));
}

TEST(VmRun, AgreesWithInterpreterOnUnique) {
  Module src = testing::parse_corpus("unique_match_cast");
  VMProgram p = testing::compile(src);
  for (int64_t n : {1, 2, 7}) {
    const Function& f = *src.find_function("main");
    auto bind = testing::bind_all(f, n);
    auto args = random_inputs(f, bind, 4);
    InterpretOptions io;
    io.bind = bind;
    Value want = interpret(src, "main", args, io);
    Value got = run_vm(p, "main", args);
    std::string why;
    EXPECT_TRUE(testing::same_value(want, got, 1e-5, &why)) << "n=" << n << ": " << why;
  }
}

TEST(VmRun, StatsCountAllocations) {
  VMProgram p = testing::compile(testing::parse_corpus("exp_relu_chain"));
  std::vector<Value> args = {NDArray::from_f32({3, 4}, std::vector<float>(12, 0.5f))};
  RunStats stats;
  run_vm(p, "main", args, &stats);
  EXPECT_GT(stats.allocs, 0);
  EXPECT_GT(stats.storage_allocs, 0);
  EXPECT_GE(stats.peak_bytes, 3 * 4 * 4);
  EXPECT_EQ(stats.late_storage_allocs, 0);
}

TEST(VmRun, UnknownEntry) {
  VMProgram p = testing::compile(testing::parse_corpus("exp_relu_chain"));
  EXPECT_THROW(run_vm(p, "nope", {}), Error);
}

TEST(VmParse, RejectsMalformedListings) {
  EXPECT_THROW(parse_vm("; symrelax vm listing\n.function main params=[x] regs=1 slots=0\n  0: Frobnicate\n.end\n"),
               Error);
  EXPECT_THROW(parse_vm(".function main params=[x] regs=1\n"), Error);
  std::string good = print_vm(testing::compile(testing::parse_corpus("exp_relu_chain")));
  EXPECT_THROW(parse_vm(good.substr(0, good.size() / 2)), Error);
}

}  // namespace
}  // namespace symrelax
