// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "symrelax/text.h"
#include "test_support.h"

namespace symrelax {
namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult cli(const std::string& args) {
  std::string cmd = std::string(SYMRELAX_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  CliResult r;
  if (!pipe) return r;
  std::array<char, 4096> buf;
  size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string corpus(const std::string& name) { return testing::corpus_dir() + "/" + name + ".srx"; }

std::string temp_file(const std::string& name, const std::string& contents) {
  auto path = (std::filesystem::temp_directory_path() / ("symrelax_cli_" + name)).string();
  std::ofstream(path) << contents;
  return path;
}

std::string last_line(const std::string& s) {
  std::string t = s;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  auto pos = t.rfind('\n');
  return pos == std::string::npos ? t : t.substr(pos + 1);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli("check " + corpus("unique_match_cast")).code, 0);
  EXPECT_EQ(cli("check " + temp_file("bad.srx", "fn f(x: Tensor((n,) {\n")).code, 1);
  EXPECT_EQ(cli("check /nonexistent/file.srx").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cli, ShapeCheckFailureIsADiagnostic) {
  std::string src = temp_file("square.srx", "fn main(x: Tensor((n, n), f32)) sym(n) { df { y = exp(x); } return y; }\n");
  EXPECT_EQ(cli("run " + src + " --input 'x=[[1, 2, 3], [4, 5, 6]]'").code, 1);
  EXPECT_EQ(cli("run " + src + " --input 'x=[[1, 2], [3, 4]]'").code, 0);
}

TEST(Cli, InferPrintsDeducedAnnotations) {
  CliResult r = cli("infer " + corpus("unique_match_cast"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("lv0: Tensor((4*n,), f32) = flatten(x);"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("[main/match_cast/lv4]"), std::string::npos) << r.out;
  EXPECT_NO_THROW(parse_module(r.out));
}

TEST(Cli, PlanMemoryReport) {
  std::string legal = temp_file("chain_legal.srx", cli("legalize " + corpus("exp_relu_chain")).out);
  CliResult r = cli("plan-memory --report " + legal);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(last_line(r.out), "storages=2");
}

TEST(Cli, RunTraceAlloc) {
  CliResult r = cli("run " + corpus("exp_relu_chain") + " --bind n=2 --seed 1 --trace-alloc");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(last_line(r.out).rfind("allocs=", 0), 0u) << r.out;
  EXPECT_NE(last_line(r.out).find("peak_bytes="), std::string::npos);
}

TEST(Cli, OutputsAreDeterministic) {
  for (const char* cmd : {"pipeline", "infer", "fuse"}) {
    std::string a = cli(std::string(cmd) + " " + corpus("compound_add_relu")).out;
    EXPECT_FALSE(a.empty()) << cmd;
    EXPECT_EQ(cli(std::string(cmd) + " " + corpus("compound_add_relu")).out, a) << cmd;
  }
  std::string r1 = cli("run " + corpus("softmax_rows") + " --bind n=3 --seed 7").out;
  EXPECT_EQ(cli("run " + corpus("softmax_rows") + " --bind n=3 --seed 7").out, r1);
}

TEST(Cli, PipelineEqualsManualComposition) {
  std::string file = corpus("linear_bias");
  for (const char* pass : {"legalize", "fuse", "fuse-tir", "lower-libs", "plan-memory"}) {
    file = temp_file(std::string("step_") + pass + ".srx", cli(std::string(pass) + " " + file).out);
  }
  CliResult manual = cli("build " + file);
  CliResult pipeline = cli("pipeline " + corpus("linear_bias"));
  ASSERT_EQ(pipeline.code, 0);
  EXPECT_EQ(manual.out, pipeline.out);
}

TEST(Cli, ListingRunMatchesInterpreter) {
  std::string listing = temp_file("chain.vm", cli("pipeline " + corpus("exp_relu_chain")).out);
  std::string input = "--input 'x=[[1, -2, 0.5, 0]]'";
  CliResult vm = cli("run " + listing + " " + input);
  CliResult interp = cli("run " + corpus("exp_relu_chain") + " " + input);
  ASSERT_EQ(vm.code, 0);
  EXPECT_EQ(vm.out, interp.out);
}

}  // namespace
}  // namespace symrelax
