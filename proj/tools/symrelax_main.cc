// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// symrelax: command-line driver over the parser, deduction, passes and VM.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "symrelax/deduce.h"
#include "symrelax/error.h"
#include "symrelax/inputs.h"
#include "symrelax/interpreter.h"
#include "symrelax/passes.h"
#include "symrelax/text.h"
#include "symrelax/vm.h"

namespace {

using namespace symrelax;

constexpr int kDiagnostics = 1;
constexpr int kUsageError = 2;
constexpr const char* kListingHeader = "; symrelax vm listing";

struct Options {
  std::string file;
  std::string entry = "main";
  std::vector<std::string> inputs;
  std::vector<std::string> binds;
  std::vector<std::string> libs;
  std::string preset = "default";
  std::string output;
  bool report = false;
  bool trace_alloc = false;
  uint64_t seed = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kUsage, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Module load(const Options& o) {
  Module m = parse_module(read_file(o.file), o.file);
  auto diags = well_formed(m);
  if (!diags.empty()) {
    std::string msg;
    for (const auto& d : diags) msg += (msg.empty() ? "" : "\n") + d.span.to_string() + ": " + d.message;
    throw Error(ErrorKind::kSyntax, msg);
  }
  deduce_module(m);
  return m;
}

PipelineOptions pipeline_options(const Options& o) {
  PipelineOptions opts;
  if (o.libs.empty()) return opts;
  opts.libraries.clear();
  for (const auto& name : o.libs) {
    if (name == "none") continue;
    bool found = false;
    for (const auto& p : reference_library_patterns()) {
      if (p.name == name) {
        opts.libraries.push_back(p);
        found = true;
      }
    }
    if (!found) throw Error(ErrorKind::kUsage, "unknown library pattern " + name);
  }
  return opts;
}

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::kUsage, "expected name=value, got " + s);
  return {s.substr(0, eq), s.substr(eq + 1)};
}

std::map<std::string, int64_t> parse_binds(const Options& o) {
  std::map<std::string, int64_t> out;
  for (const auto& b : o.binds) {
    auto [name, value] = split_assignment(b);
    try {
      size_t used = 0;
      out[name] = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kUsage, "--bind " + b + ": not an integer");
    }
  }
  return out;
}

int cmd_check(const Options& o) {
  Module m = load(o);
  auto sites = deduce_module(m).sites;
  std::cout << "ok: " << m.functions.size() << " functions, " << sites.size() << " runtime checks\n";
  return 0;
}

int cmd_infer(const Options& o) {
  auto dm = deduce_module(load(o));
  PrintOptions po;
  po.notes = site_notes(dm.sites);
  std::cout << print_module(dm.module, po);
  return 0;
}

int cmd_pass(const std::string& pass, const Options& o) {
  Module m = load(o);
  if (pass == "plan-memory" && o.report) {
    std::cout << plan_memory(m).second.report();
    return 0;
  }
  std::cout << print_module(run_pass(pass, m, pipeline_options(o)));
  return 0;
}

int cmd_build(const Options& o) {
  std::cout << print_vm(lower_to_vm(load(o)));
  return 0;
}

int cmd_pipeline(const Options& o) {
  Module m = load(o);
  PipelineOptions opts = pipeline_options(o);
  for (const auto& p : preset_passes(o.preset)) {
    m = parse_module(print_module(run_pass(p, m, opts)), o.file);
  }
  std::cout << print_vm(lower_to_vm(m));
  return 0;
}

Value read_input(const std::string& spec) {
  if (!spec.empty() && spec[0] == '@') return read_tensor_file(spec.substr(1));
  return parse_tensor_json(spec);
}

std::vector<Value> gather_inputs(const Options& o, const std::vector<std::string>& params,
                                 const std::function<std::vector<Value>()>& generate) {
  std::map<std::string, Value> given;
  for (const auto& in : o.inputs) {
    auto [name, spec] = split_assignment(in);
    if (std::find(params.begin(), params.end(), name) == params.end()) {
      throw Error(ErrorKind::kUsage, "@" + o.entry + " has no parameter " + name);
    }
    given[name] = read_input(spec);
  }
  std::vector<Value> args;
  std::vector<Value> generated;
  for (size_t i = 0; i < params.size(); ++i) {
    auto it = given.find(params[i]);
    if (it != given.end()) {
      args.push_back(it->second);
      continue;
    }
    if (generated.empty()) generated = generate();
    args.push_back(generated[i]);
  }
  return args;
}

void emit_result(const Options& o, const Value& v, int64_t allocs, int64_t peak) {
  if (!o.output.empty()) {
    const auto* t = std::get_if<NDArray>(&v);
    if (!t) throw Error(ErrorKind::kUsage, "--output needs a tensor result, got " + describe(v));
    write_tensor_file(o.output, *t);
  } else {
    std::cout << value_to_json(v) << "\n";
  }
  if (o.trace_alloc) std::cout << "allocs=" << allocs << " peak_bytes=" << peak << "\n";
}

int cmd_run(const Options& o) {
  std::string text = read_file(o.file);
  auto bind = parse_binds(o);
  if (text.rfind(kListingHeader, 0) == 0) {
    VMProgram p = parse_vm(text);
    int idx = p.find_function(o.entry);
    if (idx < 0) throw Error(ErrorKind::kUsage, "no function named @" + o.entry);
    const auto& params = p.functions[static_cast<size_t>(idx)].params;
    auto args = gather_inputs(o, params, [&]() -> std::vector<Value> {
      throw Error(ErrorKind::kUsage, "listing runs need every input (--input name=...)");
    });
    RunStats stats;
    Value v = run_vm(p, o.entry, args, &stats);
    emit_result(o, v, stats.allocs, stats.peak_bytes);
    return 0;
  }
  Module m = parse_module(text, o.file);
  deduce_module(m);
  const Function* f = m.find_function(o.entry);
  if (!f) throw Error(ErrorKind::kUsage, "no function named @" + o.entry);
  std::vector<std::string> params;
  for (const auto& p : f->params) params.push_back(p.name);
  auto args = gather_inputs(o, params, [&] { return random_inputs(*f, bind, o.seed); });
  InterpretOptions io;
  io.bind = bind;
  io.stats = std::make_shared<AllocStats>();
  Value v = interpret(m, o.entry, args, io);
  emit_result(o, v, io.stats->allocs, io.stats->peak_bytes);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symrelax: compiler and virtual machine for dynamically shaped tensor programs"};
  app.require_subcommand(1);
  Options o;
  std::string chosen;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("file", o.file, "input module (.srx) or listing")->required();
    sub->callback([&chosen, name] { chosen = name; });
    return sub;
  };
  add("check", "parse, validate and deduce annotations");
  add("infer", "print the module with deduced annotations and runtime checks");
  for (const char* pass : {"legalize", "fuse", "fuse-tir", "lower-libs"}) {
    add(pass, std::string("run the ") + pass + " pass")->add_option("--lib", o.libs, "library pattern (or none)");
  }
  add("plan-memory", "plan storages")->add_flag("--report", o.report, "print the storage plan");
  add("build", "lower a planned module to a VM listing");
  CLI::App* pipeline = add("pipeline", "run a pass preset and build");
  pipeline->add_option("--preset", o.preset, "default or dispatch");
  pipeline->add_option("--lib", o.libs, "library pattern (or none)");
  CLI::App* run = add("run", "interpret a module or execute a VM listing");
  run->add_option("--entry", o.entry, "entry function");
  run->add_option("--input", o.inputs, "name=@file.rten or name=<json>");
  run->add_option("--bind", o.binds, "name=int for symbolic variables");
  run->add_flag("--trace-alloc", o.trace_alloc, "print allocation counters");
  run->add_option("--output", o.output, "write the result tensor here");
  run->add_option("--seed", o.seed, "seed for generated inputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (chosen == "check") return cmd_check(o);
    if (chosen == "infer") return cmd_infer(o);
    if (chosen == "build") return cmd_build(o);
    if (chosen == "pipeline") return cmd_pipeline(o);
    if (chosen == "run") return cmd_run(o);
    return cmd_pass(chosen, o);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.kind() == ErrorKind::kUsage ? kUsageError : kDiagnostics;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiagnostics;
  }
}
