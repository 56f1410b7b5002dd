// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by unit tests, property tests and the acceptance binary.

#ifndef SYMRELAX_TESTS_TEST_SUPPORT_H_
#define SYMRELAX_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "symrelax/deduce.h"
#include "symrelax/ir.h"
#include "symrelax/ndarray.h"
#include "symrelax/passes.h"
#include "symrelax/text.h"
#include "symrelax/vm.h"

namespace symrelax::testing {

inline std::string corpus_dir() { return SYMRELAX_CORPUS_DIR; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Sorted corpus file stems.
inline std::vector<std::string> corpus_names() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(corpus_dir())) {
    if (e.path().extension() == ".srx") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline Module parse_corpus(const std::string& name) {
  std::string path = corpus_dir() + "/" + name + ".srx";
  return parse_module(read_text(path), path);
}

inline Module deduced(const Module& m) { return deduce_module(m).module; }

// Runs the passes of `preset` with a text round-trip between each, as the
// command-line driver does.
inline Module run_preset(const Module& m, const std::string& preset, const PipelineOptions& opts = {}) {
  Module cur = m;
  for (const auto& p : preset_passes(preset)) cur = parse_module(print_module(run_pass(p, cur, opts)));
  return cur;
}

inline VMProgram compile(const Module& m, const std::string& preset = "default") {
  return parse_vm(print_vm(lower_to_vm(run_preset(m, preset))));
}

// Every symbolic variable of `f`'s parameters bound to `n`.
inline std::map<std::string, int64_t> bind_all(const Function& f, int64_t n) {
  std::map<std::string, int64_t> out;
  for (const auto& p : f.params) {
    for (const auto& v : free_vars(p.ann)) out[v.name()] = n;
  }
  return out;
}

// Independent comparator: same structure, f32 within `rtol` relative
// (absolute near zero), integers and bools exact. NaN equals NaN.
inline bool same_value(const Value& a, const Value& b, double rtol, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (a.index() != b.index()) return fail("different kinds: " + describe(a) + " vs " + describe(b));
  if (const auto* ta = std::get_if<NDArray>(&a)) {
    const auto& tb = std::get<NDArray>(b);
    if (ta->dtype() != tb.dtype() || ta->shape() != tb.shape()) {
      return fail("tensor mismatch: " + describe(a) + " vs " + describe(b));
    }
    for (int64_t i = 0; i < ta->numel(); ++i) {
      if (ta->dtype() == DType::kI64) {
        if (ta->get_i64(i) != tb.get_i64(i)) return fail("element " + std::to_string(i) + " differs");
        continue;
      }
      double x = ta->get(i);
      double y = tb.get(i);
      if (std::isnan(x) && std::isnan(y)) continue;
      bool ok = ta->dtype() == DType::kF32 ? std::fabs(x - y) <= rtol * std::max({1.0, std::fabs(x), std::fabs(y)})
                                           : x == y;
      if (!ok) {
        std::ostringstream msg;
        msg << "element " << i << ": " << x << " vs " << y;
        return fail(msg.str());
      }
    }
    return true;
  }
  if (const auto* sa = std::get_if<ShapeTuple>(&a)) {
    if (*sa != std::get<ShapeTuple>(b)) return fail("shape values differ");
    return true;
  }
  if (const auto* ua = std::get_if<std::shared_ptr<TupleValue>>(&a)) {
    const auto& ub = std::get<std::shared_ptr<TupleValue>>(b);
    if ((*ua)->fields.size() != ub->fields.size()) return fail("tuple arity differs");
    for (size_t i = 0; i < ub->fields.size(); ++i) {
      if (!same_value((*ua)->fields[i], ub->fields[i], rtol, why)) return false;
    }
    return true;
  }
  return true;
}

}  // namespace symrelax::testing

#endif  // SYMRELAX_TESTS_TEST_SUPPORT_H_
