// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Big-step reference interpreter over the graph IR at any lowering stage.

#ifndef SYMRELAX_INTERPRETER_H_
#define SYMRELAX_INTERPRETER_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "symrelax/annotation.h"
#include "symrelax/ir.h"
#include "symrelax/library.h"
#include "symrelax/ndarray.h"

namespace symrelax {

// Binds the variables of `ann` missing from `env` from the runtime value
// (bare dims first, then dims linear in one unbound variable) and checks every
// remaining constraint. Throws ShapeCheckFailed tagged with `site`.
void match_value(const Annotation& ann, const Value& v, SymValues& env, const std::string& site);

struct InterpretOptions {
  // Values for the entry function's symbolic variables, by name.
  std::map<std::string, int64_t> bind;
  const LibraryRegistry* libs = nullptr;  // reference registry when null
  std::shared_ptr<AllocStats> stats;
};

// Runs `entry`. Performs the same parameter checks (site "fn/param/x") and
// deduction check sites as the VM.
Value interpret(const Module& m, const std::string& entry, const std::vector<Value>& args,
                const InterpretOptions& opts = {});

}  // namespace symrelax

#endif  // SYMRELAX_INTERPRETER_H_
