// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "symrelax/deduce.h"
#include "symrelax/error.h"
#include "symrelax/passes.h"

namespace symrelax {

const std::vector<std::string>& pass_names() {
  static const std::vector<std::string> names = {"legalize", "fuse", "fuse-tir", "lower-libs", "plan-memory"};
  return names;
}

Module run_pass(const std::string& name, const Module& input, const PipelineOptions& opts) {
  if (std::find(pass_names().begin(), pass_names().end(), name) == pass_names().end()) {
    throw Error(ErrorKind::kUsage, "unknown pass " + name);
  }
  Module m = deduce_module(input).module;
  if (name == "legalize") return legalize(m);
  if (name == "fuse") return fuse_ops(m, opts.custom_groups);
  if (name == "fuse-tir") return fuse_tensor_ir(m);
  if (name == "lower-libs") return lower_to_library(m, opts.libraries);
  if (name == "plan-memory") return plan_memory(m).first;
  throw Error(ErrorKind::kUsage, "unknown pass " + name);
}

std::vector<std::string> preset_passes(const std::string& preset) {
  if (preset == "default") return {"legalize", "fuse", "fuse-tir", "lower-libs", "plan-memory"};
  if (preset == "dispatch") return {"legalize", "lower-libs", "fuse", "fuse-tir", "plan-memory"};
  throw Error(ErrorKind::kUsage, "unknown preset " + preset + " (expected default or dispatch)");
}

}  // namespace symrelax
