// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Module-to-module transformations: legalization, fusion, kernel merging,
// library dispatch, and memory planning. Every pass expects an annotated
// module (see deduce_module) and keeps annotations up to date.

#ifndef SYMRELAX_PASSES_H_
#define SYMRELAX_PASSES_H_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symrelax/ir.h"

namespace symrelax {

// Rewrites graph operator calls with known shapes into call_tir of derived
// kernels; unique becomes a builtin call. Throws NeedsMatchCast.
Module legalize(const Module& m);

// A user-chosen fusion group: bindings of one function, by variable name.
struct FusionGroup {
  std::string function;
  std::vector<std::string> vars;
};

// Groups call_tir bindings into primitive sub-functions called through
// call sites. Custom groups are formed first. Throws InvalidCustomGroup.
Module fuse_ops(const Module& m, const std::vector<FusionGroup>& custom_groups = {});

// Merges each primitive sub-function into one kernel and calls it directly.
// Throws NonStraightLineGroup.
Module fuse_tensor_ir(const Module& m);

// A chain of operators, each consuming the previous result, dispatched to one
// library routine.
struct LibraryPattern {
  std::string name;
  std::vector<std::string> ops;
  std::string extern_name;
};

// linear_bias (matmul then add of a bias row), matmul.
std::vector<LibraryPattern> reference_library_patterns();

Module lower_to_library(const Module& m, const std::vector<LibraryPattern>& registry);

struct PlannedStorage {
  std::string function;
  std::string id;
  SymExpr size;  // bytes
  std::optional<int64_t> upper_bound;
  DType dtype = DType::kF32;
};

struct PlannedTensor {
  std::string function;
  std::string tensor;
  std::string storage;  // empty when allocated individually at run time
  int def = 0;          // binding index within its block
  int last_use = 0;
  SymExpr size;
};

struct StoragePlan {
  std::vector<PlannedStorage> storages;
  std::vector<PlannedTensor> tensors;

  // `storage <id> size=<expr> ub=<int|none>` lines, tensor lines, `storages=<n>`.
  std::string report() const;
};

// Assigns storages to intermediate tensors of dataflow blocks and makes the
// allocations explicit.
std::pair<Module, StoragePlan> plan_memory(const Module& m);

struct PipelineOptions {
  std::vector<LibraryPattern> libraries = reference_library_patterns();
  std::vector<FusionGroup> custom_groups;
};

// legalize, fuse, fuse-tir, lower-libs, plan-memory.
const std::vector<std::string>& pass_names();
// Runs deduction, then the pass. Throws Usage for an unknown pass name.
Module run_pass(const std::string& name, const Module& m, const PipelineOptions& opts = {});
// Presets: "default" and "dispatch" (libraries before fusion). Both end with
// plan-memory; lowering to the VM is separate.
std::vector<std::string> preset_passes(const std::string& preset);

}  // namespace symrelax

#endif  // SYMRELAX_PASSES_H_
