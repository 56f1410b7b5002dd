// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Register virtual machine: lowering from planned modules, a textual listing
// format, and the interpreter loop. Symbolic values live in a per-activation
// integer heap ("slots").

#ifndef SYMRELAX_VM_H_
#define SYMRELAX_VM_H_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "symrelax/ir.h"
#include "symrelax/library.h"
#include "symrelax/ndarray.h"
#include "symrelax/tprog.h"

namespace symrelax {

// An integer operand: a heap slot or an immediate.
struct SlotRef {
  bool is_const = false;
  int64_t value = 0;  // slot index or immediate

  static SlotRef slot(int64_t i) { return {false, i}; }
  static SlotRef imm(int64_t v) { return {true, v}; }
  friend bool operator==(const SlotRef&, const SlotRef&) = default;
};

enum class ShapeOpKind { kAdd, kSub, kMul, kFloorDiv, kMod, kMax, kMin };

struct ShapeOp {
  int dst = 0;
  ShapeOpKind kind = ShapeOpKind::kAdd;
  SlotRef a;
  SlotRef b;
  friend bool operator==(const ShapeOp&, const ShapeOp&) = default;
};

// Expected structure of a runtime value.
struct ShapePattern {
  enum class Kind { kAny, kTensor, kShape, kTuple };
  Kind kind = Kind::kAny;
  std::optional<DType> dtype;  // kTensor
  int rank = -1;               // -1: unconstrained
  std::vector<SlotRef> dims;   // empty unless every dim is known
  std::vector<ShapePattern> fields;
  friend bool operator==(const ShapePattern&, const ShapePattern&) = default;
};

enum class Opcode {
  kBindShape,      // slots[0] <- dim `index` of regs[0] (through `path`); checks when `expect` is set
  kComputeShape,   // runs `program`
  kCheckShape,     // regs[0] must match `pattern`; fails with `site`
  kAllocStorage,   // dst <- storage of slots[0] bytes
  kAllocTensor,    // dst <- view of storage regs[0] with shape `slots`
  kInvokeKernel,   // kernel `index` on regs (inputs then outputs), scalars `slots`
  kInvokeLibrary,  // library routine `index` on regs
  kInvokeBuiltin,  // dst <- builtin `index`(regs)
  kMakeShape,      // dst <- shape tuple of `slots`
  kMakeTuple,      // dst <- tuple of regs
  kGetTuple,       // dst <- regs[0][index]
  kLoadConst,      // dst <- constant `index`
  kCallFn,         // dst <- function `index`(regs)
  kCondBranch,     // if regs[0] is false jump to `index`
  kJump,           // jump to `index`
  kMove,           // dst <- regs[0]
  kRet,            // return regs[0]
};

const char* opcode_name(Opcode op);

struct Instruction {
  Opcode op = Opcode::kRet;
  int dst = -1;
  std::vector<int> regs;
  int64_t index = 0;
  std::vector<int> path;
  std::vector<SlotRef> slots;
  std::optional<SlotRef> expect;
  std::vector<ShapeOp> program;
  ShapePattern pattern;
  std::optional<DType> dtype;
  std::string site;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct VMFunction {
  std::string name;
  std::vector<std::string> params;
  int num_regs = 0;
  int num_slots = 0;
  std::vector<Instruction> code;
};

struct VMProgram {
  std::vector<VMFunction> functions;
  std::vector<PrimFunc> kernels;
  std::vector<std::string> libraries;
  std::vector<std::string> builtins;
  std::vector<NDArray> constants;

  int find_function(const std::string& name) const;
};

// Lowers a planned module. Every deduction check site becomes exactly one
// CheckShape. Throws NotPlanned, NotLowered, UnresolvedExtern.
VMProgram lower_to_vm(const Module& m, const LibraryRegistry& libs = LibraryRegistry::reference());

// Deterministic listing, one instruction per line; parse_vm reads it back.
std::string print_vm(const VMProgram& p);
VMProgram parse_vm(std::string_view text);

struct RunStats {
  int64_t allocs = 0;       // storages and tensors created while running
  int64_t peak_bytes = 0;
  int64_t storage_allocs = 0;       // AllocStorage executions
  int64_t late_storage_allocs = 0;  // AllocStorage executed after a kernel in the same frame
};

Value run_vm(const VMProgram& p, const std::string& entry, const std::vector<Value>& args, RunStats* stats = nullptr,
             const LibraryRegistry& libs = LibraryRegistry::reference());

}  // namespace symrelax

#endif  // SYMRELAX_VM_H_
