// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Graph-level IR: expressions, bindings, dataflow blocks, functions, and
// modules. All nodes are immutable once built; passes construct new ones.

#ifndef SYMRELAX_IR_H_
#define SYMRELAX_IR_H_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symrelax/annotation.h"
#include "symrelax/error.h"
#include "symrelax/ndarray.h"
#include "symrelax/ops.h"
#include "symrelax/symexpr.h"
#include "symrelax/tprog.h"

namespace symrelax {

enum class ExprKind {
  kVarRef,
  kConstTensor,
  kShapeLiteral,
  kTupleMake,
  kTupleGet,
  kCallOp,
  kCallFunc,
  kCallTir,
  kCallDpsLibrary,
  kCallBuiltin,  // unique, alloc_storage, alloc_tensor
  kIf,
};

struct Body;
struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  ExprKind kind = ExprKind::kVarRef;
  // Variable, op, callee, prim, extern, or builtin name depending on kind.
  std::string name;
  std::vector<Expr> args;
  // ShapeLiteral dims; alloc_storage size (one entry); alloc_tensor shape.
  std::vector<SymExpr> dims;
  int64_t index = 0;              // TupleGet
  NDArray data;                   // ConstTensor
  std::optional<DType> dtype;     // alloc builtins
  std::optional<Annotation> out_ann;  // CallTir, CallDpsLibrary, CallBuiltin
  std::optional<std::vector<SymExpr>> tir_vars;  // CallTir extra symbolic args
  std::vector<std::string> dests;     // DPS destinations once memory is planned
  OpAttrs attrs;                      // CallOp
  std::shared_ptr<const Body> then_body;
  std::shared_ptr<const Body> else_body;
  SourceSpan span;
};

Expr make_var(std::string name, SourceSpan span = {});
Expr make_const(NDArray data);
Expr make_shape(std::vector<SymExpr> dims);
Expr make_tuple(std::vector<Expr> fields);
Expr make_tuple_get(Expr tuple, int64_t index);
Expr make_call_op(std::string op, std::vector<Expr> args, OpAttrs attrs = {});
Expr make_call_func(std::string callee, std::vector<Expr> args);
Expr make_call_tir(std::string prim, std::vector<Expr> args, Annotation out_ann,
                   std::optional<std::vector<SymExpr>> tir_vars = std::nullopt,
                   std::vector<std::string> dests = {});
Expr make_call_library(std::string extern_name, std::vector<Expr> args, Annotation out_ann,
                       std::vector<std::string> dests = {});
Expr make_call_builtin(std::string builtin, std::vector<Expr> args, Annotation out_ann);
Expr make_alloc_storage(SymExpr size_bytes, DType dtype);
Expr make_alloc_tensor(std::string storage, std::vector<SymExpr> shape, DType dtype);
Expr make_if(Expr cond, Body then_body, Body else_body);

// Copy of `e` with a new field value.
Expr with_dests(const Expr& e, std::vector<std::string> dests);

struct Binding {
  enum class Kind { kBind, kMatchCast };

  Kind kind = Kind::kBind;
  std::string var;
  std::optional<Annotation> ann;  // always present for MatchCast
  Expr value;
  SourceSpan span;

  bool is_match_cast() const { return kind == Kind::kMatchCast; }
};

struct Block {
  bool dataflow = false;
  std::vector<Binding> bindings;
};

struct Body {
  std::vector<Block> blocks;
  Expr result;
};

struct Param {
  std::string name;
  Annotation ann;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  std::optional<Annotation> ret_ann;
  std::vector<SymVar> sym_vars;
  std::map<SymVar, int64_t> upper_bounds;
  std::vector<std::string> attrs;  // e.g. "primitive"
  Body body;
  SourceSpan span;

  std::optional<SymVar> find_sym(const std::string& name) const;
  bool has_attr(const std::string& attr) const;
  Annotation signature() const;  // Callable(params, ret)
};

struct ExternDecl {
  std::string name;
};

struct Module {
  std::vector<Function> functions;
  std::vector<PrimFunc> prim_funcs;
  std::vector<ExternDecl> externs;

  const Function* find_function(const std::string& name) const;
  Function* find_function(const std::string& name);
  const PrimFunc* find_prim(const std::string& name) const;
  bool has_extern(const std::string& name) const;

  // Picks `base`, `base_1`, ... not used by any function or prim_func.
  std::string unique_global_name(const std::string& base) const;
};

struct Diagnostic {
  std::string message;
  SourceSpan span;
};

std::vector<Diagnostic> well_formed(const Module& m);

// Removes unused bindings from dataflow blocks; plain blocks are kept.
Function dataflow_dce(const Function& f);

// Replaces every annotation with Object. Throws NotLowered if a CallOp remains.
Module erase_annotations(const Module& m);

bool structurally_equal(const Module& a, const Module& b);

// Helpers shared by passes.

// Names referenced by an expression (VarRef operands, DPS dests, nested
// If bodies' free uses).
void collect_uses(const Expr& e, std::vector<std::string>& out);

// Unique local name not present in `taken`; `taken` is updated.
std::string fresh_local_name(const std::string& base, std::vector<std::string>& taken);
std::vector<std::string> local_names(const Function& f);

// Function variables introduced for symbolic dims not yet used.
std::string fresh_sym_name(const Function& f, const std::string& base);

}  // namespace symrelax

#endif  // SYMRELAX_IR_H_
