// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loop-level tensor programs in destination-passing style.
//
// A PrimFunc receives its input buffers followed by pre-allocated output
// buffers and returns nothing. Its body is a list of stages; each stage
// fills one buffer over its full iteration domain, optionally reducing over
// extra loop variables.

#ifndef SYMRELAX_TPROG_H_
#define SYMRELAX_TPROG_H_

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symrelax/annotation.h"
#include "symrelax/ndarray.h"
#include "symrelax/ops.h"
#include "symrelax/symexpr.h"

namespace symrelax {

struct BufferDecl {
  std::string name;
  std::vector<SymExpr> dims;
  DType dtype = DType::kF32;
};

enum class ScalarOp { kConst, kRead, kAdd, kSub, kMul, kDiv, kMax, kMin, kNeg, kExp, kRelu, kSelect };

struct ScalarNode;
using ScalarExpr = std::shared_ptr<const ScalarNode>;

struct ScalarNode {
  ScalarOp op = ScalarOp::kConst;
  double value = 0.0;               // kConst
  std::string buffer;               // kRead
  std::vector<SymExpr> indices;     // kRead
  std::vector<ScalarExpr> operands;
  SymExpr cond_lhs;                 // kSelect: picks operands[0] if lhs < rhs
  SymExpr cond_rhs;
};

ScalarExpr scalar_const(double v);
ScalarExpr scalar_read(std::string buffer, std::vector<SymExpr> indices);
ScalarExpr scalar_binary(ScalarOp op, ScalarExpr a, ScalarExpr b);
ScalarExpr scalar_unary(ScalarOp op, ScalarExpr a);
ScalarExpr scalar_select(SymExpr lhs, SymExpr rhs, ScalarExpr if_less, ScalarExpr otherwise);

enum class Combiner { kSum, kMax };

struct ReduceAxis {
  SymVar var;
  SymExpr extent;
};

struct Stage {
  std::string out;               // written at [loop_vars...] over the buffer's dims
  std::vector<SymVar> loop_vars;
  std::vector<ReduceAxis> reduce;
  std::optional<double> init;    // required when reduce is nonempty
  Combiner combiner = Combiner::kSum;
  ScalarExpr body;
};

struct PrimFunc {
  std::string name;
  std::vector<BufferDecl> params;  // inputs, then the last num_outputs are outputs
  int num_outputs = 1;
  std::vector<BufferDecl> temps;
  std::optional<std::string> workspace;  // a temp that may be lifted out
  std::vector<SymVar> sym_vars;
  std::vector<SymVar> scalar_params;      // passed explicitly at call time
  std::vector<Stage> stages;
  std::string op;  // originating graph op, empty when hand-written

  int num_inputs() const { return static_cast<int>(params.size()) - num_outputs; }
  const BufferDecl* find_buffer(const std::string& name) const;
  std::optional<SymVar> find_sym(const std::string& name) const;
};

enum class PatternKind { kElementWise, kBroadcast, kInjective, kReduction, kOpaque };

const char* pattern_kind_name(PatternKind kind);

PatternKind classify(const PrimFunc& p);

// Runs `p` on `buffers` (inputs then outputs). Symbolic variables are bound
// from bare input dims and from `scalars` (in scalar_params order); every
// buffer's declared dims must then match the concrete shapes.
// Throws ShapeMismatch or OutOfBoundsRead.
void exec_prim(const PrimFunc& p, std::span<NDArray> buffers, std::span<const int64_t> scalars);
void exec_prim(const PrimFunc& p, std::span<NDArray> buffers, const SymValues& scalars);

// Builds a kernel computing `op` for the given (Known-shaped) argument
// annotations. Buffer dims use fresh variables named after the caller's;
// scalar_params lists the variables not recoverable from a bare input dim.
// Throws UnsupportedOp or NeedsMatchCast.
PrimFunc derive_prim(const std::string& op, const OpAttrs& attrs, std::span<const Annotation> arg_anns,
                     const Annotation& out_ann, const std::string& name);

// Maps each of p's variables to an expression in the caller's scope by
// matching bare-variable dims of `buffer_dims` (aligned with p.params) and
// positional `tir_vars` against scalar_params. Throws UnboundSymbol if some
// variable stays unbound.
SymSubst bind_prim_vars(const PrimFunc& p, std::span<const std::vector<SymExpr>> buffer_dims,
                        std::span<const SymExpr> tir_vars);

// Computes scalar_params as the sym_vars not appearing as a bare dim of any
// input buffer, in sym_vars order.
std::vector<SymVar> infer_scalar_params(const PrimFunc& p);

bool structurally_equal(const PrimFunc& a, const PrimFunc& b);

}  // namespace symrelax

#endif  // SYMRELAX_TPROG_H_
