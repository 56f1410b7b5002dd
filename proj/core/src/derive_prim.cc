// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Legalization of graph operators into loop-level kernels.

#include <numeric>

#include "symrelax/error.h"
#include "symrelax/tprog.h"

namespace symrelax {

namespace {

class KernelBuilder {
 public:
  KernelBuilder(const std::string& name, const std::string& op) {
    p_.name = name;
    p_.op = op;
  }

  // Kernel-local copy of a caller dimension expression.
  SymExpr local(const SymExpr& e) {
    for (const auto& v : free_vars(e)) {
      if (!sub_.count(v)) {
        SymVar fresh = SymVar::fresh(v.name());
        sub_[v] = fresh;
        p_.sym_vars.push_back(fresh);
      }
    }
    return substitute(e, sub_);
  }

  std::vector<SymExpr> local_dims(const std::vector<SymExpr>& dims) {
    std::vector<SymExpr> out;
    for (const auto& d : dims) out.push_back(local(d));
    return out;
  }

  std::string add_buffer(const std::string& name, const Annotation& ann) {
    p_.params.push_back({name, local_dims(*ann.known_dims()), *ann.dtype()});
    return name;
  }

  const BufferDecl& buffer(size_t i) const { return p_.params[i]; }

  std::vector<SymVar> loop_vars(size_t rank) {
    std::vector<SymVar> out;
    for (size_t i = 0; i < rank; ++i) out.push_back(SymVar::fresh("ax" + std::to_string(i)));
    return out;
  }

  void add_stage(Stage s) { p_.stages.push_back(std::move(s)); }

  PrimFunc finish(int num_outputs) {
    p_.num_outputs = num_outputs;
    p_.scalar_params = infer_scalar_params(p_);
    return std::move(p_);
  }

 private:
  PrimFunc p_;
  SymSubst sub_;
};

void require_known(const Annotation& a, const std::string& op) {
  if (!a.is_tensor() || !a.shape_spec().is_known() || !a.dtype()) {
    throw Error(ErrorKind::kNeedsMatchCast,
                op + " needs fully known tensor shapes, got " + to_string(a) + "; add a match_cast");
  }
}

std::vector<SymExpr> vars_as_exprs(const std::vector<SymVar>& vs) {
  return {vs.begin(), vs.end()};
}

// Row-major decomposition of a linear offset over `dims`.
std::vector<SymExpr> delinearize(const SymExpr& linear, const std::vector<SymExpr>& dims) {
  std::vector<SymExpr> out(dims.size());
  if (dims.empty()) return out;
  SymExpr stride = 1;
  for (size_t k = dims.size(); k-- > 0;) {
    SymExpr q = k + 1 == dims.size() ? linear : floordiv(linear, stride);
    out[k] = k == 0 ? q : mod(q, dims[k]);
    stride = stride * dims[k];
  }
  return out;
}

SymExpr linearize(const std::vector<SymExpr>& idx, const std::vector<SymExpr>& dims) {
  SymExpr out = 0;
  for (size_t k = 0; k < idx.size(); ++k) out = out * dims[k] + idx[k];
  return out;
}

PrimFunc derive_broadcast(KernelBuilder& b, const std::string& op, std::span<const Annotation> args,
                          const Annotation& out) {
  if (args.size() != 2) throw Error(ErrorKind::kArityMismatch, op + " takes 2 arguments");
  b.add_buffer("A", args[0]);
  b.add_buffer("B", args[1]);
  b.add_buffer("C", out);
  const auto& od = b.buffer(2).dims;
  auto lv = b.loop_vars(od.size());
  auto read = [&](size_t which) {
    const auto& d = b.buffer(which).dims;
    if (d.size() > od.size()) throw Error(ErrorKind::kUnsupportedOp, op + " input rank exceeds output rank");
    size_t shift = od.size() - d.size();
    std::vector<SymExpr> idx;
    for (size_t k = 0; k < d.size(); ++k) {
      if (prove_equal(d[k], od[shift + k]) == Provability::kProvablyEqual) {
        idx.emplace_back(lv[shift + k]);
      } else if (d[k].as_const() == 1) {
        idx.emplace_back(0);
      } else {
        throw Error(ErrorKind::kNeedsMatchCast, op + ": cannot prove dimension " + to_string(d[k]) +
                                                    " broadcasts to " + to_string(od[shift + k]));
      }
    }
    return scalar_read(b.buffer(which).name, idx);
  };
  ScalarOp sop = op == "add" ? ScalarOp::kAdd : op == "sub" ? ScalarOp::kSub : op == "mul" ? ScalarOp::kMul
                                                                                          : ScalarOp::kDiv;
  b.add_stage({"C", lv, {}, std::nullopt, Combiner::kSum, scalar_binary(sop, read(0), read(1))});
  return b.finish(1);
}

PrimFunc derive_unary(KernelBuilder& b, const std::string& op, std::span<const Annotation> args,
                      const Annotation& out) {
  if (args.size() != 1) throw Error(ErrorKind::kArityMismatch, op + " takes 1 argument");
  b.add_buffer("A", args[0]);
  b.add_buffer("B", out);
  auto lv = b.loop_vars(b.buffer(1).dims.size());
  ScalarOp sop = op == "exp" ? ScalarOp::kExp : ScalarOp::kRelu;
  b.add_stage({"B", lv, {}, std::nullopt, Combiner::kSum, scalar_unary(sop, scalar_read("A", vars_as_exprs(lv)))});
  return b.finish(1);
}

PrimFunc derive_matmul(KernelBuilder& b, std::span<const Annotation> args, const Annotation& out) {
  if (args.size() != 2) throw Error(ErrorKind::kArityMismatch, "matmul takes 2 arguments");
  b.add_buffer("A", args[0]);
  b.add_buffer("B", args[1]);
  b.add_buffer("C", out);
  if (b.buffer(0).dims.size() != 2 || b.buffer(1).dims.size() != 2) {
    throw Error(ErrorKind::kUnsupportedOp, "matmul kernels take rank-2 operands");
  }
  auto lv = b.loop_vars(2);
  SymVar r = SymVar::fresh("rk");
  auto body = scalar_binary(ScalarOp::kMul, scalar_read("A", {lv[0], r}), scalar_read("B", {r, lv[1]}));
  b.add_stage({"C", lv, {{r, b.buffer(0).dims[1]}}, 0.0, Combiner::kSum, body});
  return b.finish(1);
}

PrimFunc derive_flatten_reshape(KernelBuilder& b, const std::string& op, std::span<const Annotation> args,
                                const Annotation& out) {
  b.add_buffer("A", args[0]);
  b.add_buffer("B", out);
  const auto& in = b.buffer(0).dims;
  const auto& od = b.buffer(1).dims;
  auto lv = b.loop_vars(od.size());
  SymExpr linear = linearize(vars_as_exprs(lv), od);
  b.add_stage({"B", lv, {}, std::nullopt, Combiner::kSum, scalar_read("A", delinearize(linear, in))});
  (void)op;
  return b.finish(1);
}

PrimFunc derive_permute(KernelBuilder& b, const OpAttrs& attrs, std::span<const Annotation> args,
                        const Annotation& out) {
  b.add_buffer("A", args[0]);
  b.add_buffer("B", out);
  size_t rank = b.buffer(0).dims.size();
  std::vector<int64_t> axes = attr_ints(attrs, "axes");
  if (axes.empty()) {
    for (size_t k = rank; k-- > 0;) axes.push_back(static_cast<int64_t>(k));
  }
  if (axes.size() != rank) throw Error(ErrorKind::kUnsupportedOp, "permute_dims axes do not match rank");
  auto lv = b.loop_vars(rank);
  std::vector<SymExpr> idx(rank);
  for (size_t d = 0; d < rank; ++d) idx[normalize_axis(axes[d], static_cast<int64_t>(rank))] = lv[d];
  b.add_stage({"B", lv, {}, std::nullopt, Combiner::kSum, scalar_read("A", idx)});
  return b.finish(1);
}

PrimFunc derive_concat(KernelBuilder& b, const OpAttrs& attrs, std::span<const Annotation> args,
                       const Annotation& out) {
  if (args.empty()) throw Error(ErrorKind::kArityMismatch, "concat needs at least one argument");
  for (size_t i = 0; i < args.size(); ++i) b.add_buffer("A" + std::to_string(i), args[i]);
  b.add_buffer("B", out);
  size_t rank = b.buffer(args.size()).dims.size();
  auto axis = static_cast<size_t>(normalize_axis(attr_int(attrs, "axis").value_or(0), static_cast<int64_t>(rank)));
  auto lv = b.loop_vars(rank);
  std::vector<SymExpr> offsets;
  SymExpr off = 0;
  for (size_t i = 0; i < args.size(); ++i) {
    offsets.push_back(off);
    off = off + b.buffer(i).dims[axis];
  }
  auto read = [&](size_t i) {
    std::vector<SymExpr> idx = vars_as_exprs(lv);
    idx[axis] = idx[axis] - offsets[i];
    return scalar_read(b.buffer(i).name, idx);
  };
  ScalarExpr body = read(args.size() - 1);
  for (size_t i = args.size() - 1; i-- > 0;) {
    body = scalar_select(lv[axis], offsets[i + 1], read(i), body);
  }
  b.add_stage({"B", lv, {}, std::nullopt, Combiner::kSum, body});
  return b.finish(1);
}

PrimFunc derive_split(KernelBuilder& b, const OpAttrs& attrs, std::span<const Annotation> args,
                      const Annotation& out) {
  if (!out.is_tuple()) throw Error(ErrorKind::kUnsupportedOp, "split produces a tuple");
  b.add_buffer("A", args[0]);
  for (size_t i = 0; i < out.fields().size(); ++i) {
    require_known(out.fields()[i], "split");
    b.add_buffer("B" + std::to_string(i), out.fields()[i]);
  }
  size_t rank = b.buffer(0).dims.size();
  auto axis = static_cast<size_t>(normalize_axis(attr_int(attrs, "axis").value_or(0), static_cast<int64_t>(rank)));
  SymExpr off = 0;
  for (size_t i = 0; i < out.fields().size(); ++i) {
    auto lv = b.loop_vars(rank);
    std::vector<SymExpr> idx = vars_as_exprs(lv);
    idx[axis] = idx[axis] + off;
    b.add_stage({"B" + std::to_string(i), lv, {}, std::nullopt, Combiner::kSum, scalar_read("A", idx)});
    off = off + b.buffer(i + 1).dims[axis];
  }
  return b.finish(static_cast<int>(out.fields().size()));
}

PrimFunc derive_sum(KernelBuilder& b, const OpAttrs& attrs, std::span<const Annotation> args,
                    const Annotation& out) {
  b.add_buffer("A", args[0]);
  b.add_buffer("B", out);
  const auto rank = static_cast<int64_t>(b.buffer(0).dims.size());
  std::vector<bool> reduced(static_cast<size_t>(rank), false);
  auto axes = attr_ints(attrs, "axis");
  if (axes.empty()) {
    reduced.assign(static_cast<size_t>(rank), true);
  } else {
    for (auto a : axes) reduced[static_cast<size_t>(normalize_axis(a, rank))] = true;
  }
  bool keepdims = attr_int(attrs, "keepdims").value_or(0) != 0;
  auto lv = b.loop_vars(b.buffer(1).dims.size());
  std::vector<SymExpr> idx;
  std::vector<ReduceAxis> red;
  size_t next = 0;
  for (int64_t k = 0; k < rank; ++k) {
    if (reduced[static_cast<size_t>(k)]) {
      SymVar r = SymVar::fresh("rk" + std::to_string(red.size()));
      red.push_back({r, b.buffer(0).dims[static_cast<size_t>(k)]});
      idx.emplace_back(r);
      if (keepdims) ++next;
    } else {
      idx.emplace_back(lv.at(next++));
    }
  }
  b.add_stage({"B", lv, red, 0.0, Combiner::kSum, scalar_read("A", idx)});
  return b.finish(1);
}

}  // namespace

PrimFunc derive_prim(const std::string& op, const OpAttrs& attrs, std::span<const Annotation> arg_anns,
                     const Annotation& out_ann, const std::string& name) {
  if (!is_known_op(op)) throw Error(ErrorKind::kUnknownOperator, "unknown operator " + op);
  if (op == "unique") throw Error(ErrorKind::kUnsupportedOp, "unique has a data-dependent shape; use the builtin");
  if (arg_anns.empty()) throw Error(ErrorKind::kArityMismatch, op + " needs arguments");
  size_t tensor_args = op == "reshape" ? 1 : arg_anns.size();
  for (size_t i = 0; i < tensor_args; ++i) require_known(arg_anns[i], op);
  if (op != "split") require_known(out_ann, op);

  KernelBuilder b(name, op);
  if (is_binary_broadcast_op(op)) return derive_broadcast(b, op, arg_anns, out_ann);
  if (is_unary_elementwise_op(op)) return derive_unary(b, op, arg_anns, out_ann);
  if (op == "matmul") return derive_matmul(b, arg_anns, out_ann);
  if (op == "flatten" || op == "reshape") return derive_flatten_reshape(b, op, arg_anns, out_ann);
  if (op == "permute_dims") return derive_permute(b, attrs, arg_anns, out_ann);
  if (op == "concat") return derive_concat(b, attrs, arg_anns, out_ann);
  if (op == "split") return derive_split(b, attrs, arg_anns, out_ann);
  if (op == "sum") return derive_sum(b, attrs, arg_anns, out_ann);
  throw Error(ErrorKind::kUnsupportedOp, "no kernel for " + op);
}

}  // namespace symrelax
