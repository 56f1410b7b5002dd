// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <cmath>
#include <sstream>

#include "symrelax/text.h"

namespace symrelax {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

namespace {

std::string join_dims(const std::vector<SymExpr>& dims) {
  std::string out;
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) out += ", ";
    out += to_string(dims[i]);
  }
  return out;
}

std::string tuple_dims(const std::vector<SymExpr>& dims) {
  return "(" + join_dims(dims) + (dims.size() == 1 ? ",)" : ")");
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  return out;
}

std::string format_element(const NDArray& a, int64_t i) {
  switch (a.dtype()) {
    case DType::kF32: {
      auto f = static_cast<float>(a.get(i));
      if (std::isinf(f)) return f > 0 ? "inf" : "-inf";
      char buf[32];
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), f);
      (void)ec;
      return std::string(buf, p);
    }
    case DType::kI64:
      return std::to_string(a.get_i64(i));
    case DType::kBool:
      return a.get(i) != 0 ? "true" : "false";
  }
  return "0";
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::ostringstream os;
  auto args = [&](const std::vector<Expr>& xs) {
    for (size_t i = 0; i < xs.size(); ++i) {
      if (i) os << ", ";
      os << print_expr(xs[i]);
    }
  };
  switch (e->kind) {
    case ExprKind::kVarRef:
      os << e->name;
      break;
    case ExprKind::kConstTensor: {
      const NDArray& a = e->data;
      os << "const(" << dtype_name(a.dtype()) << ", (";
      for (size_t i = 0; i < a.shape().size(); ++i) os << (i ? ", " : "") << a.shape()[i];
      os << (a.shape().size() == 1 ? ",), [" : "), [");
      for (int64_t i = 0; i < a.numel(); ++i) os << (i ? ", " : "") << format_element(a, i);
      os << "])";
      break;
    }
    case ExprKind::kShapeLiteral:
      os << "shape(" << join_dims(e->dims) << ")";
      break;
    case ExprKind::kTupleMake:
      os << '(';
      args(e->args);
      if (e->args.size() == 1) os << ',';
      os << ')';
      break;
    case ExprKind::kTupleGet:
      os << print_expr(e->args[0]) << '[' << e->index << ']';
      break;
    case ExprKind::kCallOp: {
      os << e->name << '(';
      args(e->args);
      bool first = e->args.empty();
      for (const auto& [k, v] : e->attrs) {
        os << (first ? "" : ", ") << k << '=';
        first = false;
        if (v.size() == 1) {
          os << v[0];
        } else {
          os << '[';
          for (size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
          os << ']';
        }
      }
      os << ')';
      break;
    }
    case ExprKind::kCallFunc:
      os << '@' << e->name << '(';
      args(e->args);
      os << ')';
      break;
    case ExprKind::kCallTir:
      os << "call_tir(@" << e->name << ", (";
      args(e->args);
      os << "), " << to_string(*e->out_ann);
      if (e->tir_vars) os << ", shape(" << join_dims(*e->tir_vars) << ")";
      if (!e->dests.empty()) os << ", out=(" << join_names(e->dests) << ")";
      os << ')';
      break;
    case ExprKind::kCallDpsLibrary:
      os << "call_dps_library(\"" << e->name << "\", (";
      args(e->args);
      os << "), " << to_string(*e->out_ann);
      if (!e->dests.empty()) os << ", out=(" << join_names(e->dests) << ")";
      os << ')';
      break;
    case ExprKind::kCallBuiltin:
      if (e->name == "alloc_storage") {
        os << "alloc_storage(" << to_string(e->dims[0]) << ", " << dtype_name(*e->dtype) << ")";
      } else if (e->name == "alloc_tensor") {
        os << "alloc_tensor(" << e->args[0]->name << ", " << tuple_dims(e->dims) << ", " << dtype_name(*e->dtype)
           << ")";
      } else {
        os << "call_builtin(\"" << e->name << "\", (";
        args(e->args);
        os << "), " << to_string(e->out_ann.value_or(Annotation::object())) << ")";
      }
      break;
    case ExprKind::kIf:
      // Printed by the enclosing body printer; this form is for diagnostics.
      os << "if (" << print_expr(e->args[0]) << ") { ... } else { ... }";
      break;
  }
  return os.str();
}

namespace {

int scalar_prec(const ScalarExpr& e) {
  switch (e->op) {
    case ScalarOp::kAdd:
    case ScalarOp::kSub:
      return 1;
    case ScalarOp::kMul:
    case ScalarOp::kDiv:
      return 2;
    default:
      return 3;
  }
}

void print_scalar_to(std::ostream& os, const ScalarExpr& e) {
  auto sub = [&](const ScalarExpr& x, bool paren) {
    if (paren) os << '(';
    print_scalar_to(os, x);
    if (paren) os << ')';
  };
  switch (e->op) {
    case ScalarOp::kConst:
      os << format_number(e->value);
      return;
    case ScalarOp::kRead:
      os << e->buffer << '[' << join_dims(e->indices) << ']';
      return;
    case ScalarOp::kAdd:
    case ScalarOp::kSub:
    case ScalarOp::kMul:
    case ScalarOp::kDiv: {
      int p = scalar_prec(e);
      const char* op = e->op == ScalarOp::kAdd   ? " + "
                       : e->op == ScalarOp::kSub ? " - "
                       : e->op == ScalarOp::kMul ? " * "
                                                 : " / ";
      sub(e->operands[0], scalar_prec(e->operands[0]) < p);
      os << op;
      sub(e->operands[1], scalar_prec(e->operands[1]) <= p);
      return;
    }
    case ScalarOp::kNeg:
      os << "-(";
      print_scalar_to(os, e->operands[0]);
      os << ')';
      return;
    case ScalarOp::kExp:
    case ScalarOp::kRelu:
      os << (e->op == ScalarOp::kExp ? "exp(" : "relu(");
      print_scalar_to(os, e->operands[0]);
      os << ')';
      return;
    case ScalarOp::kMax:
    case ScalarOp::kMin:
      os << (e->op == ScalarOp::kMax ? "max(" : "min(");
      print_scalar_to(os, e->operands[0]);
      os << ", ";
      print_scalar_to(os, e->operands[1]);
      os << ')';
      return;
    case ScalarOp::kSelect:
      os << "select(" << to_string(e->cond_lhs) << " < " << to_string(e->cond_rhs) << ", ";
      print_scalar_to(os, e->operands[0]);
      os << ", ";
      print_scalar_to(os, e->operands[1]);
      os << ')';
      return;
  }
}

std::string buffer_text(const BufferDecl& b) {
  return b.name + ": Buffer(" + tuple_dims(b.dims) + ", " + dtype_name(b.dtype) + ")";
}

std::string var_names(const std::vector<SymVar>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ", ";
    out += vs[i].name();
  }
  return out;
}

class BodyPrinter {
 public:
  BodyPrinter(std::ostream& os, const Function& f, const PrintOptions& opts) : os_(os), f_(f), opts_(opts) {}

  void body(const Body& b, int indent) {
    for (const auto& blk : b.blocks) {
      int inner = indent;
      if (blk.dataflow) {
        pad(indent);
        os_ << "df {\n";
        inner = indent + 2;
      }
      for (const auto& bind : blk.bindings) binding(bind, inner);
      if (blk.dataflow) {
        pad(indent);
        os_ << "}\n";
      }
    }
    if (indent == 2) notes(f_.name + "/return", indent);
    pad(indent);
    os_ << "return " << print_expr(b.result) << ";\n";
  }

 private:
  void pad(int n) { os_ << std::string(static_cast<size_t>(n), ' '); }

  void notes(const std::string& key, int indent) {
    auto [lo, hi] = opts_.notes.equal_range(key);
    for (auto it = lo; it != hi; ++it) {
      pad(indent);
      os_ << "/* " << it->second << " */\n";
    }
  }

  void binding(const Binding& b, int indent) {
    notes(f_.name + "/" + b.var, indent);
    pad(indent);
    os_ << b.var;
    if (b.is_match_cast()) {
      os_ << " = match_cast(" << print_expr(b.value) << ", " << to_string(*b.ann) << ");\n";
      return;
    }
    if (b.ann) os_ << ": " << to_string(*b.ann);
    os_ << " = ";
    if (b.value->kind == ExprKind::kIf) {
      os_ << "if (" << print_expr(b.value->args[0]) << ") {\n";
      body(*b.value->then_body, indent + 2);
      pad(indent);
      os_ << "} else {\n";
      body(*b.value->else_body, indent + 2);
      pad(indent);
      os_ << "};\n";
      return;
    }
    os_ << print_expr(b.value) << ";\n";
  }

  std::ostream& os_;
  const Function& f_;
  const PrintOptions& opts_;
};

}  // namespace

std::string print_scalar(const ScalarExpr& e) {
  std::ostringstream os;
  print_scalar_to(os, e);
  return os.str();
}

std::string print_prim_func(const PrimFunc& p) {
  std::ostringstream os;
  os << "prim_fn " << p.name << "(";
  for (int i = 0; i < p.num_inputs(); ++i) os << (i ? ", " : "") << buffer_text(p.params[i]);
  os << ") -> (";
  for (size_t i = static_cast<size_t>(p.num_inputs()); i < p.params.size(); ++i) {
    os << (i > static_cast<size_t>(p.num_inputs()) ? ", " : "") << buffer_text(p.params[i]);
  }
  os << ")";
  if (!p.sym_vars.empty()) os << " sym(" << var_names(p.sym_vars) << ")";
  if (!p.scalar_params.empty()) os << " scalars(" << var_names(p.scalar_params) << ")";
  if (!p.op.empty()) os << " op(" << p.op << ")";
  os << " {\n";
  for (const auto& t : p.temps) {
    os << "  " << (p.workspace == t.name ? "workspace " : "temp ") << buffer_text(t) << ";\n";
  }
  for (const auto& s : p.stages) {
    os << "  " << s.out << '[' << var_names(s.loop_vars) << "] = ";
    if (!s.reduce.empty()) {
      os << "reduce " << (s.combiner == Combiner::kSum ? "sum" : "max") << " [";
      for (size_t i = 0; i < s.reduce.size(); ++i) {
        os << (i ? ", " : "") << s.reduce[i].var.name() << " < " << to_string(s.reduce[i].extent);
      }
      os << "] init " << format_number(s.init.value_or(0.0)) << " { " << print_scalar(s.body) << " }";
    } else {
      os << print_scalar(s.body);
    }
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

std::string print_function(const Function& f, const PrintOptions& opts) {
  std::ostringstream os;
  auto [lo, hi] = opts.notes.equal_range(f.name);
  for (auto it = lo; it != hi; ++it) os << "/* " << it->second << " */\n";
  os << "fn " << f.name << "(";
  for (size_t i = 0; i < f.params.size(); ++i) {
    os << (i ? ", " : "") << f.params[i].name << ": " << to_string(f.params[i].ann);
  }
  os << ")";
  if (f.ret_ann) os << " -> " << to_string(*f.ret_ann);
  if (!f.sym_vars.empty()) os << " sym(" << var_names(f.sym_vars) << ")";
  if (!f.upper_bounds.empty()) {
    os << " bound(";
    bool first = true;
    for (const auto& v : f.sym_vars) {
      auto it = f.upper_bounds.find(v);
      if (it == f.upper_bounds.end()) continue;
      os << (first ? "" : ", ") << v.name() << " <= " << it->second;
      first = false;
    }
    os << ")";
  }
  if (!f.attrs.empty()) os << " attrs(" << join_names(f.attrs) << ")";
  os << " {\n";
  BodyPrinter(os, f, opts).body(f.body, 2);
  os << "}\n";
  return os.str();
}

std::string print_module(const Module& m, const PrintOptions& opts) {
  std::ostringstream os;
  bool first = true;
  auto sep = [&] {
    if (!first) os << '\n';
    first = false;
  };
  for (const auto& e : m.externs) {
    if (first) first = false;
    os << "extern \"" << e.name << "\";\n";
  }
  for (const auto& p : m.prim_funcs) {
    sep();
    os << print_prim_func(p);
  }
  for (const auto& f : m.functions) {
    sep();
    os << print_function(f, opts);
  }
  return os.str();
}

}  // namespace symrelax
