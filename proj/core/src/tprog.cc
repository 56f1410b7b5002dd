// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/tprog.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "symrelax/error.h"

namespace symrelax {

ScalarExpr scalar_const(double v) {
  auto n = std::make_shared<ScalarNode>();
  n->op = ScalarOp::kConst;
  n->value = v;
  return n;
}

ScalarExpr scalar_read(std::string buffer, std::vector<SymExpr> indices) {
  auto n = std::make_shared<ScalarNode>();
  n->op = ScalarOp::kRead;
  n->buffer = std::move(buffer);
  for (auto& i : indices) i = normalize(i);
  n->indices = std::move(indices);
  return n;
}

ScalarExpr scalar_binary(ScalarOp op, ScalarExpr a, ScalarExpr b) {
  auto n = std::make_shared<ScalarNode>();
  n->op = op;
  n->operands = {std::move(a), std::move(b)};
  return n;
}

ScalarExpr scalar_unary(ScalarOp op, ScalarExpr a) {
  auto n = std::make_shared<ScalarNode>();
  n->op = op;
  n->operands = {std::move(a)};
  return n;
}

ScalarExpr scalar_select(SymExpr lhs, SymExpr rhs, ScalarExpr if_less, ScalarExpr otherwise) {
  auto n = std::make_shared<ScalarNode>();
  n->op = ScalarOp::kSelect;
  n->cond_lhs = normalize(lhs);
  n->cond_rhs = normalize(rhs);
  n->operands = {std::move(if_less), std::move(otherwise)};
  return n;
}

const BufferDecl* PrimFunc::find_buffer(const std::string& buf) const {
  for (const auto& b : params) {
    if (b.name == buf) return &b;
  }
  for (const auto& b : temps) {
    if (b.name == buf) return &b;
  }
  return nullptr;
}

std::optional<SymVar> PrimFunc::find_sym(const std::string& sym) const {
  for (const auto& v : sym_vars) {
    if (v.name() == sym) return v;
  }
  return std::nullopt;
}

const char* pattern_kind_name(PatternKind kind) {
  switch (kind) {
    case PatternKind::kElementWise:
      return "ElementWise";
    case PatternKind::kBroadcast:
      return "Broadcast";
    case PatternKind::kInjective:
      return "Injective";
    case PatternKind::kReduction:
      return "Reduction";
    case PatternKind::kOpaque:
      return "Opaque";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// classify

namespace {

void collect_reads(const ScalarExpr& e, std::vector<const ScalarNode*>& out) {
  if (e->op == ScalarOp::kRead) out.push_back(e.get());
  for (const auto& o : e->operands) collect_reads(o, out);
}

bool is_loop_var(const SymVar& v, const std::vector<SymVar>& loop_vars) {
  return std::find(loop_vars.begin(), loop_vars.end(), v) != loop_vars.end();
}

bool mentions_loop_var(const SymExpr& e, const std::vector<SymVar>& loop_vars) {
  for (const auto& v : free_vars(e)) {
    if (is_loop_var(v, loop_vars)) return true;
  }
  return false;
}

// Polynomial degree in loop variables; -1 when a loop variable sits under a
// non-polynomial operator.
int loop_degree(const SymExpr& e, const std::vector<SymVar>& loop_vars) {
  switch (e.kind()) {
    case SymExpr::Kind::kVar:
      return is_loop_var(e.var(), loop_vars) ? 1 : 0;
    case SymExpr::Kind::kConst:
      return 0;
    case SymExpr::Kind::kAdd:
    case SymExpr::Kind::kSub: {
      int a = loop_degree(e.lhs(), loop_vars);
      int b = loop_degree(e.rhs(), loop_vars);
      if (a < 0 || b < 0) return -1;
      return std::max(a, b);
    }
    case SymExpr::Kind::kMul: {
      int a = loop_degree(e.lhs(), loop_vars);
      int b = loop_degree(e.rhs(), loop_vars);
      if (a < 0 || b < 0) return -1;
      return a + b;
    }
    default:
      return mentions_loop_var(e, loop_vars) ? -1 : 0;
  }
}

bool is_affine(const SymExpr& e, const std::vector<SymVar>& loop_vars) {
  int d = loop_degree(e, loop_vars);
  return d >= 0 && d <= 1;
}

bool is_injective_index(const SymExpr& e, const std::vector<SymVar>& loop_vars) {
  if (is_affine(e, loop_vars)) return true;
  if (e.kind() == SymExpr::Kind::kFloorDiv || e.kind() == SymExpr::Kind::kMod) {
    return is_affine(e.lhs(), loop_vars) && !mentions_loop_var(e.rhs(), loop_vars);
  }
  return false;
}

PatternKind classify_read(const ScalarNode& r, const std::vector<SymVar>& loop_vars) {
  const auto& idx = r.indices;
  bool identical = idx.size() == loop_vars.size();
  for (size_t i = 0; identical && i < idx.size(); ++i) {
    identical = idx[i].is_var() && idx[i].var() == loop_vars[i];
  }
  if (identical) return PatternKind::kElementWise;

  bool projection = true;
  size_t next = 0;
  for (const auto& e : idx) {
    if (e.as_const() == 0) continue;
    if (!e.is_var()) {
      projection = false;
      break;
    }
    auto it = std::find(loop_vars.begin() + static_cast<std::ptrdiff_t>(next), loop_vars.end(), e.var());
    if (it == loop_vars.end()) {
      projection = false;
      break;
    }
    next = static_cast<size_t>(it - loop_vars.begin()) + 1;
  }
  if (projection) return PatternKind::kBroadcast;

  for (const auto& e : idx) {
    if (!is_injective_index(e, loop_vars)) return PatternKind::kOpaque;
  }
  return PatternKind::kInjective;
}

}  // namespace

PatternKind classify(const PrimFunc& p) {
  if (p.stages.size() != 1) return PatternKind::kOpaque;
  const Stage& s = p.stages[0];
  if (!s.reduce.empty()) return PatternKind::kReduction;
  std::vector<const ScalarNode*> reads;
  collect_reads(s.body, reads);
  PatternKind out = PatternKind::kElementWise;
  for (const auto* r : reads) {
    PatternKind k = classify_read(*r, s.loop_vars);
    if (k == PatternKind::kOpaque) return k;
    out = std::max(out, k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// exec_prim

namespace {

// Index arithmetic compiled to a postfix program over integer slots.
class IndexProgram {
 public:
  IndexProgram() = default;
  IndexProgram(const SymExpr& e, const std::map<SymVar, int>& slots) {
    emit(e, slots);
    int depth = 0;
    for (const auto& in : code_) {
      depth += (in.op == Op::kConst || in.op == Op::kSlot) ? 1 : -1;
      max_depth_ = std::max(max_depth_, depth);
    }
    stack_.resize(static_cast<size_t>(max_depth_));
  }

  int64_t operator()(const int64_t* slots) const {
    int sp = 0;
    int64_t* st = stack_.data();
    for (const auto& in : code_) {
      switch (in.op) {
        case Op::kConst:
          st[sp++] = in.v;
          break;
        case Op::kSlot:
          st[sp++] = slots[in.v];
          break;
        case Op::kAdd:
          --sp;
          st[sp - 1] += st[sp];
          break;
        case Op::kSub:
          --sp;
          st[sp - 1] -= st[sp];
          break;
        case Op::kMul:
          --sp;
          st[sp - 1] *= st[sp];
          break;
        case Op::kFloorDiv:
          --sp;
          st[sp - 1] = floordiv_i64(st[sp - 1], st[sp]);
          break;
        case Op::kMod:
          --sp;
          st[sp - 1] = floormod_i64(st[sp - 1], st[sp]);
          break;
        case Op::kMax:
          --sp;
          st[sp - 1] = std::max(st[sp - 1], st[sp]);
          break;
        case Op::kMin:
          --sp;
          st[sp - 1] = std::min(st[sp - 1], st[sp]);
          break;
      }
    }
    return st[0];
  }

 private:
  enum class Op : uint8_t { kConst, kSlot, kAdd, kSub, kMul, kFloorDiv, kMod, kMax, kMin };
  struct Instr {
    Op op;
    int64_t v;
  };

  void emit(const SymExpr& e, const std::map<SymVar, int>& slots) {
    switch (e.kind()) {
      case SymExpr::Kind::kConst:
        code_.push_back({Op::kConst, e.value()});
        return;
      case SymExpr::Kind::kVar: {
        auto it = slots.find(e.var());
        if (it == slots.end()) {
          throw Error(ErrorKind::kUnboundSymbol, "unbound symbolic variable " + e.var().name());
        }
        code_.push_back({Op::kSlot, it->second});
        return;
      }
      default:
        break;
    }
    emit(e.lhs(), slots);
    emit(e.rhs(), slots);
    Op op = Op::kAdd;
    switch (e.kind()) {
      case SymExpr::Kind::kAdd: op = Op::kAdd; break;
      case SymExpr::Kind::kSub: op = Op::kSub; break;
      case SymExpr::Kind::kMul: op = Op::kMul; break;
      case SymExpr::Kind::kFloorDiv: op = Op::kFloorDiv; break;
      case SymExpr::Kind::kMod: op = Op::kMod; break;
      case SymExpr::Kind::kMax: op = Op::kMax; break;
      case SymExpr::Kind::kMin: op = Op::kMin; break;
      default: break;
    }
    code_.push_back({op, 0});
  }

  std::vector<Instr> code_;
  int max_depth_ = 0;
  mutable std::vector<int64_t> stack_;
};

struct CompiledScalar {
  ScalarOp op = ScalarOp::kConst;
  double value = 0.0;
  const NDArray* buf = nullptr;
  std::string buf_name;
  std::vector<IndexProgram> idx;
  std::vector<CompiledScalar> operands;
  IndexProgram lhs, rhs;
};

std::string index_list(const std::vector<int64_t>& v) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

double eval_scalar(const CompiledScalar& c, const int64_t* slots) {
  switch (c.op) {
    case ScalarOp::kConst:
      return c.value;
    case ScalarOp::kRead: {
      const auto& shape = c.buf->shape();
      int64_t flat = 0;
      for (size_t d = 0; d < c.idx.size(); ++d) {
        int64_t v = c.idx[d](slots);
        if (v < 0 || v >= shape[d]) {
          std::vector<int64_t> all;
          for (const auto& p : c.idx) all.push_back(p(slots));
          throw Error(ErrorKind::kOutOfBoundsRead,
                      "read " + c.buf_name + index_list(all) + " outside shape " + shape_to_string(shape));
        }
        flat = flat * shape[d] + v;
      }
      return c.buf->get(flat);
    }
    case ScalarOp::kAdd:
      return eval_scalar(c.operands[0], slots) + eval_scalar(c.operands[1], slots);
    case ScalarOp::kSub:
      return eval_scalar(c.operands[0], slots) - eval_scalar(c.operands[1], slots);
    case ScalarOp::kMul:
      return eval_scalar(c.operands[0], slots) * eval_scalar(c.operands[1], slots);
    case ScalarOp::kDiv:
      return eval_scalar(c.operands[0], slots) / eval_scalar(c.operands[1], slots);
    case ScalarOp::kMax:
      return std::max(eval_scalar(c.operands[0], slots), eval_scalar(c.operands[1], slots));
    case ScalarOp::kMin:
      return std::min(eval_scalar(c.operands[0], slots), eval_scalar(c.operands[1], slots));
    case ScalarOp::kNeg:
      return -eval_scalar(c.operands[0], slots);
    case ScalarOp::kExp:
      return std::exp(eval_scalar(c.operands[0], slots));
    case ScalarOp::kRelu:
      return std::max(eval_scalar(c.operands[0], slots), 0.0);
    case ScalarOp::kSelect:
      return c.lhs(slots) < c.rhs(slots) ? eval_scalar(c.operands[0], slots)
                                          : eval_scalar(c.operands[1], slots);
  }
  return 0.0;
}

struct ExecEnv {
  const PrimFunc* p;
  std::map<std::string, NDArray*> buffers;
  SymSubst consts;  // sym var -> constant value
};

CompiledScalar compile_scalar(const ScalarExpr& e, const ExecEnv& env, const std::map<SymVar, int>& slots) {
  CompiledScalar c;
  c.op = e->op;
  c.value = e->value;
  if (e->op == ScalarOp::kRead) {
    auto it = env.buffers.find(e->buffer);
    if (it == env.buffers.end()) {
      throw Error(ErrorKind::kShapeMismatch, "kernel " + env.p->name + " reads unknown buffer " + e->buffer);
    }
    c.buf = it->second;
    c.buf_name = e->buffer;
    if (static_cast<int64_t>(e->indices.size()) != c.buf->ndim()) {
      throw Error(ErrorKind::kShapeMismatch, "kernel " + env.p->name + " reads " + e->buffer + " with " +
                                                 std::to_string(e->indices.size()) + " indices, rank is " +
                                                 std::to_string(c.buf->ndim()));
    }
    for (const auto& i : e->indices) c.idx.emplace_back(substitute(i, env.consts), slots);
  }
  if (e->op == ScalarOp::kSelect) {
    c.lhs = IndexProgram(substitute(e->cond_lhs, env.consts), slots);
    c.rhs = IndexProgram(substitute(e->cond_rhs, env.consts), slots);
  }
  for (const auto& o : e->operands) c.operands.push_back(compile_scalar(o, env, slots));
  return c;
}

int64_t eval_dim(const SymExpr& d, const SymValues& values, const std::string& what) {
  try {
    return evaluate(d, values);
  } catch (const Error& err) {
    throw Error(err.kind(), what + ": " + err.detail());
  }
}

void run_stage(const Stage& s, const ExecEnv& env, const SymValues& values) {
  auto out_it = env.buffers.find(s.out);
  if (out_it == env.buffers.end()) {
    throw Error(ErrorKind::kShapeMismatch, "kernel " + env.p->name + " writes unknown buffer " + s.out);
  }
  bool writable = false;
  for (int i = env.p->num_inputs(); i < static_cast<int>(env.p->params.size()); ++i) {
    writable |= env.p->params[i].name == s.out;
  }
  for (const auto& t : env.p->temps) writable |= t.name == s.out;
  if (!writable) {
    throw Error(ErrorKind::kShapeMismatch, "kernel " + env.p->name + " writes input buffer " + s.out);
  }
  NDArray& out = *out_it->second;
  if (static_cast<int64_t>(s.loop_vars.size()) != out.ndim()) {
    throw Error(ErrorKind::kShapeMismatch, "stage writing " + s.out + " has wrong loop depth");
  }

  std::map<SymVar, int> slots;
  int nl = static_cast<int>(s.loop_vars.size());
  int nr = static_cast<int>(s.reduce.size());
  for (int i = 0; i < nl; ++i) slots[s.loop_vars[i]] = i;
  std::vector<int64_t> rext(nr);
  for (int i = 0; i < nr; ++i) {
    slots[s.reduce[i].var] = nl + i;
    rext[i] = eval_dim(s.reduce[i].extent, values, "reduction extent");
  }
  CompiledScalar body = compile_scalar(s.body, env, slots);

  std::vector<int64_t> st(static_cast<size_t>(nl + nr), 0);
  const auto& shape = out.shape();
  int64_t total = out.numel();
  bool reduce_empty = std::any_of(rext.begin(), rext.end(), [](int64_t e) { return e <= 0; });
  for (int64_t flat = 0; flat < total; ++flat) {
    double v;
    if (nr == 0) {
      v = eval_scalar(body, st.data());
    } else {
      v = *s.init;
      if (!reduce_empty) {
        std::fill(st.begin() + nl, st.end(), 0);
        while (true) {
          double x = eval_scalar(body, st.data());
          v = s.combiner == Combiner::kSum ? v + x : std::max(v, x);
          int d = nr - 1;
          while (d >= 0 && ++st[nl + d] == rext[d]) {
            st[nl + d] = 0;
            --d;
          }
          if (d < 0) break;
        }
      }
    }
    out.set(flat, v);
    for (int d = nl - 1; d >= 0; --d) {
      if (++st[d] < shape[d]) break;
      st[d] = 0;
    }
  }
}

void exec_with_values(const PrimFunc& p, std::span<NDArray> buffers, SymValues values) {
  if (buffers.size() != p.params.size()) {
    throw Error(ErrorKind::kShapeMismatch, "kernel " + p.name + " expects " + std::to_string(p.params.size()) +
                                               " buffers, got " + std::to_string(buffers.size()));
  }
  auto bind_bare = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const auto& decl = p.params[i];
      if (static_cast<int64_t>(decl.dims.size()) != buffers[i].ndim()) continue;
      for (size_t d = 0; d < decl.dims.size(); ++d) {
        if (!decl.dims[d].is_var()) continue;
        values.emplace(decl.dims[d].var(), buffers[i].shape()[d]);
      }
    }
  };
  bind_bare(0, p.num_inputs());
  bind_bare(p.num_inputs(), static_cast<int>(p.params.size()));

  ExecEnv env{&p, {}, {}};
  for (const auto& [v, x] : values) env.consts[v] = SymExpr(x);
  for (size_t i = 0; i < p.params.size(); ++i) {
    const auto& decl = p.params[i];
    const NDArray& a = buffers[i];
    std::vector<int64_t> want;
    for (const auto& d : decl.dims) want.push_back(eval_dim(d, values, "buffer " + decl.name));
    if (a.dtype() != decl.dtype || a.shape() != want) {
      throw Error(ErrorKind::kShapeMismatch, "kernel " + p.name + " buffer " + decl.name + " expects " +
                                                 dtype_name(decl.dtype) + shape_to_string(want) + ", got " +
                                                 dtype_name(a.dtype()) + shape_to_string(a.shape()));
    }
    env.buffers[decl.name] = &buffers[i];
  }
  std::vector<NDArray> temps;
  temps.reserve(p.temps.size());
  for (const auto& t : p.temps) {
    std::vector<int64_t> shape;
    for (const auto& d : t.dims) shape.push_back(eval_dim(d, values, "temp " + t.name));
    temps.push_back(NDArray::empty(t.dtype, shape));
    env.buffers[t.name] = &temps.back();
  }
  for (const auto& s : p.stages) run_stage(s, env, values);
}

}  // namespace

void exec_prim(const PrimFunc& p, std::span<NDArray> buffers, std::span<const int64_t> scalars) {
  if (scalars.size() != p.scalar_params.size()) {
    throw Error(ErrorKind::kShapeMismatch, "kernel " + p.name + " expects " +
                                               std::to_string(p.scalar_params.size()) + " scalar arguments, got " +
                                               std::to_string(scalars.size()));
  }
  SymValues values;
  for (size_t i = 0; i < scalars.size(); ++i) values[p.scalar_params[i]] = scalars[i];
  exec_with_values(p, buffers, std::move(values));
}

void exec_prim(const PrimFunc& p, std::span<NDArray> buffers, const SymValues& scalars) {
  exec_with_values(p, buffers, scalars);
}

// ---------------------------------------------------------------------------

std::vector<SymVar> infer_scalar_params(const PrimFunc& p) {
  std::vector<SymVar> out;
  for (const auto& v : p.sym_vars) {
    bool bare = false;
    for (int i = 0; i < p.num_inputs() && !bare; ++i) {
      for (const auto& d : p.params[i].dims) bare |= d.is_var() && d.var() == v;
    }
    if (!bare) out.push_back(v);
  }
  return out;
}

SymSubst bind_prim_vars(const PrimFunc& p, std::span<const std::vector<SymExpr>> buffer_dims,
                        std::span<const SymExpr> tir_vars) {
  SymSubst out;
  size_t n = std::min(buffer_dims.size(), p.params.size());
  for (size_t i = 0; i < n; ++i) {
    const auto& decl = p.params[i].dims;
    if (decl.size() != buffer_dims[i].size()) continue;
    for (size_t d = 0; d < decl.size(); ++d) {
      if (decl[d].is_var()) out.emplace(decl[d].var(), buffer_dims[i][d]);
    }
  }
  for (size_t k = 0; k < p.scalar_params.size() && k < tir_vars.size(); ++k) {
    out.emplace(p.scalar_params[k], tir_vars[k]);
  }
  // Linear dims such as 2*n recover n when everything else is known.
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t i = 0; i < n; ++i) {
      const auto& decl = p.params[i].dims;
      if (decl.size() != buffer_dims[i].size()) continue;
      for (size_t d = 0; d < decl.size(); ++d) {
        std::vector<SymVar> unbound;
        for (const auto& v : free_vars(decl[d])) {
          if (!out.count(v)) unbound.push_back(v);
        }
        if (unbound.size() != 1) continue;
        auto lf = linear_in(decl[d], unbound[0]);
        if (!lf || lf->coeff == 0) continue;
        auto q = exact_div(buffer_dims[i][d] - substitute(lf->rest, out), lf->coeff);
        if (!q) continue;
        out.emplace(unbound[0], *q);
        progress = true;
      }
    }
  }
  for (const auto& v : p.sym_vars) {
    if (!out.count(v)) {
      throw Error(ErrorKind::kUnboundSymbol, "cannot bind " + v.name() + " of kernel " + p.name);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool dims_equal(const std::vector<SymExpr>& a, const std::vector<SymExpr>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (to_string(a[i]) != to_string(b[i])) return false;
  }
  return true;
}

bool buffers_equal(const std::vector<BufferDecl>& a, const std::vector<BufferDecl>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].dtype != b[i].dtype || !dims_equal(a[i].dims, b[i].dims)) return false;
  }
  return true;
}

bool vars_equal(const std::vector<SymVar>& a, const std::vector<SymVar>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].name() != b[i].name()) return false;
  }
  return true;
}

bool scalar_equal(const ScalarExpr& a, const ScalarExpr& b) {
  if (a->op != b->op || a->operands.size() != b->operands.size()) return false;
  switch (a->op) {
    case ScalarOp::kConst:
      if (!(a->value == b->value || (std::isnan(a->value) && std::isnan(b->value)))) return false;
      break;
    case ScalarOp::kRead:
      if (a->buffer != b->buffer || !dims_equal(a->indices, b->indices)) return false;
      break;
    case ScalarOp::kSelect:
      if (to_string(a->cond_lhs) != to_string(b->cond_lhs) || to_string(a->cond_rhs) != to_string(b->cond_rhs)) {
        return false;
      }
      break;
    default:
      break;
  }
  for (size_t i = 0; i < a->operands.size(); ++i) {
    if (!scalar_equal(a->operands[i], b->operands[i])) return false;
  }
  return true;
}

}  // namespace

bool structurally_equal(const PrimFunc& a, const PrimFunc& b) {
  if (a.name != b.name || a.num_outputs != b.num_outputs || a.workspace != b.workspace || a.op != b.op) return false;
  if (!buffers_equal(a.params, b.params) || !buffers_equal(a.temps, b.temps)) return false;
  if (!vars_equal(a.sym_vars, b.sym_vars) || !vars_equal(a.scalar_params, b.scalar_params)) return false;
  if (a.stages.size() != b.stages.size()) return false;
  for (size_t i = 0; i < a.stages.size(); ++i) {
    const Stage& x = a.stages[i];
    const Stage& y = b.stages[i];
    if (x.out != y.out || x.init != y.init || x.combiner != y.combiner) return false;
    if (!vars_equal(x.loop_vars, y.loop_vars) || x.reduce.size() != y.reduce.size()) return false;
    for (size_t r = 0; r < x.reduce.size(); ++r) {
      if (x.reduce[r].var.name() != y.reduce[r].var.name() ||
          to_string(x.reduce[r].extent) != to_string(y.reduce[r].extent)) {
        return false;
      }
    }
    if (!scalar_equal(x.body, y.body)) return false;
  }
  return true;
}

}  // namespace symrelax
