// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "symrelax/deduce.h"
#include "symrelax/error.h"
#include "symrelax/vm.h"

namespace symrelax {

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::kBindShape: return "BindShape";
    case Opcode::kComputeShape: return "ComputeShape";
    case Opcode::kCheckShape: return "CheckShape";
    case Opcode::kAllocStorage: return "AllocStorage";
    case Opcode::kAllocTensor: return "AllocTensor";
    case Opcode::kInvokeKernel: return "InvokeKernel";
    case Opcode::kInvokeLibrary: return "InvokeLibrary";
    case Opcode::kInvokeBuiltin: return "InvokeBuiltin";
    case Opcode::kMakeShape: return "MakeShape";
    case Opcode::kMakeTuple: return "MakeTuple";
    case Opcode::kGetTuple: return "GetTuple";
    case Opcode::kLoadConst: return "LoadConst";
    case Opcode::kCallFn: return "CallFn";
    case Opcode::kCondBranch: return "CondBranch";
    case Opcode::kJump: return "Jump";
    case Opcode::kMove: return "Move";
    case Opcode::kRet: return "Ret";
  }
  return "?";
}

int VMProgram::find_function(const std::string& name) const {
  for (size_t i = 0; i < functions.size(); ++i) {
    if (functions[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

using SiteMap = std::map<std::pair<std::string, std::string>, std::vector<CheckSite>>;

struct Tables {
  const Module& m;
  const LibraryRegistry& libs;
  VMProgram& prog;

  int64_t intern(std::vector<std::string>& table, const std::string& name) {
    auto it = std::find(table.begin(), table.end(), name);
    if (it != table.end()) return it - table.begin();
    table.push_back(name);
    return static_cast<int64_t>(table.size()) - 1;
  }
};

ShapeOpKind op_kind(SymExpr::Kind k) {
  switch (k) {
    case SymExpr::Kind::kAdd: return ShapeOpKind::kAdd;
    case SymExpr::Kind::kSub: return ShapeOpKind::kSub;
    case SymExpr::Kind::kMul: return ShapeOpKind::kMul;
    case SymExpr::Kind::kFloorDiv: return ShapeOpKind::kFloorDiv;
    case SymExpr::Kind::kMod: return ShapeOpKind::kMod;
    case SymExpr::Kind::kMax: return ShapeOpKind::kMax;
    case SymExpr::Kind::kMin: return ShapeOpKind::kMin;
    default: break;
  }
  throw Error(ErrorKind::kRuntime, "not a binary symbolic expression");
}

Instruction ins(Opcode op) {
  Instruction i;
  i.op = op;
  return i;
}

struct DimSite {
  std::vector<int> path;
  int index;
  SymExpr dim;
};

void collect_dim_sites(const Annotation& ann, std::vector<int>& path, std::vector<DimSite>& out) {
  if (ann.is_tuple()) {
    for (size_t i = 0; i < ann.fields().size(); ++i) {
      path.push_back(static_cast<int>(i));
      collect_dim_sites(ann.fields()[i], path, out);
      path.pop_back();
    }
    return;
  }
  if (!ann.is_tensor() && !ann.is_shape()) return;
  if (const auto* dims = ann.known_dims()) {
    for (size_t k = 0; k < dims->size(); ++k) out.push_back({path, static_cast<int>(k), (*dims)[k]});
  }
}

class FnLowerer {
 public:
  FnLowerer(Tables& t, const Function& f, const SiteMap& sites) : t_(t), f_(f), sites_(sites) {}

  VMFunction run() {
    VMFunction out;
    out.name = f_.name;
    for (const auto& p : f_.params) out.params.push_back(p.name);
    for (const auto& p : f_.params) reg_of_[p.name] = next_reg_++;
    for (const auto& p : f_.params) match(p.ann, reg_of_[p.name], f_.name + "/param/" + p.name, true);
    int r = lower_body(f_.body);
    for (const auto& s : sites_for("")) {
      if (s.kind == CheckSite::Kind::kReturn) check(s.expected, r, s.id);
    }
    Instruction ret = ins(Opcode::kRet);
    ret.regs = {r};
    code_.push_back(ret);
    out.num_regs = next_reg_;
    out.num_slots = next_slot_;
    out.code = std::move(code_);
    return out;
  }

 private:
  const std::vector<CheckSite>& sites_for(const std::string& var) const {
    static const std::vector<CheckSite> kNone;
    auto it = sites_.find({f_.name, var});
    return it == sites_.end() ? kNone : it->second;
  }

  int new_reg() { return next_reg_++; }
  int new_slot() { return next_slot_++; }

  void emit(Instruction i) { code_.push_back(std::move(i)); }

  SlotRef compile(const SymExpr& e, std::vector<ShapeOp>& prog) {
    if (auto c = e.as_const()) return SlotRef::imm(*c);
    if (e.is_var()) {
      auto it = var_slot_.find(e.var());
      if (it == var_slot_.end()) {
        throw Error(ErrorKind::kUnboundSymbol,
                    "@" + f_.name + ": symbolic variable " + e.var().name() + " is not bound before use");
      }
      return SlotRef::slot(it->second);
    }
    std::string key = key_of(e);
    auto it = expr_slot_.find(key);
    if (it != expr_slot_.end()) return SlotRef::slot(it->second);
    SlotRef a = compile(e.lhs(), prog);
    SlotRef b = compile(e.rhs(), prog);
    int dst = new_slot();
    prog.push_back({dst, op_kind(e.kind()), a, b});
    expr_slot_[key] = dst;
    return SlotRef::slot(dst);
  }

  void flush(std::vector<ShapeOp>& prog) {
    if (prog.empty()) return;
    Instruction i = ins(Opcode::kComputeShape);
    i.program = std::move(prog);
    emit(std::move(i));
    prog.clear();
  }

  std::vector<SlotRef> shape_values(const std::vector<SymExpr>& dims) {
    std::vector<ShapeOp> prog;
    std::vector<SlotRef> out;
    for (const auto& d : dims) out.push_back(compile(d, prog));
    flush(prog);
    return out;
  }

  ShapePattern pattern(const Annotation& ann, std::vector<ShapeOp>& prog) {
    ShapePattern p;
    switch (ann.kind()) {
      case Annotation::Kind::kObject:
      case Annotation::Kind::kCallable:
        return p;
      case Annotation::Kind::kTuple:
        p.kind = ShapePattern::Kind::kTuple;
        for (const auto& f : ann.fields()) p.fields.push_back(pattern(f, prog));
        return p;
      case Annotation::Kind::kTensor:
      case Annotation::Kind::kShape:
        p.kind = ann.is_tensor() ? ShapePattern::Kind::kTensor : ShapePattern::Kind::kShape;
        p.dtype = ann.is_tensor() ? ann.dtype() : std::nullopt;
        p.rank = ann.shape_spec().rank();
        if (const auto* dims = ann.known_dims()) {
          for (const auto& d : *dims) p.dims.push_back(compile(d, prog));
        }
        return p;
    }
    return p;
  }

  void check(const Annotation& ann, int reg, const std::string& site) {
    std::vector<ShapeOp> prog;
    ShapePattern p = pattern(ann, prog);
    flush(prog);
    Instruction i = ins(Opcode::kCheckShape);
    i.regs = {reg};
    i.pattern = std::move(p);
    i.site = site;
    emit(std::move(i));
  }

  Instruction bind_shape(int reg, const DimSite& d, const std::string& site) {
    Instruction i = ins(Opcode::kBindShape);
    i.regs = {reg};
    i.path = d.path;
    i.index = d.index;
    i.site = site;
    return i;
  }

  // Binds the variables of `ann` not yet in the heap from the value in `reg`.
  // With `verify`, repeated bare dims are compared as they are read.
  void bind_vars(const Annotation& ann, int reg, const std::string& site, bool verify) {
    std::vector<DimSite> dims;
    std::vector<int> path;
    collect_dim_sites(ann, path, dims);
    for (const auto& d : dims) {
      if (!d.dim.is_var()) continue;
      Instruction i = bind_shape(reg, d, site);
      auto it = var_slot_.find(d.dim.var());
      if (it != var_slot_.end()) {
        if (!verify) continue;
        i.expect = SlotRef::slot(it->second);
      } else {
        int s = new_slot();
        var_slot_[d.dim.var()] = s;
        i.slots = {SlotRef::slot(s)};
      }
      emit(std::move(i));
    }
    bool progress = true;
    while (progress) {
      progress = false;
      for (const auto& d : dims) {
        std::vector<SymVar> open;
        for (const auto& v : free_vars(d.dim)) {
          if (!var_slot_.count(v)) open.push_back(v);
        }
        if (open.size() != 1) continue;
        auto lf = linear_in(d.dim, open[0]);
        if (!lf) continue;
        int actual = new_slot();
        Instruction i = bind_shape(reg, d, site);
        i.slots = {SlotRef::slot(actual)};
        emit(std::move(i));
        std::vector<ShapeOp> prog;
        SlotRef rest = compile(lf->rest, prog);
        int diff = new_slot();
        prog.push_back({diff, ShapeOpKind::kSub, SlotRef::slot(actual), rest});
        int v = new_slot();
        prog.push_back({v, ShapeOpKind::kFloorDiv, SlotRef::slot(diff), SlotRef::imm(lf->coeff)});
        flush(prog);
        var_slot_[open[0]] = v;
        progress = true;
      }
    }
  }

  void match(const Annotation& ann, int reg, const std::string& site, bool verify = false) {
    bind_vars(ann, reg, site, verify);
    check(ann, reg, site);
  }

  int lower_body(const Body& b) {
    for (const auto& blk : b.blocks) {
      for (const auto& bind : blk.bindings) {
        int r = lower_expr(bind.value, bind.var);
        for (const auto& s : sites_for(bind.var)) {
          if (s.kind == CheckSite::Kind::kCallArg) continue;
          if (s.kind == CheckSite::Kind::kMatchCast) {
            match(s.expected, r, s.id);
          } else {
            check(s.expected, r, s.id);
          }
        }
        if (bind.is_match_cast() && !has_match_cast_site(bind.var)) {
          bind_vars(*bind.ann, r, f_.name + "/match_cast/" + bind.var, false);
        }
        reg_of_[bind.var] = r;
      }
    }
    return lower_expr(b.result, "");
  }

  bool has_match_cast_site(const std::string& var) const {
    const auto& ss = sites_for(var);
    return std::any_of(ss.begin(), ss.end(), [](const CheckSite& s) { return s.kind == CheckSite::Kind::kMatchCast; });
  }

  std::vector<int> lower_args(const Expr& e, const std::string& var) {
    std::vector<int> regs;
    for (const auto& a : e->args) regs.push_back(lower_expr(a, var));
    for (const auto& s : sites_for(var)) {
      if (s.kind == CheckSite::Kind::kCallArg && s.arg_index >= 0 && s.arg_index < static_cast<int>(regs.size())) {
        match(s.expected, regs[static_cast<size_t>(s.arg_index)], s.id);
      }
    }
    return regs;
  }

  int dps(const Expr& e, const std::string& var, Opcode op, int64_t index) {
    if (e->dests.empty()) {
      throw Error(ErrorKind::kNotPlanned, "@" + f_.name + ": call to " + e->name + " has no planned destination",
                  e->span);
    }
    std::vector<int> regs = lower_args(e, var);
    size_t first_out = regs.size();
    for (const auto& d : e->dests) regs.push_back(operand(d, e->span));
    Instruction i = ins(op);
    i.index = index;
    i.regs = regs;
    if (e->tir_vars) i.slots = shape_values(*e->tir_vars);
    emit(std::move(i));
    const Annotation& out = *e->out_ann;
    if (!out.is_tuple()) return regs[first_out];
    Instruction mk = ins(Opcode::kMakeTuple);
    mk.dst = new_reg();
    for (size_t k = 0; k < out.fields().size(); ++k) mk.regs.push_back(regs[first_out + k]);
    int dst = mk.dst;
    emit(std::move(mk));
    return dst;
  }

  int operand(const std::string& name, const SourceSpan& span) {
    auto it = reg_of_.find(name);
    if (it == reg_of_.end()) throw Error(ErrorKind::kUnboundSymbol, "undefined variable " + name, span);
    return it->second;
  }

  int lower_expr(const Expr& e, const std::string& var) {
    switch (e->kind) {
      case ExprKind::kVarRef:
        return operand(e->name, e->span);
      case ExprKind::kConstTensor: {
        Instruction i = ins(Opcode::kLoadConst);
        i.dst = new_reg();
        i.index = static_cast<int64_t>(t_.prog.constants.size());
        t_.prog.constants.push_back(e->data);
        emit(i);
        return i.dst;
      }
      case ExprKind::kShapeLiteral: {
        Instruction i = ins(Opcode::kMakeShape);
        i.slots = shape_values(e->dims);
        i.dst = new_reg();
        emit(i);
        return i.dst;
      }
      case ExprKind::kTupleMake: {
        Instruction i = ins(Opcode::kMakeTuple);
        for (const auto& a : e->args) i.regs.push_back(lower_expr(a, var));
        i.dst = new_reg();
        emit(i);
        return i.dst;
      }
      case ExprKind::kTupleGet: {
        Instruction i = ins(Opcode::kGetTuple);
        i.regs = {lower_expr(e->args[0], var)};
        i.index = e->index;
        i.dst = new_reg();
        emit(i);
        return i.dst;
      }
      case ExprKind::kCallOp:
        throw Error(ErrorKind::kNotLowered, "@" + f_.name + ": operator " + e->name + " was not legalized", e->span);
      case ExprKind::kCallFunc: {
        int idx = -1;
        for (size_t k = 0; k < t_.m.functions.size(); ++k) {
          if (t_.m.functions[k].name == e->name) idx = static_cast<int>(k);
        }
        if (idx < 0) throw Error(ErrorKind::kUnboundSymbol, "call to undefined function @" + e->name, e->span);
        Instruction i = ins(Opcode::kCallFn);
        i.regs = lower_args(e, var);
        i.index = idx;
        i.dst = new_reg();
        emit(i);
        return i.dst;
      }
      case ExprKind::kCallTir: {
        int64_t idx = -1;
        for (size_t k = 0; k < t_.prog.kernels.size(); ++k) {
          if (t_.prog.kernels[k].name == e->name) idx = static_cast<int64_t>(k);
        }
        if (idx < 0) throw Error(ErrorKind::kUnboundSymbol, "call to undefined prim_fn @" + e->name, e->span);
        return dps(e, var, Opcode::kInvokeKernel, idx);
      }
      case ExprKind::kCallDpsLibrary:
        if (!t_.libs.find(e->name)) {
          throw Error(ErrorKind::kUnresolvedExtern, "no library routine named \"" + e->name + "\"", e->span);
        }
        return dps(e, var, Opcode::kInvokeLibrary, t_.intern(t_.prog.libraries, e->name));
      case ExprKind::kCallBuiltin:
        return builtin(e, var);
      case ExprKind::kIf:
        return lower_if(e, var);
    }
    return -1;
  }

  int builtin(const Expr& e, const std::string& var) {
    if (e->name == "alloc_storage") {
      Instruction i = ins(Opcode::kAllocStorage);
      i.slots = shape_values(e->dims);
      i.dtype = e->dtype;
      i.dst = new_reg();
      emit(i);
      return i.dst;
    }
    if (e->name == "alloc_tensor") {
      Instruction i = ins(Opcode::kAllocTensor);
      i.regs = lower_args(e, var);
      i.slots = shape_values(e->dims);
      i.dtype = e->dtype;
      i.dst = new_reg();
      emit(i);
      return i.dst;
    }
    if (!find_builtin(e->name)) {
      throw Error(ErrorKind::kUnresolvedExtern, "no builtin named \"" + e->name + "\"", e->span);
    }
    Instruction i = ins(Opcode::kInvokeBuiltin);
    i.regs = lower_args(e, var);
    i.index = t_.intern(t_.prog.builtins, e->name);
    i.dst = new_reg();
    emit(i);
    return i.dst;
  }

  int lower_if(const Expr& e, const std::string& var) {
    int cond = lower_expr(e->args[0], var);
    int dst = new_reg();
    Instruction br = ins(Opcode::kCondBranch);
    br.regs = {cond};
    size_t br_pc = code_.size();
    emit(br);
    auto saved_vars = var_slot_;
    auto saved_exprs = expr_slot_;
    auto arm = [&](const Body& b) {
      int r = lower_body(b);
      Instruction mv = ins(Opcode::kMove);
      mv.regs = {r};
      mv.dst = dst;
      emit(mv);
      var_slot_ = saved_vars;
      expr_slot_ = saved_exprs;
    };
    arm(*e->then_body);
    size_t jump_pc = code_.size();
    emit(ins(Opcode::kJump));
    code_[br_pc].index = static_cast<int64_t>(code_.size());
    arm(*e->else_body);
    code_[jump_pc].index = static_cast<int64_t>(code_.size());
    return dst;
  }

  Tables& t_;
  const Function& f_;
  const SiteMap& sites_;
  std::map<std::string, int> reg_of_;
  std::map<SymVar, int> var_slot_;
  std::map<std::string, int> expr_slot_;
  int next_reg_ = 0;
  int next_slot_ = 0;
  std::vector<Instruction> code_;
};

}  // namespace

VMProgram lower_to_vm(const Module& m, const LibraryRegistry& libs) {
  VMProgram prog;
  prog.kernels = m.prim_funcs;
  SiteMap sites;
  for (auto& s : deduce_module(m).sites) sites[{s.function, s.var}].push_back(std::move(s));
  Tables t{m, libs, prog};
  for (const auto& f : m.functions) prog.functions.push_back(FnLowerer(t, f, sites).run());
  return prog;
}

}  // namespace symrelax
