// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0


#include "symrelax/error.h"
#include "symrelax/vm.h"

namespace symrelax {

namespace {

struct Frame {
  std::vector<Value> regs;
  std::vector<int64_t> slots;
  bool kernel_ran = false;
};

int64_t read(const Frame& fr, const SlotRef& s) {
  return s.is_const ? s.value : fr.slots.at(static_cast<size_t>(s.value));
}

int64_t apply(ShapeOpKind k, int64_t a, int64_t b) {
  switch (k) {
    case ShapeOpKind::kAdd: return checked_add(a, b);
    case ShapeOpKind::kSub: return checked_sub(a, b);
    case ShapeOpKind::kMul: return checked_mul(a, b);
    case ShapeOpKind::kFloorDiv: return floordiv_i64(a, b);
    case ShapeOpKind::kMod: return floormod_i64(a, b);
    case ShapeOpKind::kMax: return std::max(a, b);
    case ShapeOpKind::kMin: return std::min(a, b);
  }
  return 0;
}

std::string render(const ShapePattern& p, const Frame& fr) {
  auto dims = [&]() {
    if (p.dims.empty() && p.rank >= 0) return "ndim=" + std::to_string(p.rank);
    if (p.dims.empty()) return std::string("?");
    std::string s = "(";
    for (size_t i = 0; i < p.dims.size(); ++i) {
      s += (i ? ", " : "") + std::to_string(read(fr, p.dims[i]));
    }
    return s + (p.dims.size() == 1 ? ",)" : ")");
  };
  switch (p.kind) {
    case ShapePattern::Kind::kAny:
      return "Object";
    case ShapePattern::Kind::kTensor:
      return "Tensor(" + dims() + ", " + (p.dtype ? dtype_name(*p.dtype) : "?") + ")";
    case ShapePattern::Kind::kShape:
      return "Shape(" + dims() + ")";
    case ShapePattern::Kind::kTuple: {
      std::string s = "Tuple(";
      for (size_t i = 0; i < p.fields.size(); ++i) s += (i ? ", " : "") + render(p.fields[i], fr);
      return s + ")";
    }
  }
  return "?";
}

bool matches(const ShapePattern& p, const Value& v, const Frame& fr) {
  auto shape_ok = [&](const std::vector<int64_t>& shape) {
    if (p.rank >= 0 && static_cast<int>(shape.size()) != p.rank) return false;
    if (p.dims.empty()) return true;
    if (p.dims.size() != shape.size()) return false;
    for (size_t i = 0; i < shape.size(); ++i) {
      if (read(fr, p.dims[i]) != shape[i]) return false;
    }
    return true;
  };
  switch (p.kind) {
    case ShapePattern::Kind::kAny:
      return true;
    case ShapePattern::Kind::kTensor: {
      const auto* t = std::get_if<NDArray>(&v);
      return t && (!p.dtype || *p.dtype == t->dtype()) && shape_ok(t->shape());
    }
    case ShapePattern::Kind::kShape: {
      const auto* s = std::get_if<ShapeTuple>(&v);
      return s && shape_ok(*s);
    }
    case ShapePattern::Kind::kTuple: {
      const auto* t = std::get_if<std::shared_ptr<TupleValue>>(&v);
      if (!t || (*t)->fields.size() != p.fields.size()) return false;
      for (size_t i = 0; i < p.fields.size(); ++i) {
        if (!matches(p.fields[i], (*t)->fields[i], fr)) return false;
      }
      return true;
    }
  }
  return false;
}

class Machine {
 public:
  Machine(const VMProgram& p, const LibraryRegistry& libs, RunStats* stats)
      : p_(p), libs_(libs), run_stats_(stats), stats_(std::make_shared<AllocStats>()) {}

  ~Machine() {
    if (run_stats_) {
      run_stats_->allocs += stats_->allocs;
      run_stats_->peak_bytes = std::max(run_stats_->peak_bytes, stats_->peak_bytes);
    }
  }

  Value call(const VMFunction& fn, std::vector<Value> args) {
    if (args.size() != fn.params.size()) {
      throw Error(ErrorKind::kArityMismatch, "@" + fn.name + " takes " + std::to_string(fn.params.size()) +
                                                 " arguments, got " + std::to_string(args.size()));
    }
    Frame fr;
    fr.regs.resize(static_cast<size_t>(fn.num_regs));
    fr.slots.assign(static_cast<size_t>(fn.num_slots), 0);
    for (size_t i = 0; i < args.size(); ++i) fr.regs[i] = std::move(args[i]);
    size_t pc = 0;
    while (pc < fn.code.size()) {
      const Instruction& in = fn.code[pc];
      try {
        if (in.op == Opcode::kRet) return reg(fr, in.regs.at(0));
        pc = step(in, fr, pc);
      } catch (const ShapeCheckFailed&) {
        throw;
      } catch (const Error& e) {
        if (e.detail().rfind("@", 0) == 0) throw;
        throw Error(e.kind(), "@" + fn.name + " pc " + std::to_string(pc) + " " + opcode_name(in.op) + ": " +
                                  e.detail());
      }
    }
    throw Error(ErrorKind::kRuntime, "@" + fn.name + " fell off the end of its code");
  }

 private:
  static Value& reg(Frame& fr, int r) { return fr.regs.at(static_cast<size_t>(r)); }

  static NDArray tensor(Frame& fr, int r) {
    const auto* t = std::get_if<NDArray>(&reg(fr, r));
    if (!t) throw Error(ErrorKind::kRuntime, "register r" + std::to_string(r) + " holds " + describe(reg(fr, r)));
    return *t;
  }

  std::vector<NDArray> buffers(Frame& fr, const Instruction& in) {
    std::vector<NDArray> out;
    for (int r : in.regs) out.push_back(tensor(fr, r));
    return out;
  }

  void bind_shape(const Instruction& in, Frame& fr) {
    const Value* v = &reg(fr, in.regs.at(0));
    for (int k : in.path) {
      const auto* t = std::get_if<std::shared_ptr<TupleValue>>(v);
      if (!t || k >= static_cast<int>((*t)->fields.size())) {
        throw ShapeCheckFailed(in.site, "a tuple with field " + std::to_string(k), describe(*v));
      }
      v = &(*t)->fields[static_cast<size_t>(k)];
    }
    const std::vector<int64_t>* shape = nullptr;
    if (const auto* t = std::get_if<NDArray>(v)) shape = &t->shape();
    if (const auto* s = std::get_if<ShapeTuple>(v)) shape = s;
    std::string what = "dim " + std::to_string(in.index);
    if (!shape || in.index >= static_cast<int64_t>(shape->size())) {
      throw ShapeCheckFailed(in.site, "a value with " + what, describe(*v));
    }
    int64_t actual = (*shape)[static_cast<size_t>(in.index)];
    if (in.expect) {
      int64_t want = read(fr, *in.expect);
      if (want != actual) {
        throw ShapeCheckFailed(in.site, what + " = " + std::to_string(want), what + " = " + std::to_string(actual));
      }
      return;
    }
    fr.slots.at(static_cast<size_t>(in.slots.at(0).value)) = actual;
  }

  std::vector<int64_t> ints(const Frame& fr, const std::vector<SlotRef>& refs) {
    std::vector<int64_t> out;
    for (const auto& r : refs) out.push_back(read(fr, r));
    return out;
  }

  size_t step(const Instruction& in, Frame& fr, size_t pc) {
    switch (in.op) {
      case Opcode::kBindShape:
        bind_shape(in, fr);
        break;
      case Opcode::kComputeShape:
        for (const auto& op : in.program) {
          fr.slots.at(static_cast<size_t>(op.dst)) = apply(op.kind, read(fr, op.a), read(fr, op.b));
        }
        break;
      case Opcode::kCheckShape: {
        const Value& v = reg(fr, in.regs.at(0));
        if (!matches(in.pattern, v, fr)) throw ShapeCheckFailed(in.site, render(in.pattern, fr), describe(v));
        break;
      }
      case Opcode::kAllocStorage:
        if (run_stats_) {
          ++run_stats_->storage_allocs;
          if (fr.kernel_ran) ++run_stats_->late_storage_allocs;
        }
        reg(fr, in.dst) = std::make_shared<Storage>(read(fr, in.slots.at(0)), stats_);
        break;
      case Opcode::kAllocTensor: {
        const auto* st = std::get_if<std::shared_ptr<Storage>>(&reg(fr, in.regs.at(0)));
        if (!st) throw Error(ErrorKind::kRuntime, "AllocTensor needs a storage");
        reg(fr, in.dst) = NDArray::view(*st, 0, in.dtype.value_or(DType::kF32), ints(fr, in.slots));
        break;
      }
      case Opcode::kInvokeKernel: {
        auto bufs = buffers(fr, in);
        exec_prim(p_.kernels.at(static_cast<size_t>(in.index)), bufs, ints(fr, in.slots));
        fr.kernel_ran = true;
        break;
      }
      case Opcode::kInvokeLibrary: {
        const std::string& name = p_.libraries.at(static_cast<size_t>(in.index));
        const LibraryRoutine* r = libs_.find(name);
        if (!r) throw Error(ErrorKind::kUnresolvedExtern, "no library routine named \"" + name + "\"");
        auto bufs = buffers(fr, in);
        (*r)(bufs);
        fr.kernel_ran = true;
        break;
      }
      case Opcode::kInvokeBuiltin: {
        const std::string& name = p_.builtins.at(static_cast<size_t>(in.index));
        const BuiltinRoutine* b = find_builtin(name);
        if (!b) throw Error(ErrorKind::kUnresolvedExtern, "no builtin named \"" + name + "\"");
        std::vector<Value> args;
        for (int r : in.regs) args.push_back(reg(fr, r));
        reg(fr, in.dst) = (*b)(args, stats_);
        fr.kernel_ran = true;
        break;
      }
      case Opcode::kMakeShape:
        reg(fr, in.dst) = ShapeTuple(ints(fr, in.slots));
        break;
      case Opcode::kMakeTuple: {
        std::vector<Value> fields;
        for (int r : in.regs) fields.push_back(reg(fr, r));
        reg(fr, in.dst) = make_tuple_value(std::move(fields));
        break;
      }
      case Opcode::kGetTuple: {
        const Value& t = reg(fr, in.regs.at(0));
        const auto* tup = std::get_if<std::shared_ptr<TupleValue>>(&t);
        if (!tup || in.index < 0 || in.index >= static_cast<int64_t>((*tup)->fields.size())) {
          throw Error(ErrorKind::kRuntime, "bad tuple access on " + describe(t));
        }
        reg(fr, in.dst) = (*tup)->fields[static_cast<size_t>(in.index)];
        break;
      }
      case Opcode::kLoadConst:
        reg(fr, in.dst) = p_.constants.at(static_cast<size_t>(in.index));
        break;
      case Opcode::kCallFn: {
        std::vector<Value> args;
        for (int r : in.regs) args.push_back(reg(fr, r));
        reg(fr, in.dst) = call(p_.functions.at(static_cast<size_t>(in.index)), std::move(args));
        break;
      }
      case Opcode::kCondBranch: {
        const auto* t = std::get_if<NDArray>(&reg(fr, in.regs.at(0)));
        if (!t || t->numel() < 1) throw Error(ErrorKind::kRuntime, "if condition must be a non-empty tensor");
        if (t->get(0) == 0) return static_cast<size_t>(in.index);
        break;
      }
      case Opcode::kJump:
        return static_cast<size_t>(in.index);
      case Opcode::kMove:
        reg(fr, in.dst) = reg(fr, in.regs.at(0));
        break;
      case Opcode::kRet:
        break;
    }
    return pc + 1;
  }

  const VMProgram& p_;
  const LibraryRegistry& libs_;
  RunStats* run_stats_;
  std::shared_ptr<AllocStats> stats_;
};

}  // namespace

Value run_vm(const VMProgram& p, const std::string& entry, const std::vector<Value>& args, RunStats* stats,
             const LibraryRegistry& libs) {
  int idx = p.find_function(entry);
  if (idx < 0) throw Error(ErrorKind::kUsage, "no function named @" + entry);
  Machine m(p, libs, stats);
  return m.call(p.functions[static_cast<size_t>(idx)], args);
}

}  // namespace symrelax
