// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <sstream>

#include "symrelax/error.h"
#include "symrelax/text.h"
#include "symrelax/vm.h"

namespace symrelax {

namespace {

constexpr const char* kShapeOpNames[] = {"add", "sub", "mul", "floordiv", "mod", "max", "min"};

std::string slot_text(const SlotRef& s) { return (s.is_const ? "#" : "s") + std::to_string(s.value); }

template <typename T, typename F>
std::string list(const std::vector<T>& xs, F fmt, const char* sep = ",") {
  std::string out = "[";
  for (size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + fmt(xs[i]);
  return out + "]";
}

std::string pattern_text(const ShapePattern& p) {
  auto dims = [&]() { return list(p.dims, slot_text); };
  switch (p.kind) {
    case ShapePattern::Kind::kAny:
      return "*";
    case ShapePattern::Kind::kTensor:
      return std::string("T(") + (p.dtype ? dtype_name(*p.dtype) : "?") + ";" + std::to_string(p.rank) + ";" +
             dims() + ")";
    case ShapePattern::Kind::kShape:
      return "S(" + std::to_string(p.rank) + ";" + dims() + ")";
    case ShapePattern::Kind::kTuple:
      return "U" + list(p.fields, pattern_text, "|");
  }
  return "*";
}

std::string hex(const std::string& bytes) {
  static const char* kDigits = "0123456789abcdef";
  std::string out;
  for (unsigned char c : bytes) {
    out += kDigits[c >> 4];
    out += kDigits[c & 15];
  }
  return out;
}

std::string instruction_text(const Instruction& in) {
  std::ostringstream out;
  out << opcode_name(in.op);
  if (in.dst >= 0) out << " dst=r" << in.dst;
  if (!in.regs.empty()) out << " regs=" << list(in.regs, [](int r) { return "r" + std::to_string(r); });
  if (in.index != 0) out << " index=" << in.index;
  if (!in.path.empty()) out << " path=" << list(in.path, [](int k) { return std::to_string(k); });
  if (!in.slots.empty()) out << " slots=" << list(in.slots, slot_text);
  if (in.expect) out << " expect=" << slot_text(*in.expect);
  if (!in.program.empty()) {
    out << " prog=" << list(
                           in.program,
                           [](const ShapeOp& op) {
                             return "s" + std::to_string(op.dst) + "=" + kShapeOpNames[static_cast<int>(op.kind)] +
                                    "(" + slot_text(op.a) + "," + slot_text(op.b) + ")";
                           },
                           ";");
  }
  if (in.op == Opcode::kCheckShape) out << " pattern=" << pattern_text(in.pattern);
  if (in.dtype) out << " dtype=" << dtype_name(*in.dtype);
  if (!in.site.empty()) out << " site=" << in.site;
  return out.str();
}

[[noreturn]] void bad(const std::string& msg, int line) {
  throw Error(ErrorKind::kSyntax, "vm listing line " + std::to_string(line) + ": " + msg);
}

class Cursor {
 public:
  Cursor(std::string_view s, int line) : s_(s), line_(line) {}

  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }
  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  void expect(char c) {
    if (!accept(c)) bad(std::string("expected '") + c + "'", line_);
  }
  int64_t integer() {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) bad("expected an integer", line_);
    pos_ = static_cast<size_t>(p - s_.data());
    return v;
  }
  std::string word() {
    size_t start = pos_;
    while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }
  SlotRef slot() {
    if (accept('#')) return SlotRef::imm(integer());
    expect('s');
    return SlotRef::slot(integer());
  }
  int reg() {
    expect('r');
    return static_cast<int>(integer());
  }
  template <typename F>
  auto list(F item, char sep = ',') {
    std::vector<decltype(item())> out;
    expect('[');
    if (accept(']')) return out;
    do {
      out.push_back(item());
    } while (accept(sep));
    expect(']');
    return out;
  }
  DType dtype() {
    std::string w = word();
    auto d = parse_dtype(w);
    if (!d) bad("unknown dtype " + w, line_);
    return *d;
  }
  ShapePattern pattern() {
    ShapePattern p;
    if (accept('*')) return p;
    if (accept('U')) {
      p.kind = ShapePattern::Kind::kTuple;
      p.fields = list([&] { return pattern(); }, '|');
      return p;
    }
    if (accept('T')) {
      p.kind = ShapePattern::Kind::kTensor;
      expect('(');
      if (!accept('?')) p.dtype = dtype();
      expect(';');
    } else {
      expect('S');
      p.kind = ShapePattern::Kind::kShape;
      expect('(');
    }
    p.rank = static_cast<int>(integer());
    expect(';');
    p.dims = list([&] { return slot(); });
    expect(')');
    return p;
  }
  ShapeOp shape_op() {
    ShapeOp op;
    expect('s');
    op.dst = static_cast<int>(integer());
    expect('=');
    std::string name = word();
    bool found = false;
    for (int k = 0; k < 7; ++k) {
      if (name == kShapeOpNames[k]) {
        op.kind = static_cast<ShapeOpKind>(k);
        found = true;
      }
    }
    if (!found) bad("unknown shape op " + name, line_);
    expect('(');
    op.a = slot();
    expect(',');
    op.b = slot();
    expect(')');
    return op;
  }

 private:
  std::string_view s_;
  size_t pos_ = 0;
  int line_;
};

Instruction parse_instruction(const std::string& text, int line) {
  std::istringstream in(text);
  std::string name;
  in >> name;
  Instruction ins;
  bool found = false;
  for (int k = 0; k <= static_cast<int>(Opcode::kRet); ++k) {
    if (name == opcode_name(static_cast<Opcode>(k))) {
      ins.op = static_cast<Opcode>(k);
      found = true;
    }
  }
  if (!found) bad("unknown instruction " + name, line);
  std::string field;
  while (in >> field) {
    auto eq = field.find('=');
    if (eq == std::string::npos) bad("expected key=value, got " + field, line);
    std::string key = field.substr(0, eq);
    std::string value = field.substr(eq + 1);
    Cursor c(value, line);
    if (key == "dst") {
      ins.dst = c.reg();
    } else if (key == "regs") {
      ins.regs = c.list([&] { return c.reg(); });
    } else if (key == "index") {
      ins.index = c.integer();
    } else if (key == "path") {
      ins.path = c.list([&] { return static_cast<int>(c.integer()); });
    } else if (key == "slots") {
      ins.slots = c.list([&] { return c.slot(); });
    } else if (key == "expect") {
      ins.expect = c.slot();
    } else if (key == "prog") {
      ins.program = c.list([&] { return c.shape_op(); }, ';');
    } else if (key == "pattern") {
      ins.pattern = c.pattern();
    } else if (key == "dtype") {
      ins.dtype = c.dtype();
    } else if (key == "site") {
      ins.site = value;
      continue;
    } else {
      bad("unknown field " + key, line);
    }
    if (!c.done()) bad("trailing characters in " + field, line);
  }
  return ins;
}

std::string unhex(std::string_view s, int line) {
  if (s.size() % 2) bad("odd-length constant", line);
  std::string out;
  for (size_t i = 0; i < s.size(); i += 2) {
    unsigned v = 0;
    auto [p, ec] = std::from_chars(s.data() + i, s.data() + i + 2, v, 16);
    if (ec != std::errc() || p != s.data() + i + 2) bad("bad constant data", line);
    out += static_cast<char>(v);
  }
  return out;
}

}  // namespace

std::string print_vm(const VMProgram& p) {
  std::ostringstream out;
  out << "; symrelax vm listing\n";
  if (!p.kernels.empty()) {
    out << ".kernels\n";
    for (const auto& k : p.kernels) out << print_prim_func(k);
    out << ".end\n";
  }
  for (size_t i = 0; i < p.libraries.size(); ++i) out << ".library " << i << " " << p.libraries[i] << "\n";
  for (size_t i = 0; i < p.builtins.size(); ++i) out << ".builtin " << i << " " << p.builtins[i] << "\n";
  for (size_t i = 0; i < p.constants.size(); ++i) out << ".const " << i << " " << hex(encode_tensor(p.constants[i])) << "\n";
  for (const auto& f : p.functions) {
    out << ".function " << f.name << " params=" << list(f.params, [](const std::string& n) { return n; })
        << " regs=" << f.num_regs << " slots=" << f.num_slots
        << "\n";
    for (size_t pc = 0; pc < f.code.size(); ++pc) out << "  " << pc << ": " << instruction_text(f.code[pc]) << "\n";
    out << ".end\n";
  }
  return out.str();
}

VMProgram parse_vm(std::string_view text) {
  VMProgram p;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  VMFunction* fn = nullptr;
  bool in_kernels = false;
  std::string kernel_text;
  auto header_int = [&](std::istringstream& ls, const std::string& key) {
    std::string field;
    ls >> field;
    if (field.rfind(key + "=", 0) != 0) bad("expected " + key + "=", lineno);
    Cursor c(std::string_view(field).substr(key.size() + 1), lineno);
    return static_cast<int>(c.integer());
  };
  auto indexed = [&](std::istringstream& ls, size_t expected_index) {
    size_t i = 0;
    std::string name;
    ls >> i >> name;
    if (i != expected_index || name.empty()) bad("entries must be numbered in order", lineno);
    return name;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (in_kernels) {
      if (line == ".end") {
        in_kernels = false;
        p.kernels = parse_module(kernel_text, "<vm kernels>").prim_funcs;
      } else {
        kernel_text += line + "\n";
      }
      continue;
    }
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head) || head[0] == ';') continue;
    if (fn) {
      if (head == ".end") {
        fn = nullptr;
        continue;
      }
      if (head.back() != ':') bad("expected '<pc>:'", lineno);
      if (std::stoll(head) != static_cast<long long>(fn->code.size())) bad("instructions out of order", lineno);
      std::string rest;
      std::getline(ls, rest);
      fn->code.push_back(parse_instruction(rest, lineno));
    } else if (head == ".kernels") {
      in_kernels = true;
    } else if (head == ".library") {
      p.libraries.push_back(indexed(ls, p.libraries.size()));
    } else if (head == ".builtin") {
      p.builtins.push_back(indexed(ls, p.builtins.size()));
    } else if (head == ".const") {
      std::string data = indexed(ls, p.constants.size());
      p.constants.push_back(decode_tensor(unhex(data, lineno)));
    } else if (head == ".function") {
      VMFunction f;
      std::string params;
      ls >> f.name >> params;
      if (params.rfind("params=", 0) != 0) bad("expected params=", lineno);
      Cursor c(std::string_view(params).substr(7), lineno);
      f.params = c.list([&] { return c.word(); });
      f.num_regs = header_int(ls, "regs");
      f.num_slots = header_int(ls, "slots");
      p.functions.push_back(std::move(f));
      fn = &p.functions.back();
    } else {
      bad("unexpected " + head, lineno);
    }
  }
  if (fn || in_kernels) bad("missing .end", lineno);
  return p;
}

}  // namespace symrelax
