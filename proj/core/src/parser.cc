// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "symrelax/error.h"
#include "symrelax/text.h"

namespace symrelax {

namespace {

enum class Tok { kIdent, kNumber, kString, kPunct, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  int line = 1;
  int col = 1;
  int end_line = 1;
  int end_col = 1;
};

class Lexer {
 public:
  Lexer(std::string_view src, std::string file) : src_(src), file_(std::move(file)) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        t.kind = Tok::kEnd;
        t.end_line = line_;
        t.end_col = col_;
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::kIdent;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          t.text += advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        t.kind = Tok::kNumber;
        lex_number(t.text);
      } else if (c == '"') {
        t.kind = Tok::kString;
        advance();
        while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') t.text += advance();
        if (pos_ >= src_.size() || src_[pos_] != '"') fail(t, "unterminated string literal");
        advance();
      } else {
        t.kind = Tok::kPunct;
        std::string_view rest = src_.substr(pos_);
        if (rest.starts_with("->") || rest.starts_with("<=")) {
          t.text += advance();
          t.text += advance();
        } else if (std::string_view("(){}[],;:=@+-*/<").find(c) != std::string_view::npos) {
          t.text += advance();
        } else {
          fail(t, std::string("unexpected character '") + c + "'");
        }
      }
      t.end_line = line_;
      t.end_col = col_;
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (src_.substr(pos_).starts_with("//")) {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (src_.substr(pos_).starts_with("/*")) {
        Token t;
        t.line = line_;
        t.col = col_;
        advance();
        advance();
        while (pos_ < src_.size() && !src_.substr(pos_).starts_with("*/")) advance();
        if (pos_ >= src_.size()) fail(t, "unterminated comment");
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  void lex_number(std::string& out) {
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) out += advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      out += advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      size_t save = pos_;
      std::string exp(1, src_[pos_]);
      size_t k = pos_ + 1;
      if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) exp += src_[k++];
      if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
        while (pos_ < k) advance();
        out += exp;
        digits();
      } else {
        pos_ = save;
      }
    }
  }

  [[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw Error(ErrorKind::kSyntax, msg, SourceSpan{file_, t.line, t.col, line_, col_});
  }

  std::string_view src_;
  std::string file_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// Symbolic variable scope for one function or kernel.
class SymScope {
 public:
  explicit SymScope(std::vector<SymVar>* table) : table_(table) {}

  SymVar get(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    SymVar v = SymVar::fresh(name);
    vars_[name] = v;
    if (frozen_) {
      table_->push_back(v);
    } else {
      created_.push_back(v);
    }
    return v;
  }

  bool declare(const std::string& name) {
    if (std::find(declared_.begin(), declared_.end(), name) != declared_.end()) return false;
    declared_.push_back(name);
    get(name);
    return true;
  }

  // Fixes table order: declared names first, then first-use order.
  void freeze() {
    for (const auto& n : declared_) table_->push_back(vars_.at(n));
    for (const auto& v : created_) {
      if (std::find(declared_.begin(), declared_.end(), v.name()) == declared_.end()) table_->push_back(v);
    }
    frozen_ = true;
  }

 private:
  std::vector<SymVar>* table_;
  std::map<std::string, SymVar> vars_;
  std::vector<std::string> declared_;
  std::vector<SymVar> created_;
  bool frozen_ = false;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string file) : toks_(std::move(toks)), file_(std::move(file)) {}

  Module run() {
    Module m;
    std::set<std::string> globals;
    while (peek().kind != Tok::kEnd) {
      const Token& head = peek();
      if (is_kw("fn")) {
        Function f = parse_function();
        if (!globals.insert(f.name).second) {
          throw Error(ErrorKind::kDuplicateDefinition, "duplicate definition of " + f.name, f.span);
        }
        m.functions.push_back(std::move(f));
      } else if (is_kw("prim_fn")) {
        SourceSpan sp = span_of(head);
        PrimFunc p = parse_prim();
        if (!globals.insert(p.name).second) {
          throw Error(ErrorKind::kDuplicateDefinition, "duplicate definition of " + p.name, sp);
        }
        m.prim_funcs.push_back(std::move(p));
      } else if (is_kw("extern")) {
        next();
        Token s = expect_kind(Tok::kString, "extern name");
        expect(";");
        if (m.has_extern(s.text)) {
          throw Error(ErrorKind::kDuplicateDefinition, "duplicate extern " + s.text, span_of(s));
        }
        m.externs.push_back({s.text});
      } else {
        fail(head, "expected fn, prim_fn, or extern");
      }
    }
    return m;
  }

 private:
  // -- token helpers --------------------------------------------------------

  const Token& peek(size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_punct(const char* p, size_t k = 0) const { return peek(k).kind == Tok::kPunct && peek(k).text == p; }
  bool is_kw(const char* w, size_t k = 0) const { return peek(k).kind == Tok::kIdent && peek(k).text == w; }
  bool accept(const char* p) {
    if (!is_punct(p)) return false;
    next();
    return true;
  }
  SourceSpan span_of(const Token& t) const { return {file_, t.line, t.col, t.end_line, t.end_col}; }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    std::string got = t.kind == Tok::kEnd ? "end of input" : "'" + t.text + "'";
    throw Error(ErrorKind::kSyntax, msg + ", got " + got, span_of(t));
  }

  void expect(const char* p) {
    if (!accept(p)) fail(peek(), std::string("expected '") + p + "'");
  }
  void expect_kw(const char* w) {
    if (!is_kw(w)) fail(peek(), std::string("expected '") + w + "'");
    next();
  }
  Token expect_kind(Tok kind, const char* what) {
    if (peek().kind != kind) fail(peek(), std::string("expected ") + what);
    return next();
  }
  std::string ident(const char* what = "identifier") { return expect_kind(Tok::kIdent, what).text; }

  int64_t parse_int() {
    bool neg = accept("-");
    Token t = expect_kind(Tok::kNumber, "integer");
    int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size()) fail(t, "expected integer");
    return neg ? -v : v;
  }

  double parse_double() {
    bool neg = accept("-");
    if (is_kw("inf")) {
      next();
      return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    if (is_kw("true") || is_kw("false")) {
      return next().text == "true" ? 1.0 : 0.0;
    }
    Token t = expect_kind(Tok::kNumber, "number");
    double v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size()) fail(t, "malformed number");
    return neg ? -v : v;
  }

  DType parse_dtype_tok() {
    const Token& t = peek();
    auto d = t.kind == Tok::kIdent ? symrelax::parse_dtype(t.text) : std::nullopt;
    if (!d) fail(t, "expected dtype (f32, i64, bool)");
    next();
    return *d;
  }

  template <typename F>
  void comma_list(const char* close, F&& item) {
    if (accept(close)) return;
    while (true) {
      item();
      if (accept(close)) return;
      expect(",");
      if (accept(close)) return;  // trailing comma
    }
  }

  // -- symbolic expressions -----------------------------------------------

  using Resolver = std::function<SymExpr(const Token&)>;

  SymExpr sym_expr(const Resolver& r) {
    SymExpr acc = sym_term(r);
    while (true) {
      if (accept("+")) {
        acc = acc + sym_term(r);
      } else if (is_punct("-")) {
        next();
        acc = acc - sym_term(r);
      } else {
        return acc;
      }
    }
  }

  SymExpr sym_term(const Resolver& r) {
    SymExpr acc = sym_unary(r);
    while (accept("*")) acc = acc * sym_unary(r);
    return acc;
  }

  SymExpr sym_unary(const Resolver& r) {
    if (accept("-")) return SymExpr(0) - sym_unary(r);
    const Token& t = peek();
    if (t.kind == Tok::kNumber) return parse_int();
    if (accept("(")) {
      SymExpr e = sym_expr(r);
      expect(")");
      return e;
    }
    if (t.kind == Tok::kIdent) {
      static const std::set<std::string> fns = {"floordiv", "mod", "max", "min"};
      if (fns.count(t.text) && is_punct("(", 1)) {
        std::string fn = next().text;
        expect("(");
        SymExpr a = sym_expr(r);
        expect(",");
        SymExpr b = sym_expr(r);
        expect(")");
        if (fn == "floordiv") return floordiv(a, b);
        if (fn == "mod") return mod(a, b);
        if (fn == "max") return max(a, b);
        return min(a, b);
      }
      Token id = next();
      return r(id);
    }
    fail(t, "expected symbolic expression");
  }

  std::vector<SymExpr> dim_list(const Resolver& r) {
    expect("(");
    std::vector<SymExpr> dims;
    comma_list(")", [&] { dims.push_back(normalize(sym_expr(r))); });
    return dims;
  }

  // -- annotations --------------------------------------------------------

  Annotation annotation(const Resolver& r) {
    const Token& head = peek();
    if (head.kind != Tok::kIdent) fail(head, "expected annotation");
    std::string h = head.text;
    if (h == "Tensor") {
      next();
      if (!accept("(")) return Annotation::tensor(ShapeSpec::unconstrained(), std::nullopt);
      ShapeSpec spec;
      std::optional<DType> dt;
      if (is_punct("(")) {
        spec = ShapeSpec::known(dim_list(r));
        if (accept(",")) dt = parse_dtype_tok();
      } else if (is_kw("ndim")) {
        next();
        expect("=");
        spec = ShapeSpec::rank_only(static_cast<int>(parse_int()));
        if (accept(",")) dt = parse_dtype_tok();
      } else {
        dt = parse_dtype_tok();
      }
      expect(")");
      return Annotation::tensor(std::move(spec), dt);
    }
    if (h == "Shape") {
      next();
      if (!accept("(")) return Annotation::shape(ShapeSpec::unconstrained());
      ShapeSpec spec;
      if (is_kw("ndim")) {
        next();
        expect("=");
        spec = ShapeSpec::rank_only(static_cast<int>(parse_int()));
      } else {
        spec = ShapeSpec::known(dim_list(r));
      }
      expect(")");
      return Annotation::shape(std::move(spec));
    }
    if (h == "Tuple") {
      next();
      expect("(");
      std::vector<Annotation> fields;
      comma_list(")", [&] { fields.push_back(annotation(r)); });
      return Annotation::tuple(std::move(fields));
    }
    if (h == "Callable") {
      next();
      expect("(");
      expect("(");
      std::vector<Annotation> ps;
      comma_list(")", [&] { ps.push_back(annotation(r)); });
      expect(",");
      Annotation ret = annotation(r);
      expect(")");
      return Annotation::callable(std::move(ps), std::move(ret));
    }
    if (h == "Object") {
      next();
      return Annotation::object();
    }
    throw Error(ErrorKind::kUnknownAnnotation, "unknown annotation '" + h + "'", span_of(head));
  }

  // -- graph functions ----------------------------------------------------

  Function parse_function() {
    Token kw = next();
    Function f;
    f.name = ident("function name");
    f.span = span_of(kw);
    SymScope scope(&f.sym_vars);
    Resolver r = [&](const Token& t) { return SymExpr(scope.get(t.text)); };

    expect("(");
    std::set<std::string> pnames;
    comma_list(")", [&] {
      Token pn = expect_kind(Tok::kIdent, "parameter name");
      if (!pnames.insert(pn.text).second) {
        throw Error(ErrorKind::kDuplicateDefinition, "duplicate parameter " + pn.text, span_of(pn));
      }
      expect(":");
      f.params.push_back({pn.text, annotation(r)});
    });
    if (accept("->")) f.ret_ann = annotation(r);

    while (!is_punct("{")) {
      if (is_kw("sym")) {
        next();
        expect("(");
        comma_list(")", [&] {
          Token t = expect_kind(Tok::kIdent, "symbolic variable");
          if (!scope.declare(t.text)) {
            throw Error(ErrorKind::kDuplicateDefinition, "duplicate symbolic variable " + t.text, span_of(t));
          }
        });
      } else if (is_kw("bound")) {
        next();
        expect("(");
        comma_list(")", [&] {
          Token t = expect_kind(Tok::kIdent, "symbolic variable");
          expect("<=");
          int64_t ub = parse_int();
          f.upper_bounds[scope.get(t.text)] = ub;
        });
      } else if (is_kw("attrs")) {
        next();
        expect("(");
        comma_list(")", [&] { f.attrs.push_back(ident("attribute")); });
      } else {
        fail(peek(), "expected '{', sym, bound, or attrs");
      }
    }
    scope.freeze();
    f.body = parse_body(r, /*braced=*/true);
    return f;
  }

  // Parses `{ blocks... return e; }` with the opening brace still pending.
  Body parse_body(const Resolver& r, bool braced) {
    if (braced) expect("{");
    Body body;
    while (true) {
      if (is_kw("return")) {
        next();
        body.result = expr(r);
        accept(";");
        expect("}");
        return body;
      }
      if (is_kw("df") && is_punct("{", 1)) {
        next();
        next();
        Block blk{true, {}};
        while (!accept("}")) blk.bindings.push_back(binding(r));
        body.blocks.push_back(std::move(blk));
        continue;
      }
      if (peek().kind == Tok::kEnd || is_punct("}")) fail(peek(), "expected binding or return");
      if (body.blocks.empty() || body.blocks.back().dataflow) body.blocks.push_back({false, {}});
      body.blocks.back().bindings.push_back(binding(r));
    }
  }

  Binding binding(const Resolver& r) {
    Token name = expect_kind(Tok::kIdent, "binding variable");
    Binding b;
    b.var = name.text;
    b.span = span_of(name);
    if (accept(":")) b.ann = annotation(r);
    expect("=");
    if (is_kw("match_cast") && is_punct("(", 1)) {
      if (b.ann) fail(peek(), "match_cast carries its own annotation");
      next();
      next();
      b.kind = Binding::Kind::kMatchCast;
      b.value = expr(r);
      expect(",");
      b.ann = annotation(r);
      expect(")");
    } else {
      b.value = expr(r);
    }
    b.span.end_line = peek().end_line;
    b.span.end_col = peek().end_col;
    expect(";");
    return b;
  }

  Expr expr(const Resolver& r) {
    Expr e = primary(r);
    while (is_punct("[")) {
      next();
      int64_t idx = parse_int();
      expect("]");
      e = make_tuple_get(e, idx);
    }
    return e;
  }

  std::vector<Expr> arg_tuple(const Resolver& r) {
    expect("(");
    std::vector<Expr> args;
    comma_list(")", [&] { args.push_back(expr(r)); });
    return args;
  }

  std::vector<std::string> out_list() {
    expect("(");
    std::vector<std::string> out;
    comma_list(")", [&] { out.push_back(ident("destination")); });
    return out;
  }

  Expr with_span(Expr e, const Token& t) {
    auto n = std::make_shared<ExprNode>(*e);
    n->span = span_of(t);
    n->span.end_line = toks_[pos_ > 0 ? pos_ - 1 : 0].end_line;
    n->span.end_col = toks_[pos_ > 0 ? pos_ - 1 : 0].end_col;
    return n;
  }

  Expr primary(const Resolver& r) {
    const Token t = peek();
    if (t.kind == Tok::kPunct && t.text == "(") {
      next();
      if (accept(")")) return make_tuple({});
      Expr first = expr(r);
      if (accept(")")) return first;
      std::vector<Expr> fields{first};
      expect(",");
      comma_list(")", [&] { fields.push_back(expr(r)); });
      return make_tuple(std::move(fields));
    }
    if (t.kind == Tok::kPunct && t.text == "@") {
      next();
      std::string callee = ident("function name");
      std::vector<Expr> args = arg_tuple(r);
      return with_span(make_call_func(callee, std::move(args)), t);
    }
    if (t.kind != Tok::kIdent) fail(t, "expected expression");
    const std::string& w = t.text;
    if (!is_punct("(", 1)) {
      next();
      return make_var(w, span_of(t));
    }
    if (w == "shape") {
      next();
      return make_shape(dim_list(r));
    }
    if (w == "const") {
      next();
      expect("(");
      DType dt = parse_dtype_tok();
      expect(",");
      expect("(");
      std::vector<int64_t> shape;
      comma_list(")", [&] { shape.push_back(parse_int()); });
      expect(",");
      expect("[");
      std::vector<double> vals;
      comma_list("]", [&] { vals.push_back(parse_double()); });
      expect(")");
      NDArray a = NDArray::empty(dt, shape);
      if (static_cast<int64_t>(vals.size()) != a.numel()) {
        fail(t, "constant has " + std::to_string(vals.size()) + " values for shape " + shape_to_string(shape));
      }
      for (size_t i = 0; i < vals.size(); ++i) a.set(static_cast<int64_t>(i), vals[i]);
      return make_const(std::move(a));
    }
    if (w == "call_tir") {
      next();
      expect("(");
      expect("@");
      std::string prim = ident("kernel name");
      expect(",");
      std::vector<Expr> args = arg_tuple(r);
      expect(",");
      Annotation out = annotation(r);
      std::optional<std::vector<SymExpr>> tir_vars;
      std::vector<std::string> dests;
      while (accept(",")) {
        if (is_kw("shape")) {
          next();
          tir_vars = dim_list(r);
        } else if (is_kw("out")) {
          next();
          expect("=");
          dests = out_list();
        } else {
          fail(peek(), "expected shape(...) or out=(...)");
        }
      }
      expect(")");
      return with_span(make_call_tir(prim, std::move(args), std::move(out), std::move(tir_vars), std::move(dests)),
                       t);
    }
    if (w == "call_dps_library") {
      next();
      expect("(");
      std::string name = expect_kind(Tok::kString, "library name").text;
      expect(",");
      std::vector<Expr> args = arg_tuple(r);
      expect(",");
      Annotation out = annotation(r);
      std::vector<std::string> dests;
      if (accept(",")) {
        expect_kw("out");
        expect("=");
        dests = out_list();
      }
      expect(")");
      return with_span(make_call_library(name, std::move(args), std::move(out), std::move(dests)), t);
    }
    if (w == "call_builtin") {
      next();
      expect("(");
      std::string name = expect_kind(Tok::kString, "builtin name").text;
      expect(",");
      std::vector<Expr> args = arg_tuple(r);
      expect(",");
      Annotation out = annotation(r);
      expect(")");
      return with_span(make_call_builtin(name, std::move(args), std::move(out)), t);
    }
    if (w == "alloc_storage") {
      next();
      expect("(");
      SymExpr size = sym_expr(r);
      expect(",");
      DType dt = parse_dtype_tok();
      expect(")");
      return with_span(make_alloc_storage(size, dt), t);
    }
    if (w == "alloc_tensor") {
      next();
      expect("(");
      std::string storage = ident("storage variable");
      expect(",");
      std::vector<SymExpr> dims = dim_list(r);
      expect(",");
      DType dt = parse_dtype_tok();
      expect(")");
      return with_span(make_alloc_tensor(storage, std::move(dims), dt), t);
    }
    if (w == "if") {
      next();
      expect("(");
      Expr cond = expr(r);
      expect(")");
      Body then_body = parse_body(r, true);
      expect_kw("else");
      Body else_body = parse_body(r, true);
      return with_span(make_if(cond, std::move(then_body), std::move(else_body)), t);
    }
    // Graph operator call with optional integer attributes.
    next();
    expect("(");
    std::vector<Expr> args;
    OpAttrs attrs;
    comma_list(")", [&] {
      if (peek().kind == Tok::kIdent && is_punct("=", 1)) {
        std::string key = next().text;
        next();
        std::vector<int64_t> vals;
        if (accept("[")) {
          comma_list("]", [&] { vals.push_back(parse_int()); });
        } else {
          vals.push_back(parse_int());
        }
        attrs[key] = std::move(vals);
      } else {
        if (!attrs.empty()) fail(peek(), "positional argument after attribute");
        args.push_back(expr(r));
      }
    });
    return with_span(make_call_op(w, std::move(args), std::move(attrs)), t);
  }

  // -- kernels ------------------------------------------------------------

  BufferDecl buffer_decl(const Resolver& r) {
    BufferDecl b;
    b.name = ident("buffer name");
    expect(":");
    expect_kw("Buffer");
    expect("(");
    b.dims = dim_list(r);
    expect(",");
    b.dtype = parse_dtype_tok();
    expect(")");
    return b;
  }

  PrimFunc parse_prim() {
    next();
    PrimFunc p;
    p.name = ident("kernel name");
    SymScope scope(&p.sym_vars);
    std::map<std::string, SymVar> locals;
    Resolver r = [&](const Token& t) -> SymExpr {
      auto it = locals.find(t.text);
      if (it != locals.end()) return it->second;
      return scope.get(t.text);
    };
    std::set<std::string> names;
    auto add_name = [&](const std::string& n) {
      if (!names.insert(n).second) {
        throw Error(ErrorKind::kDuplicateDefinition, "duplicate buffer " + n, span_of(toks_[pos_ - 1]));
      }
    };

    expect("(");
    comma_list(")", [&] {
      p.params.push_back(buffer_decl(r));
      add_name(p.params.back().name);
    });
    expect("->");
    expect("(");
    int outputs = 0;
    comma_list(")", [&] {
      p.params.push_back(buffer_decl(r));
      add_name(p.params.back().name);
      ++outputs;
    });
    p.num_outputs = outputs;
    std::vector<std::string> scalar_names;
    while (!is_punct("{")) {
      if (is_kw("sym")) {
        next();
        expect("(");
        comma_list(")", [&] {
          Token t = expect_kind(Tok::kIdent, "symbolic variable");
          if (!scope.declare(t.text)) {
            throw Error(ErrorKind::kDuplicateDefinition, "duplicate symbolic variable " + t.text, span_of(t));
          }
        });
      } else if (is_kw("scalars")) {
        next();
        expect("(");
        comma_list(")", [&] { scalar_names.push_back(ident("scalar parameter")); });
      } else if (is_kw("op")) {
        next();
        expect("(");
        p.op = ident("operator name");
        while (accept("+")) p.op += "+" + ident("operator name");
        expect(")");
      } else {
        fail(peek(), "expected '{', sym, scalars, or op");
      }
    }
    for (const auto& s : scalar_names) scope.get(s);
    scope.freeze();
    for (const auto& s : scalar_names) p.scalar_params.push_back(*p.find_sym(s));
    expect("{");
    while (!accept("}")) {
      if (is_kw("temp") || is_kw("workspace")) {
        bool ws = next().text == "workspace";
        p.temps.push_back(buffer_decl(r));
        add_name(p.temps.back().name);
        if (ws) {
          if (p.workspace) fail(peek(), "a kernel declares at most one workspace");
          p.workspace = p.temps.back().name;
        }
        expect(";");
        continue;
      }
      p.stages.push_back(stage(r, locals));
    }
    return p;
  }

  Stage stage(const Resolver& r, std::map<std::string, SymVar>& locals) {
    Stage s;
    s.out = ident("output buffer");
    locals.clear();
    auto local = [&](const Token& t) {
      if (locals.count(t.text)) fail(t, "loop variable " + t.text + " bound twice");
      SymVar v = SymVar::fresh(t.text);
      locals[t.text] = v;
      return v;
    };
    expect("[");
    comma_list("]", [&] { s.loop_vars.push_back(local(expect_kind(Tok::kIdent, "loop variable"))); });
    expect("=");
    if (is_kw("reduce")) {
      next();
      std::string comb = ident("combiner");
      if (comb == "sum") {
        s.combiner = Combiner::kSum;
      } else if (comb == "max") {
        s.combiner = Combiner::kMax;
      } else {
        fail(toks_[pos_ - 1], "expected sum or max");
      }
      expect("[");
      comma_list("]", [&] {
        SymVar v = local(expect_kind(Tok::kIdent, "reduction variable"));
        expect("<");
        s.reduce.push_back({v, normalize(sym_expr(r))});
      });
      expect_kw("init");
      s.init = parse_double();
      expect("{");
      s.body = scalar(r);
      expect("}");
    } else {
      s.body = scalar(r);
    }
    expect(";");
    locals.clear();
    return s;
  }

  ScalarExpr scalar(const Resolver& r) {
    ScalarExpr acc = scalar_term(r);
    while (true) {
      if (accept("+")) {
        acc = scalar_binary(ScalarOp::kAdd, acc, scalar_term(r));
      } else if (accept("-")) {
        acc = scalar_binary(ScalarOp::kSub, acc, scalar_term(r));
      } else {
        return acc;
      }
    }
  }

  ScalarExpr scalar_term(const Resolver& r) {
    ScalarExpr acc = scalar_unary_expr(r);
    while (true) {
      if (accept("*")) {
        acc = scalar_binary(ScalarOp::kMul, acc, scalar_unary_expr(r));
      } else if (accept("/")) {
        acc = scalar_binary(ScalarOp::kDiv, acc, scalar_unary_expr(r));
      } else {
        return acc;
      }
    }
  }

  ScalarExpr scalar_unary_expr(const Resolver& r) {
    if (is_punct("-")) {
      if (peek(1).kind == Tok::kNumber || (peek(1).kind == Tok::kIdent && peek(1).text == "inf")) {
        return scalar_const(parse_double());
      }
      next();
      return scalar_unary(ScalarOp::kNeg, scalar_unary_expr(r));
    }
    const Token& t = peek();
    if (t.kind == Tok::kNumber || is_kw("inf")) return scalar_const(parse_double());
    if (accept("(")) {
      ScalarExpr e = scalar(r);
      expect(")");
      return e;
    }
    if (t.kind != Tok::kIdent) fail(t, "expected scalar expression");
    std::string w = t.text;
    if (is_punct("[", 1)) {
      next();
      next();
      std::vector<SymExpr> idx;
      comma_list("]", [&] { idx.push_back(sym_expr(r)); });
      return scalar_read(w, std::move(idx));
    }
    if (is_punct("(", 1)) {
      next();
      next();
      if (w == "exp" || w == "relu") {
        ScalarExpr a = scalar(r);
        expect(")");
        return scalar_unary(w == "exp" ? ScalarOp::kExp : ScalarOp::kRelu, a);
      }
      if (w == "max" || w == "min") {
        ScalarExpr a = scalar(r);
        expect(",");
        ScalarExpr b = scalar(r);
        expect(")");
        return scalar_binary(w == "max" ? ScalarOp::kMax : ScalarOp::kMin, a, b);
      }
      if (w == "select") {
        SymExpr lhs = sym_expr(r);
        expect("<");
        SymExpr rhs = sym_expr(r);
        expect(",");
        ScalarExpr a = scalar(r);
        expect(",");
        ScalarExpr b = scalar(r);
        expect(")");
        return scalar_select(lhs, rhs, a, b);
      }
      fail(t, "unknown scalar function");
    }
    fail(t, "expected buffer read or scalar function");
  }

  std::vector<Token> toks_;
  std::string file_;
  size_t pos_ = 0;
};

}  // namespace

Module parse_module(std::string_view src, const std::string& file) {
  Lexer lex(src, file);
  Parser p(lex.run(), file);
  return p.run();
}

}  // namespace symrelax
