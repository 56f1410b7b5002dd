// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/symexpr.h"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <limits>
#include <sstream>

#include "symrelax/error.h"

namespace symrelax {

struct SymExpr::Node {
  Kind kind;
  int64_t value = 0;
  SymVar var;
  SymExpr lhs;
  SymExpr rhs;
};

namespace {

std::atomic<int64_t> g_next_sym_id{1};

}  // namespace

SymVar SymVar::fresh(std::string name) {
  return SymVar(std::move(name), g_next_sym_id.fetch_add(1, std::memory_order_relaxed));
}

const char* provability_name(Provability p) {
  switch (p) {
    case Provability::kProvablyEqual:
      return "ProvablyEqual";
    case Provability::kProvablyUnequal:
      return "ProvablyUnequal";
    case Provability::kUnknown:
      return "Unknown";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Construction and accessors.

SymExpr::SymExpr() : node_(nullptr) {}

SymExpr::SymExpr(int64_t value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::kConst;
  n->value = value;
  node_ = std::move(n);
}

SymExpr::SymExpr(const SymVar& var) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::kVar;
  n->var = var;
  node_ = std::move(n);
}

SymExpr SymExpr::binary(Kind kind, SymExpr lhs, SymExpr rhs) {
  assert(kind != Kind::kVar && kind != Kind::kConst);
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return SymExpr(std::shared_ptr<const Node>(std::move(n)));
}

SymExpr::Kind SymExpr::kind() const { return node_ ? node_->kind : Kind::kConst; }

int64_t SymExpr::value() const { return node_ ? node_->value : 0; }

const SymVar& SymExpr::var() const {
  static const SymVar kNone;
  return node_ ? node_->var : kNone;
}

const SymExpr& SymExpr::lhs() const {
  static const SymExpr kZero;
  return node_ ? node_->lhs : kZero;
}

const SymExpr& SymExpr::rhs() const {
  static const SymExpr kZero;
  return node_ ? node_->rhs : kZero;
}

std::optional<int64_t> SymExpr::as_const() const {
  if (is_const()) return value();
  return std::nullopt;
}

SymExpr operator+(const SymExpr& a, const SymExpr& b) {
  return SymExpr::binary(SymExpr::Kind::kAdd, a, b);
}
SymExpr operator-(const SymExpr& a, const SymExpr& b) {
  return SymExpr::binary(SymExpr::Kind::kSub, a, b);
}
SymExpr operator*(const SymExpr& a, const SymExpr& b) {
  return SymExpr::binary(SymExpr::Kind::kMul, a, b);
}
SymExpr floordiv(const SymExpr& a, const SymExpr& b) {
  return SymExpr::binary(SymExpr::Kind::kFloorDiv, a, b);
}
SymExpr mod(const SymExpr& a, const SymExpr& b) {
  return SymExpr::binary(SymExpr::Kind::kMod, a, b);
}
SymExpr max(const SymExpr& a, const SymExpr& b) {
  return SymExpr::binary(SymExpr::Kind::kMax, a, b);
}
SymExpr min(const SymExpr& a, const SymExpr& b) {
  return SymExpr::binary(SymExpr::Kind::kMin, a, b);
}

// ---------------------------------------------------------------------------
// Checked arithmetic.

int64_t checked_add(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorKind::kOverflow, "int64 overflow in addition");
  return r;
}

int64_t checked_sub(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_sub_overflow(a, b, &r)) throw Error(ErrorKind::kOverflow, "int64 overflow in subtraction");
  return r;
}

int64_t checked_mul(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorKind::kOverflow, "int64 overflow in multiplication");
  return r;
}

int64_t floordiv_i64(int64_t a, int64_t b) {
  if (b == 0) throw Error(ErrorKind::kDivisionByZero, "floordiv by zero");
  if (a == std::numeric_limits<int64_t>::min() && b == -1) {
    throw Error(ErrorKind::kOverflow, "int64 overflow in floordiv");
  }
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int64_t floormod_i64(int64_t a, int64_t b) {
  if (b == 0) throw Error(ErrorKind::kDivisionByZero, "mod by zero");
  if (b == -1) return 0;
  int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

// ---------------------------------------------------------------------------
// Ordering.

namespace {

int kind_rank(SymExpr::Kind k) { return static_cast<int>(k); }

}  // namespace

int compare(const SymExpr& a, const SymExpr& b) {
  // Vars sort first, then constants, then compound nodes by kind.
  if (a.kind() != b.kind()) return kind_rank(a.kind()) < kind_rank(b.kind()) ? -1 : 1;
  switch (a.kind()) {
    case SymExpr::Kind::kVar:
      if (a.var().id() == b.var().id()) return 0;
      return a.var().id() < b.var().id() ? -1 : 1;
    case SymExpr::Kind::kConst:
      if (a.value() == b.value()) return 0;
      return a.value() < b.value() ? -1 : 1;
    default: {
      int c = compare(a.lhs(), b.lhs());
      if (c != 0) return c;
      return compare(a.rhs(), b.rhs());
    }
  }
}

bool structurally_equal(const SymExpr& a, const SymExpr& b) { return compare(a, b) == 0; }

// ---------------------------------------------------------------------------
// Polynomial normal form.

namespace {

using Monomial = std::vector<SymExpr>;  // sorted atoms, repeated for powers

struct MonoLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
      int c = compare(a[i], b[i]);
      if (c != 0) return c < 0;
    }
    return a.size() < b.size();
  }
};

using Poly = std::map<Monomial, int64_t, MonoLess>;

void poly_add_term(Poly& p, const Monomial& m, int64_t c) {
  if (c == 0) return;
  auto it = p.find(m);
  if (it == p.end()) {
    p.emplace(m, c);
    return;
  }
  it->second = checked_add(it->second, c);
  if (it->second == 0) p.erase(it);
}

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ma, ca] : a) {
    for (const auto& [mb, cb] : b) {
      Monomial m;
      m.reserve(ma.size() + mb.size());
      std::merge(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(m),
                 [](const SymExpr& x, const SymExpr& y) { return compare(x, y) < 0; });
      poly_add_term(out, m, checked_mul(ca, cb));
    }
  }
  return out;
}

Poly to_poly(const SymExpr& e);
SymExpr from_poly(const Poly& p);

SymExpr normalize_impl(const SymExpr& e) { return from_poly(to_poly(e)); }

// Simplifies an opaque node; result may be a constant, a non-opaque
// polynomial, or an opaque node with normalized children.
SymExpr simplify_opaque(const SymExpr& e) {
  SymExpr a = normalize_impl(e.lhs());
  SymExpr b = normalize_impl(e.rhs());
  auto ca = a.as_const();
  auto cb = b.as_const();
  switch (e.kind()) {
    case SymExpr::Kind::kFloorDiv:
      if (ca && cb && *cb != 0) return SymExpr(floordiv_i64(*ca, *cb));
      if (cb && *cb == 1) return a;
      if (ca && *ca == 0 && !(cb && *cb == 0)) return SymExpr(0);
      return floordiv(a, b);
    case SymExpr::Kind::kMod:
      if (ca && cb && *cb != 0) return SymExpr(floormod_i64(*ca, *cb));
      if (cb && (*cb == 1 || *cb == -1)) return SymExpr(0);
      return mod(a, b);
    case SymExpr::Kind::kMax:
      if (ca && cb) return SymExpr(std::max(*ca, *cb));
      if (compare(a, b) == 0) return a;
      // Commutative: order operands canonically.
      return compare(a, b) < 0 ? max(a, b) : max(b, a);
    case SymExpr::Kind::kMin:
      if (ca && cb) return SymExpr(std::min(*ca, *cb));
      if (compare(a, b) == 0) return a;
      return compare(a, b) < 0 ? min(a, b) : min(b, a);
    default:
      break;
  }
  return e;
}

bool is_opaque(SymExpr::Kind k) {
  return k == SymExpr::Kind::kFloorDiv || k == SymExpr::Kind::kMod || k == SymExpr::Kind::kMax ||
         k == SymExpr::Kind::kMin;
}

Poly to_poly(const SymExpr& e) {
  Poly p;
  switch (e.kind()) {
    case SymExpr::Kind::kConst:
      poly_add_term(p, {}, e.value());
      return p;
    case SymExpr::Kind::kVar:
      poly_add_term(p, {e}, 1);
      return p;
    case SymExpr::Kind::kAdd: {
      p = to_poly(e.lhs());
      for (const auto& [m, c] : to_poly(e.rhs())) poly_add_term(p, m, c);
      return p;
    }
    case SymExpr::Kind::kSub: {
      p = to_poly(e.lhs());
      for (const auto& [m, c] : to_poly(e.rhs())) poly_add_term(p, m, checked_sub(0, c));
      return p;
    }
    case SymExpr::Kind::kMul:
      return poly_mul(to_poly(e.lhs()), to_poly(e.rhs()));
    default: {
      SymExpr s = simplify_opaque(e);
      if (is_opaque(s.kind())) {
        poly_add_term(p, {s}, 1);
        return p;
      }
      return to_poly(s);
    }
  }
}

SymExpr product_of(const Monomial& m) {
  SymExpr acc = m.front();
  for (size_t i = 1; i < m.size(); ++i) acc = acc * m[i];
  return acc;
}

SymExpr term_of(const Monomial& m, int64_t c) {
  if (c == 1) return product_of(m);
  return SymExpr(c) * product_of(m);
}

SymExpr from_poly(const Poly& p) {
  std::optional<SymExpr> acc;
  int64_t constant = 0;
  // Positive terms first so that `i - n` prints as written.
  for (bool positive : {true, false}) {
    for (const auto& [m, c] : p) {
      if (m.empty()) {
        constant = c;
        continue;
      }
      if ((c > 0) != positive) continue;
      if (!acc) {
        acc = term_of(m, c);
      } else if (c < 0) {
        acc = *acc - term_of(m, checked_sub(0, c));
      } else {
        acc = *acc + term_of(m, c);
      }
    }
  }
  if (!acc) return SymExpr(constant);
  if (constant > 0) return *acc + SymExpr(constant);
  if (constant < 0) return *acc - SymExpr(checked_sub(0, constant));
  return *acc;
}

}  // namespace

SymExpr normalize(const SymExpr& e) { return normalize_impl(e); }

Provability prove_equal(const SymExpr& a, const SymExpr& b) {
  SymExpr d = normalize(a - b);
  if (auto c = d.as_const()) {
    return *c == 0 ? Provability::kProvablyEqual : Provability::kProvablyUnequal;
  }
  return Provability::kUnknown;
}

// ---------------------------------------------------------------------------
// Substitution, evaluation, variables.

namespace {

SymExpr substitute_raw(const SymExpr& e, const SymSubst& env) {
  switch (e.kind()) {
    case SymExpr::Kind::kConst:
      return e;
    case SymExpr::Kind::kVar: {
      auto it = env.find(e.var());
      return it == env.end() ? e : it->second;
    }
    default:
      return SymExpr::binary(e.kind(), substitute_raw(e.lhs(), env), substitute_raw(e.rhs(), env));
  }
}

void collect_vars(const SymExpr& e, std::vector<SymVar>& out) {
  switch (e.kind()) {
    case SymExpr::Kind::kConst:
      return;
    case SymExpr::Kind::kVar:
      if (std::find(out.begin(), out.end(), e.var()) == out.end()) out.push_back(e.var());
      return;
    default:
      collect_vars(e.lhs(), out);
      collect_vars(e.rhs(), out);
  }
}

}  // namespace

SymExpr substitute(const SymExpr& e, const SymSubst& env) {
  if (env.empty()) return normalize(e);
  return normalize(substitute_raw(e, env));
}

int64_t evaluate(const SymExpr& e,
                 const std::function<std::optional<int64_t>(const SymVar&)>& lookup) {
  switch (e.kind()) {
    case SymExpr::Kind::kConst:
      return e.value();
    case SymExpr::Kind::kVar: {
      auto v = lookup(e.var());
      if (!v) throw Error(ErrorKind::kUnboundSymbol, "unbound symbolic variable '" + e.var().name() + "'");
      return *v;
    }
    default:
      break;
  }
  int64_t a = evaluate(e.lhs(), lookup);
  int64_t b = evaluate(e.rhs(), lookup);
  switch (e.kind()) {
    case SymExpr::Kind::kAdd:
      return checked_add(a, b);
    case SymExpr::Kind::kSub:
      return checked_sub(a, b);
    case SymExpr::Kind::kMul:
      return checked_mul(a, b);
    case SymExpr::Kind::kFloorDiv:
      return floordiv_i64(a, b);
    case SymExpr::Kind::kMod:
      return floormod_i64(a, b);
    case SymExpr::Kind::kMax:
      return std::max(a, b);
    case SymExpr::Kind::kMin:
      return std::min(a, b);
    default:
      break;
  }
  return 0;
}

int64_t evaluate(const SymExpr& e, const SymValues& env) {
  return evaluate(e, [&env](const SymVar& v) -> std::optional<int64_t> {
    auto it = env.find(v);
    if (it == env.end()) return std::nullopt;
    return it->second;
  });
}

std::vector<SymVar> free_vars(const SymExpr& e) {
  std::vector<SymVar> out;
  collect_vars(e, out);
  return out;
}

bool contains_var(const SymExpr& e, const SymVar& v) {
  switch (e.kind()) {
    case SymExpr::Kind::kConst:
      return false;
    case SymExpr::Kind::kVar:
      return e.var() == v;
    default:
      return contains_var(e.lhs(), v) || contains_var(e.rhs(), v);
  }
}

std::optional<LinearForm> linear_in(const SymExpr& e, const SymVar& v) {
  Poly p = to_poly(e);
  int64_t coeff = 0;
  Poly rest;
  for (const auto& [m, c] : p) {
    bool has = false;
    for (const auto& atom : m) {
      if (contains_var(atom, v)) has = true;
    }
    if (!has) {
      poly_add_term(rest, m, c);
      continue;
    }
    if (m.size() == 1 && m[0].is_var() && m[0].var() == v) {
      coeff = checked_add(coeff, c);
      continue;
    }
    return std::nullopt;
  }
  if (coeff == 0) return std::nullopt;
  return LinearForm{coeff, from_poly(rest)};
}

std::optional<SymExpr> exact_div(const SymExpr& e, int64_t divisor) {
  if (divisor == 0) return std::nullopt;
  Poly p = to_poly(e);
  Poly q;
  for (const auto& [m, c] : p) {
    if (c % divisor != 0) return std::nullopt;
    poly_add_term(q, m, c / divisor);
  }
  return from_poly(q);
}

std::optional<Interval> bound_interval(
    const SymExpr& e, const std::function<std::optional<Interval>(const SymVar&)>& var_range) {
  switch (e.kind()) {
    case SymExpr::Kind::kConst:
      return Interval{e.value(), e.value()};
    case SymExpr::Kind::kVar:
      return var_range(e.var());
    default:
      break;
  }
  auto a = bound_interval(e.lhs(), var_range);
  auto b = bound_interval(e.rhs(), var_range);
  if (!a || !b) return std::nullopt;
  try {
    switch (e.kind()) {
      case SymExpr::Kind::kAdd:
        return Interval{checked_add(a->lo, b->lo), checked_add(a->hi, b->hi)};
      case SymExpr::Kind::kSub:
        return Interval{checked_sub(a->lo, b->hi), checked_sub(a->hi, b->lo)};
      case SymExpr::Kind::kMul: {
        int64_t c[4] = {checked_mul(a->lo, b->lo), checked_mul(a->lo, b->hi), checked_mul(a->hi, b->lo),
                        checked_mul(a->hi, b->hi)};
        return Interval{*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
      }
      case SymExpr::Kind::kFloorDiv: {
        if (b->lo <= 0) return std::nullopt;
        int64_t c[4] = {floordiv_i64(a->lo, b->lo), floordiv_i64(a->lo, b->hi), floordiv_i64(a->hi, b->lo),
                        floordiv_i64(a->hi, b->hi)};
        return Interval{*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
      }
      case SymExpr::Kind::kMod:
        if (b->lo <= 0) return std::nullopt;
        if (a->lo >= 0 && a->hi < b->lo) return *a;
        return Interval{0, b->hi - 1};
      case SymExpr::Kind::kMax:
        return Interval{std::max(a->lo, b->lo), std::max(a->hi, b->hi)};
      case SymExpr::Kind::kMin:
        return Interval{std::min(a->lo, b->lo), std::min(a->hi, b->hi)};
      default:
        break;
    }
  } catch (const Error&) {
    return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Printing.

namespace {

int precedence(const SymExpr& e) {
  switch (e.kind()) {
    case SymExpr::Kind::kAdd:
    case SymExpr::Kind::kSub:
      return 1;
    case SymExpr::Kind::kMul:
      return 2;
    default:
      return 3;
  }
}

void print(std::ostream& os, const SymExpr& e, int ctx_prec, bool leftmost, bool with_ids) {
  switch (e.kind()) {
    case SymExpr::Kind::kConst:
      if (e.value() < 0 && !leftmost) {
        os << '(' << e.value() << ')';
      } else {
        os << e.value();
      }
      return;
    case SymExpr::Kind::kVar:
      os << e.var().name();
      if (with_ids) os << '#' << e.var().id();
      return;
    case SymExpr::Kind::kFloorDiv:
    case SymExpr::Kind::kMod:
    case SymExpr::Kind::kMax:
    case SymExpr::Kind::kMin: {
      const char* fn = e.kind() == SymExpr::Kind::kFloorDiv ? "floordiv"
                       : e.kind() == SymExpr::Kind::kMod    ? "mod"
                       : e.kind() == SymExpr::Kind::kMax    ? "max"
                                                            : "min";
      os << fn << '(';
      print(os, e.lhs(), 0, true, with_ids);
      os << ", ";
      print(os, e.rhs(), 0, true, with_ids);
      os << ')';
      return;
    }
    default:
      break;
  }
  int p = precedence(e);
  bool paren = p < ctx_prec;
  if (paren) {
    os << '(';
    leftmost = true;
  }
  const char* op = e.kind() == SymExpr::Kind::kAdd ? " + " : e.kind() == SymExpr::Kind::kSub ? " - " : "*";
  print(os, e.lhs(), p, leftmost, with_ids);
  os << op;
  print(os, e.rhs(), p + 1, false, with_ids);
  if (paren) os << ')';
}

}  // namespace

std::string to_string(const SymExpr& e) {
  std::ostringstream os;
  print(os, e, 0, true, false);
  return os.str();
}

std::string key_of(const SymExpr& e) {
  std::ostringstream os;
  print(os, e, 0, true, true);
  return os.str();
}

}  // namespace symrelax
