// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Integer symbolic expressions used for tensor dimensions.
//
// A SymExpr is an immutable tree over symbolic variables and int64
// constants. `normalize` rewrites a tree into a canonical sum of products
// (floordiv/mod/max/min subtrees are opaque atoms), which makes syntactic
// equality a sound equality test.

#ifndef SYMRELAX_SYMEXPR_H_
#define SYMRELAX_SYMEXPR_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace symrelax {

class SymVar {
 public:
  SymVar() = default;
  SymVar(std::string name, int64_t id) : name_(std::move(name)), id_(id) {}

  // Allocates a process-unique id.
  static SymVar fresh(std::string name);

  const std::string& name() const { return name_; }
  int64_t id() const { return id_; }

  friend bool operator==(const SymVar& a, const SymVar& b) { return a.id_ == b.id_; }
  friend auto operator<=>(const SymVar& a, const SymVar& b) { return a.id_ <=> b.id_; }

 private:
  std::string name_;
  int64_t id_ = -1;
};

enum class Provability { kProvablyEqual, kProvablyUnequal, kUnknown };

const char* provability_name(Provability p);

class SymExpr {
 public:
  enum class Kind : uint8_t { kVar, kConst, kAdd, kSub, kMul, kFloorDiv, kMod, kMax, kMin };

  SymExpr();  // constant 0
  SymExpr(int64_t value);  // NOLINT(google-explicit-constructor)
  SymExpr(int value) : SymExpr(static_cast<int64_t>(value)) {}  // NOLINT
  SymExpr(const SymVar& var);  // NOLINT(google-explicit-constructor)

  static SymExpr binary(Kind kind, SymExpr lhs, SymExpr rhs);

  Kind kind() const;
  bool is_const() const { return kind() == Kind::kConst; }
  bool is_var() const { return kind() == Kind::kVar; }
  int64_t value() const;
  const SymVar& var() const;
  const SymExpr& lhs() const;
  const SymExpr& rhs() const;

  // Constant value if this is a literal constant.
  std::optional<int64_t> as_const() const;

 private:
  struct Node;
  explicit SymExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

SymExpr operator+(const SymExpr& a, const SymExpr& b);
SymExpr operator-(const SymExpr& a, const SymExpr& b);
SymExpr operator*(const SymExpr& a, const SymExpr& b);
SymExpr floordiv(const SymExpr& a, const SymExpr& b);
SymExpr mod(const SymExpr& a, const SymExpr& b);
SymExpr max(const SymExpr& a, const SymExpr& b);
SymExpr min(const SymExpr& a, const SymExpr& b);

using SymSubst = std::map<SymVar, SymExpr>;
using SymValues = std::map<SymVar, int64_t>;

SymExpr normalize(const SymExpr& e);

// Total order over trees; structural equality iff compare == 0.
int compare(const SymExpr& a, const SymExpr& b);
bool structurally_equal(const SymExpr& a, const SymExpr& b);

Provability prove_equal(const SymExpr& a, const SymExpr& b);

// Replaces mapped variables and normalizes the result.
SymExpr substitute(const SymExpr& e, const SymSubst& env);

// Evaluates with floor division (rounding toward -inf) and mod taking the
// sign of the divisor. Throws UnboundSymbol, DivisionByZero, or Overflow.
int64_t evaluate(const SymExpr& e, const SymValues& env);
int64_t evaluate(const SymExpr& e,
                 const std::function<std::optional<int64_t>(const SymVar&)>& lookup);

// Variables in order of first occurrence (left to right), deduplicated.
std::vector<SymVar> free_vars(const SymExpr& e);
bool contains_var(const SymExpr& e, const SymVar& v);

// Linear decomposition `coeff * v + rest` where coeff is a nonzero constant
// and `rest` does not mention `v`; nullopt if `e` is not linear in `v`.
struct LinearForm {
  int64_t coeff;
  SymExpr rest;
};
std::optional<LinearForm> linear_in(const SymExpr& e, const SymVar& v);

// Exact division of a normalized polynomial by a nonzero constant; nullopt
// if some coefficient is not divisible.
std::optional<SymExpr> exact_div(const SymExpr& e, int64_t divisor);

// Sound interval bound assuming each variable lies in [lo(v), hi(v)].
struct Interval {
  int64_t lo;
  int64_t hi;
};
std::optional<Interval> bound_interval(
    const SymExpr& e, const std::function<std::optional<Interval>(const SymVar&)>& var_range);

// Infix rendering: `4*n + 1`, `floordiv(i, 4)`.
std::string to_string(const SymExpr& e);
// Like to_string but variables are tagged with ids; a stable map key.
std::string key_of(const SymExpr& e);

// Checked int64 helpers shared by the runtime.
int64_t checked_add(int64_t a, int64_t b);
int64_t checked_sub(int64_t a, int64_t b);
int64_t checked_mul(int64_t a, int64_t b);
int64_t floordiv_i64(int64_t a, int64_t b);
int64_t floormod_i64(int64_t a, int64_t b);

}  // namespace symrelax

#endif  // SYMRELAX_SYMEXPR_H_
