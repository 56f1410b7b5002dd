// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Structural annotations attached to every graph-level value.

#ifndef SYMRELAX_ANNOTATION_H_
#define SYMRELAX_ANNOTATION_H_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "symrelax/ndarray.h"
#include "symrelax/symexpr.h"

namespace symrelax {

// Known dims, rank only, or nothing at all.
struct ShapeSpec {
  enum class Kind { kKnown, kRankOnly, kUnconstrained };

  Kind kind = Kind::kUnconstrained;
  std::vector<SymExpr> dims;  // kKnown only; normalized
  int ndim = -1;              // kRankOnly only

  static ShapeSpec known(std::vector<SymExpr> dims);
  static ShapeSpec rank_only(int ndim);
  static ShapeSpec unconstrained() { return {}; }

  bool is_known() const { return kind == Kind::kKnown; }
  // Rank if determined, else -1.
  int rank() const;
};

// Three-valued answer for static checks.
enum class Tri { kYes, kNo, kUnknown };

class Annotation {
 public:
  enum class Kind { kTensor, kShape, kTuple, kCallable, kObject };

  Annotation() = default;  // Object

  static Annotation tensor(ShapeSpec shape, std::optional<DType> dtype);
  static Annotation tensor(std::vector<SymExpr> dims, DType dtype) {
    return tensor(ShapeSpec::known(std::move(dims)), dtype);
  }
  static Annotation shape(ShapeSpec spec);
  static Annotation tuple(std::vector<Annotation> fields);
  static Annotation callable(std::vector<Annotation> params, Annotation ret);
  static Annotation object() { return {}; }

  Kind kind() const { return kind_; }
  bool is_tensor() const { return kind_ == Kind::kTensor; }
  bool is_shape() const { return kind_ == Kind::kShape; }
  bool is_tuple() const { return kind_ == Kind::kTuple; }
  bool is_object() const { return kind_ == Kind::kObject; }

  const ShapeSpec& shape_spec() const { return shape_; }
  const std::optional<DType>& dtype() const { return dtype_; }
  // Tuple elements or callable parameters.
  const std::vector<Annotation>& fields() const { return fields_; }
  const Annotation& ret() const { return *ret_; }

  // Known dims of a Tensor or Shape annotation, else nullptr.
  const std::vector<SymExpr>* known_dims() const;

 private:
  Kind kind_ = Kind::kObject;
  ShapeSpec shape_;
  std::optional<DType> dtype_;
  std::vector<Annotation> fields_;
  std::shared_ptr<const Annotation> ret_;
};

// Whether every value described by `sub` is also described by `sup`.
// Unknown means it depends on runtime symbolic values.
Tri subsumes(const Annotation& sub, const Annotation& sup);

// Least upper bound used to join If arms.
Annotation join(const Annotation& a, const Annotation& b);

Annotation substitute(const Annotation& ann, const SymSubst& env);
std::vector<SymVar> free_vars(const Annotation& ann);

bool structurally_equal(const Annotation& a, const Annotation& b);

// Surface syntax: `Tensor((n, 4), f32)`, `Shape(ndim=2)`, `Object`.
std::string to_string(const Annotation& ann);

}  // namespace symrelax

#endif  // SYMRELAX_ANNOTATION_H_
