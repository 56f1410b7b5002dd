// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/annotation.h"

#include <algorithm>
#include <sstream>

namespace symrelax {

ShapeSpec ShapeSpec::known(std::vector<SymExpr> dims) {
  ShapeSpec s;
  s.kind = Kind::kKnown;
  for (auto& d : dims) d = normalize(d);
  s.dims = std::move(dims);
  return s;
}

ShapeSpec ShapeSpec::rank_only(int ndim) {
  ShapeSpec s;
  s.kind = Kind::kRankOnly;
  s.ndim = ndim;
  return s;
}

int ShapeSpec::rank() const {
  switch (kind) {
    case Kind::kKnown:
      return static_cast<int>(dims.size());
    case Kind::kRankOnly:
      return ndim;
    case Kind::kUnconstrained:
      return -1;
  }
  return -1;
}

Annotation Annotation::tensor(ShapeSpec shape, std::optional<DType> dtype) {
  Annotation a;
  a.kind_ = Kind::kTensor;
  a.shape_ = std::move(shape);
  a.dtype_ = dtype;
  return a;
}

Annotation Annotation::shape(ShapeSpec spec) {
  Annotation a;
  a.kind_ = Kind::kShape;
  a.shape_ = std::move(spec);
  return a;
}

Annotation Annotation::tuple(std::vector<Annotation> fields) {
  Annotation a;
  a.kind_ = Kind::kTuple;
  a.fields_ = std::move(fields);
  return a;
}

Annotation Annotation::callable(std::vector<Annotation> params, Annotation ret) {
  Annotation a;
  a.kind_ = Kind::kCallable;
  a.fields_ = std::move(params);
  a.ret_ = std::make_shared<const Annotation>(std::move(ret));
  return a;
}

const std::vector<SymExpr>* Annotation::known_dims() const {
  if ((kind_ == Kind::kTensor || kind_ == Kind::kShape) && shape_.is_known()) return &shape_.dims;
  return nullptr;
}

// ---------------------------------------------------------------------------

namespace {

Tri tri_and(Tri a, Tri b) {
  if (a == Tri::kNo || b == Tri::kNo) return Tri::kNo;
  if (a == Tri::kUnknown || b == Tri::kUnknown) return Tri::kUnknown;
  return Tri::kYes;
}

Tri shape_subsumes(const ShapeSpec& sub, const ShapeSpec& sup) {
  switch (sup.kind) {
    case ShapeSpec::Kind::kUnconstrained:
      return Tri::kYes;
    case ShapeSpec::Kind::kRankOnly: {
      int r = sub.rank();
      if (r < 0) return Tri::kUnknown;
      return r == sup.ndim ? Tri::kYes : Tri::kNo;
    }
    case ShapeSpec::Kind::kKnown:
      break;
  }
  int want = static_cast<int>(sup.dims.size());
  if (sub.kind == ShapeSpec::Kind::kUnconstrained) return Tri::kUnknown;
  if (sub.kind == ShapeSpec::Kind::kRankOnly) return sub.ndim == want ? Tri::kUnknown : Tri::kNo;
  if (static_cast<int>(sub.dims.size()) != want) return Tri::kNo;
  Tri out = Tri::kYes;
  for (int i = 0; i < want; ++i) {
    switch (prove_equal(sub.dims[i], sup.dims[i])) {
      case Provability::kProvablyEqual:
        break;
      case Provability::kProvablyUnequal:
        return Tri::kNo;
      case Provability::kUnknown:
        out = Tri::kUnknown;
        break;
    }
  }
  return out;
}

}  // namespace

Tri subsumes(const Annotation& sub, const Annotation& sup) {
  if (sup.is_object()) return Tri::kYes;
  if (sub.is_object()) return Tri::kUnknown;
  if (sub.kind() != sup.kind()) return Tri::kNo;
  switch (sup.kind()) {
    case Annotation::Kind::kTensor: {
      Tri dt = Tri::kYes;
      if (sup.dtype()) {
        if (!sub.dtype()) {
          dt = Tri::kUnknown;
        } else if (*sub.dtype() != *sup.dtype()) {
          dt = Tri::kNo;
        }
      }
      return tri_and(dt, shape_subsumes(sub.shape_spec(), sup.shape_spec()));
    }
    case Annotation::Kind::kShape:
      return shape_subsumes(sub.shape_spec(), sup.shape_spec());
    case Annotation::Kind::kTuple: {
      if (sub.fields().size() != sup.fields().size()) return Tri::kNo;
      Tri out = Tri::kYes;
      for (size_t i = 0; i < sup.fields().size(); ++i) out = tri_and(out, subsumes(sub.fields()[i], sup.fields()[i]));
      return out;
    }
    case Annotation::Kind::kCallable: {
      if (sub.fields().size() != sup.fields().size()) return Tri::kNo;
      Tri out = subsumes(sub.ret(), sup.ret());
      for (size_t i = 0; i < sup.fields().size(); ++i) out = tri_and(out, subsumes(sup.fields()[i], sub.fields()[i]));
      return out;
    }
    case Annotation::Kind::kObject:
      return Tri::kYes;
  }
  return Tri::kUnknown;
}

namespace {

ShapeSpec join_shape(const ShapeSpec& a, const ShapeSpec& b) {
  if (a.is_known() && b.is_known() && a.dims.size() == b.dims.size()) {
    bool all_eq = true;
    for (size_t i = 0; i < a.dims.size(); ++i) {
      if (prove_equal(a.dims[i], b.dims[i]) != Provability::kProvablyEqual) all_eq = false;
    }
    if (all_eq) return a;
  }
  int ra = a.rank();
  if (ra >= 0 && ra == b.rank()) return ShapeSpec::rank_only(ra);
  return ShapeSpec::unconstrained();
}

}  // namespace

Annotation join(const Annotation& a, const Annotation& b) {
  if (a.kind() != b.kind()) return Annotation::object();
  switch (a.kind()) {
    case Annotation::Kind::kTensor: {
      std::optional<DType> dt;
      if (a.dtype() && b.dtype() && *a.dtype() == *b.dtype()) dt = a.dtype();
      return Annotation::tensor(join_shape(a.shape_spec(), b.shape_spec()), dt);
    }
    case Annotation::Kind::kShape:
      return Annotation::shape(join_shape(a.shape_spec(), b.shape_spec()));
    case Annotation::Kind::kTuple: {
      if (a.fields().size() != b.fields().size()) return Annotation::object();
      std::vector<Annotation> f;
      for (size_t i = 0; i < a.fields().size(); ++i) f.push_back(join(a.fields()[i], b.fields()[i]));
      return Annotation::tuple(std::move(f));
    }
    case Annotation::Kind::kCallable:
      if (structurally_equal(a, b)) return a;
      return Annotation::object();
    case Annotation::Kind::kObject:
      return a;
  }
  return Annotation::object();
}

Annotation substitute(const Annotation& ann, const SymSubst& env) {
  switch (ann.kind()) {
    case Annotation::Kind::kTensor:
    case Annotation::Kind::kShape: {
      ShapeSpec s = ann.shape_spec();
      for (auto& d : s.dims) d = substitute(d, env);
      return ann.is_tensor() ? Annotation::tensor(std::move(s), ann.dtype()) : Annotation::shape(std::move(s));
    }
    case Annotation::Kind::kTuple: {
      std::vector<Annotation> f;
      for (const auto& x : ann.fields()) f.push_back(substitute(x, env));
      return Annotation::tuple(std::move(f));
    }
    case Annotation::Kind::kCallable: {
      std::vector<Annotation> f;
      for (const auto& x : ann.fields()) f.push_back(substitute(x, env));
      return Annotation::callable(std::move(f), substitute(ann.ret(), env));
    }
    case Annotation::Kind::kObject:
      return ann;
  }
  return ann;
}

namespace {

void collect(const Annotation& ann, std::vector<SymVar>& out) {
  if (const auto* dims = ann.known_dims()) {
    for (const auto& d : *dims) {
      for (const auto& v : free_vars(d)) {
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
      }
    }
  }
  for (const auto& f : ann.fields()) collect(f, out);
  if (ann.kind() == Annotation::Kind::kCallable) collect(ann.ret(), out);
}

bool shape_equal(const ShapeSpec& a, const ShapeSpec& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == ShapeSpec::Kind::kRankOnly) return a.ndim == b.ndim;
  if (a.kind == ShapeSpec::Kind::kKnown) {
    if (a.dims.size() != b.dims.size()) return false;
    for (size_t i = 0; i < a.dims.size(); ++i) {
      // Compare by rendered text so that annotations from separate parses
      // (distinct SymVar ids, same names) compare equal.
      if (to_string(a.dims[i]) != to_string(b.dims[i])) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<SymVar> free_vars(const Annotation& ann) {
  std::vector<SymVar> out;
  collect(ann, out);
  return out;
}

bool structurally_equal(const Annotation& a, const Annotation& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Annotation::Kind::kTensor:
      return a.dtype() == b.dtype() && shape_equal(a.shape_spec(), b.shape_spec());
    case Annotation::Kind::kShape:
      return shape_equal(a.shape_spec(), b.shape_spec());
    case Annotation::Kind::kTuple:
    case Annotation::Kind::kCallable: {
      if (a.fields().size() != b.fields().size()) return false;
      for (size_t i = 0; i < a.fields().size(); ++i) {
        if (!structurally_equal(a.fields()[i], b.fields()[i])) return false;
      }
      if (a.kind() == Annotation::Kind::kCallable) return structurally_equal(a.ret(), b.ret());
      return true;
    }
    case Annotation::Kind::kObject:
      return true;
  }
  return false;
}

namespace {

void print_shape_body(std::ostream& os, const ShapeSpec& s, const std::optional<DType>& dtype) {
  bool any = false;
  switch (s.kind) {
    case ShapeSpec::Kind::kKnown:
      os << '(';
      for (size_t i = 0; i < s.dims.size(); ++i) {
        if (i) os << ", ";
        os << to_string(s.dims[i]);
      }
      if (s.dims.size() == 1) os << ',';
      os << ')';
      any = true;
      break;
    case ShapeSpec::Kind::kRankOnly:
      os << "ndim=" << s.ndim;
      any = true;
      break;
    case ShapeSpec::Kind::kUnconstrained:
      break;
  }
  if (dtype) {
    if (any) os << ", ";
    os << dtype_name(*dtype);
  }
}

void print(std::ostream& os, const Annotation& a) {
  switch (a.kind()) {
    case Annotation::Kind::kTensor:
      os << "Tensor";
      if (a.shape_spec().kind != ShapeSpec::Kind::kUnconstrained || a.dtype()) {
        os << '(';
        print_shape_body(os, a.shape_spec(), a.dtype());
        os << ')';
      }
      return;
    case Annotation::Kind::kShape:
      os << "Shape";
      if (a.shape_spec().kind != ShapeSpec::Kind::kUnconstrained) {
        os << '(';
        print_shape_body(os, a.shape_spec(), std::nullopt);
        os << ')';
      }
      return;
    case Annotation::Kind::kTuple:
      os << "Tuple(";
      for (size_t i = 0; i < a.fields().size(); ++i) {
        if (i) os << ", ";
        print(os, a.fields()[i]);
      }
      os << ')';
      return;
    case Annotation::Kind::kCallable:
      os << "Callable((";
      for (size_t i = 0; i < a.fields().size(); ++i) {
        if (i) os << ", ";
        print(os, a.fields()[i]);
      }
      os << "), ";
      print(os, a.ret());
      os << ')';
      return;
    case Annotation::Kind::kObject:
      os << "Object";
      return;
  }
}

}  // namespace

std::string to_string(const Annotation& ann) {
  std::ostringstream os;
  print(os, ann);
  return os.str();
}

}  // namespace symrelax
