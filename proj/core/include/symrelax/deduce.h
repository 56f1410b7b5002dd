// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward annotation deduction with dynamic-check fallback.

#ifndef SYMRELAX_DEDUCE_H_
#define SYMRELAX_DEDUCE_H_

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "symrelax/annotation.h"
#include "symrelax/ir.h"

namespace symrelax {

// A place where a static check came back Unknown and must run at run time.
struct CheckSite {
  enum class Kind {
    kMatchCast,   // `v = match_cast(e, A)`: e must satisfy A
    kAnnotation,  // `v: A = e`: e must satisfy A
    kCallArg,     // operand `arg_index` of v's call must satisfy `expected`
    kOpResult,    // operator fallback: v must satisfy `expected`
    kReturn,      // the function result must satisfy the declared return
  };

  Kind kind = Kind::kAnnotation;
  std::string id;  // "fn/match_cast/v", "fn/annot/v", "fn/call/v/arg1", "fn/op/v", "fn/return"
  std::string function;
  std::string var;
  int arg_index = -1;
  Annotation expected;
  Annotation actual;
  SourceSpan span;

  // "expected A, got B [id]"
  std::string describe() const;
};

struct RuleResult {
  Annotation ann;
  // Operands whose annotation must be verified at run time.
  std::vector<std::pair<int, Annotation>> arg_checks;
  // Set when an undecidable constraint coarsened the result.
  bool fallback = false;
};

// Registered deduction rule for one graph operator. Shape arguments (reshape)
// are read through their Shape annotation. Throws AnnotationConflict,
// UnknownOperator, ArityMismatch.
RuleResult deduce_op(const std::string& op, std::span<const Annotation> args, const OpAttrs& attrs);

struct CallResult {
  Annotation ret;
  std::vector<std::pair<int, Annotation>> arg_checks;
  SymSubst subst;  // callee variable -> caller expression
};

// Signature-only deduction at a call boundary. Throws ArityMismatch and
// AnnotationConflict.
CallResult deduce_call(const Annotation& callee_sig, std::span<const Annotation> arg_anns);

struct DeducedFunction {
  Function func;  // every Bind carries an annotation; ret_ann filled in
  std::vector<CheckSite> sites;
};

DeducedFunction deduce_function(const Module& m, const std::string& name);

struct DeducedModule {
  Module module;
  std::vector<CheckSite> sites;
};

DeducedModule deduce_module(const Module& m);

// Notes for PrintOptions placing each site before its binding.
std::multimap<std::string, std::string> site_notes(const std::vector<CheckSite>& sites);

}  // namespace symrelax

#endif  // SYMRELAX_DEDUCE_H_
