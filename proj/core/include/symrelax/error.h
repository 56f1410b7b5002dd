// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SYMRELAX_ERROR_H_
#define SYMRELAX_ERROR_H_

#include <stdexcept>
#include <string>

namespace symrelax {

struct SourceSpan {
  std::string file;
  int line = 0;
  int col = 0;
  int end_line = 0;
  int end_col = 0;

  bool valid() const { return line > 0; }
  std::string to_string() const;
};

enum class ErrorKind {
  kSyntax,
  kDuplicateDefinition,
  kUnknownAnnotation,
  kUnboundSymbol,
  kDivisionByZero,
  kOverflow,
  kAnnotationConflict,
  kUnknownOperator,
  kArityMismatch,
  kNotLowered,
  kUnsupportedOp,
  kNeedsMatchCast,
  kShapeMismatch,
  kOutOfBoundsRead,
  kInvalidCustomGroup,
  kNonStraightLineGroup,
  kNotPlanned,
  kUnresolvedExtern,
  kShapeCheckFailed,
  kRuntime,
  kUsage,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, SourceSpan span = {});

  ErrorKind kind() const { return kind_; }
  const SourceSpan& span() const { return span_; }
  // Message without the kind prefix or span.
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  SourceSpan span_;
  std::string detail_;
};

// Raised by runtime shape checks. `site` is the stable check-site id
// (e.g. "main/match_cast/z" or "main/param/x").
class ShapeCheckFailed : public Error {
 public:
  ShapeCheckFailed(std::string site, std::string expected, std::string actual);

  const std::string& site() const { return site_; }
  const std::string& expected() const { return expected_; }
  const std::string& actual() const { return actual_; }

 private:
  std::string site_;
  std::string expected_;
  std::string actual_;
};

}  // namespace symrelax

#endif  // SYMRELAX_ERROR_H_
