// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/error.h"

namespace symrelax {

std::string SourceSpan::to_string() const {
  std::string out = file.empty() ? "<input>" : file;
  if (valid()) out += ":" + std::to_string(line) + ":" + std::to_string(col);
  return out;
}

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSyntax: return "SyntaxError";
    case ErrorKind::kDuplicateDefinition: return "DuplicateDefinition";
    case ErrorKind::kUnknownAnnotation: return "UnknownAnnotation";
    case ErrorKind::kUnboundSymbol: return "UnboundSymbol";
    case ErrorKind::kDivisionByZero: return "DivisionByZero";
    case ErrorKind::kOverflow: return "Overflow";
    case ErrorKind::kAnnotationConflict: return "AnnotationConflict";
    case ErrorKind::kUnknownOperator: return "UnknownOperator";
    case ErrorKind::kArityMismatch: return "ArityMismatch";
    case ErrorKind::kNotLowered: return "NotLowered";
    case ErrorKind::kUnsupportedOp: return "UnsupportedOp";
    case ErrorKind::kNeedsMatchCast: return "NeedsMatchCast";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kOutOfBoundsRead: return "OutOfBoundsRead";
    case ErrorKind::kInvalidCustomGroup: return "InvalidCustomGroup";
    case ErrorKind::kNonStraightLineGroup: return "NonStraightLineGroup";
    case ErrorKind::kNotPlanned: return "NotPlanned";
    case ErrorKind::kUnresolvedExtern: return "UnresolvedExtern";
    case ErrorKind::kShapeCheckFailed: return "ShapeCheckFailed";
    case ErrorKind::kRuntime: return "RuntimeError";
    case ErrorKind::kUsage: return "UsageError";
  }
  return "Error";
}

namespace {

std::string format_message(ErrorKind kind, const std::string& message, const SourceSpan& span) {
  std::string out;
  if (span.valid()) out += span.to_string() + ": ";
  out += error_kind_name(kind);
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, SourceSpan span)
    : std::runtime_error(format_message(kind, message, span)),
      kind_(kind),
      span_(std::move(span)),
      detail_(message) {}

ShapeCheckFailed::ShapeCheckFailed(std::string site, std::string expected, std::string actual)
    : Error(ErrorKind::kShapeCheckFailed,
            "site " + site + ": expected " + expected + ", got " + actual),
      site_(std::move(site)),
      expected_(std::move(expected)),
      actual_(std::move(actual)) {}

}  // namespace symrelax
