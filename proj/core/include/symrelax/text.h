// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Textual module syntax (`.srx`) and tensor files (`.rten`, inline JSON).

#ifndef SYMRELAX_TEXT_H_
#define SYMRELAX_TEXT_H_

#include <map>
#include <string>
#include <string_view>

#include "symrelax/ir.h"
#include "symrelax/ndarray.h"
#include "symrelax/tprog.h"

namespace symrelax {

// Throws Error (kSyntax, kDuplicateDefinition, kUnknownAnnotation) with a
// span inside `src`.
Module parse_module(std::string_view src, const std::string& file = "<input>");

struct PrintOptions {
  // Comment lines keyed by "fn" (before the header), "fn/var" (before a
  // binding) or "fn/return" (before the return statement).
  std::multimap<std::string, std::string> notes;
};

// Canonical formatting: one binding per line, two-space indent.
std::string print_module(const Module& m, const PrintOptions& opts = {});
std::string print_function(const Function& f, const PrintOptions& opts = {});
std::string print_prim_func(const PrimFunc& p);
std::string print_expr(const Expr& e);
std::string print_scalar(const ScalarExpr& e);

// Shortest text that reads back to the same double.
std::string format_number(double v);

// Binary tensor format: "RTEN", u8 version, u8 dtype, u8 ndim, u64 dims
// (little endian), raw little-endian data.
std::string encode_tensor(const NDArray& a);
NDArray decode_tensor(std::string_view bytes);
NDArray read_tensor_file(const std::string& path);
void write_tensor_file(const std::string& path, const NDArray& a);

// `{"dtype": "f32", "shape": [2, 2], "data": [...]}` or a nested array of
// numbers (read as f32).
NDArray parse_tensor_json(std::string_view text);
std::string tensor_to_json(const NDArray& a);
std::string value_to_json(const Value& v);

}  // namespace symrelax

#endif  // SYMRELAX_TEXT_H_
