// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/ops.h"

#include <algorithm>
#include <array>

#include "symrelax/error.h"

namespace symrelax {

namespace {

constexpr std::array<std::string_view, 14> kOps = {
    "add",  "sub",     "mul",          "divide", "exp",   "relu", "matmul",
    "reshape", "flatten", "permute_dims", "concat", "split", "sum",  "unique",
};

}  // namespace

std::span<const std::string_view> all_ops() { return kOps; }

bool is_known_op(std::string_view name) {
  return std::find(kOps.begin(), kOps.end(), name) != kOps.end();
}

bool is_binary_broadcast_op(std::string_view name) {
  return name == "add" || name == "sub" || name == "mul" || name == "divide";
}

bool is_unary_elementwise_op(std::string_view name) { return name == "exp" || name == "relu"; }

std::optional<int64_t> attr_int(const OpAttrs& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end() || it->second.size() != 1) return std::nullopt;
  return it->second[0];
}

std::vector<int64_t> attr_ints(const OpAttrs& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) return {};
  return it->second;
}

int64_t normalize_axis(int64_t axis, int64_t rank) {
  int64_t a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw Error(ErrorKind::kAnnotationConflict,
                "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return a;
}

}  // namespace symrelax
