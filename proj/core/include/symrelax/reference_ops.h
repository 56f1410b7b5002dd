// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Direct evaluation of graph operators on concrete tensors.

#ifndef SYMRELAX_REFERENCE_OPS_H_
#define SYMRELAX_REFERENCE_OPS_H_

#include <memory>
#include <span>
#include <string>

#include "symrelax/ndarray.h"
#include "symrelax/ops.h"

namespace symrelax {

// Evaluates `op` on concrete arguments (reshape takes a ShapeTuple second
// argument). Throws ShapeMismatch on incompatible operands.
Value eval_op(const std::string& op, const OpAttrs& attrs, std::span<const Value> args,
              const std::shared_ptr<AllocStats>& stats = nullptr);

// Sorted distinct elements of a rank-1 tensor.
NDArray unique_sorted(const NDArray& x, const std::shared_ptr<AllocStats>& stats = nullptr);

}  // namespace symrelax

#endif  // SYMRELAX_REFERENCE_OPS_H_
