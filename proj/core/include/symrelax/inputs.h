// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random arguments for a function signature.

#ifndef SYMRELAX_INPUTS_H_
#define SYMRELAX_INPUTS_H_

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "symrelax/ir.h"
#include "symrelax/ndarray.h"

namespace symrelax {

// f32 uniform in [-1, 1), i64 uniform in [0, 4), bool fair coin. Every
// dimension of `ann` must evaluate under `env`; throws Usage otherwise.
Value random_value(const Annotation& ann, const SymValues& env, std::mt19937_64& rng);

// Arguments for `f` with its symbolic variables bound by name. Variables
// missing from `bind` throw Usage.
std::vector<Value> random_inputs(const Function& f, const std::map<std::string, int64_t>& bind, uint64_t seed);

}  // namespace symrelax

#endif  // SYMRELAX_INPUTS_H_
