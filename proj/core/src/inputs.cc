// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/inputs.h"

#include "symrelax/error.h"

namespace symrelax {

Value random_value(const Annotation& ann, const SymValues& env, std::mt19937_64& rng) {
  if (ann.is_tuple()) {
    std::vector<Value> fields;
    for (const auto& f : ann.fields()) fields.push_back(random_value(f, env, rng));
    return make_tuple_value(std::move(fields));
  }
  const auto* dims = ann.known_dims();
  if ((!ann.is_tensor() && !ann.is_shape()) || !dims) {
    throw Error(ErrorKind::kUsage, "cannot generate a value of type " + to_string(ann));
  }
  std::vector<int64_t> shape;
  for (const auto& d : *dims) {
    try {
      shape.push_back(evaluate(d, env));
    } catch (const Error& e) {
      throw Error(ErrorKind::kUsage, "cannot generate " + to_string(ann) + ": " + e.detail());
    }
  }
  if (ann.is_shape()) return ShapeTuple(shape);
  DType dt = ann.dtype().value_or(DType::kF32);
  NDArray a = NDArray::empty(dt, shape);
  std::uniform_real_distribution<double> real(-1.0, 1.0);
  std::uniform_int_distribution<int64_t> small(0, 3);
  std::bernoulli_distribution coin(0.5);
  for (int64_t i = 0; i < a.numel(); ++i) {
    switch (dt) {
      case DType::kF32: a.set(i, real(rng)); break;
      case DType::kI64: a.set_i64(i, small(rng)); break;
      case DType::kBool: a.set(i, coin(rng) ? 1.0 : 0.0); break;
    }
  }
  return a;
}

std::vector<Value> random_inputs(const Function& f, const std::map<std::string, int64_t>& bind, uint64_t seed) {
  SymValues env;
  for (const auto& [name, value] : bind) {
    if (auto v = f.find_sym(name)) env[*v] = value;
  }
  std::mt19937_64 rng(seed);
  std::vector<Value> out;
  for (const auto& p : f.params) out.push_back(random_value(p.ann, env, rng));
  return out;
}

}  // namespace symrelax
