// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/library.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "symrelax/error.h"
#include "symrelax/reference_ops.h"

namespace symrelax {

namespace {

constexpr double kRmsEps = 1e-5;

[[noreturn]] void bad_args(const std::string& name, const std::string& msg) {
  throw Error(ErrorKind::kShapeMismatch, name + ": " + msg);
}

void expect_count(const std::string& name, std::span<NDArray> b, size_t n) {
  if (b.size() != n) {
    bad_args(name, "expects " + std::to_string(n) + " buffers, got " + std::to_string(b.size()));
  }
}

void expect_shape(const std::string& name, const NDArray& a, const std::vector<int64_t>& shape) {
  if (a.shape() != shape) {
    bad_args(name, "buffer has shape " + shape_to_string(a.shape()) + ", expected " + shape_to_string(shape));
  }
}

void gemm(const std::string& name, std::span<NDArray> b, const NDArray* bias) {
  const NDArray& x = b[0];
  const NDArray& w = b[1];
  NDArray& y = b[b.size() - 1];
  if (x.ndim() != 2 || w.ndim() != 2) bad_args(name, "operands must be rank 2");
  int64_t m = x.shape()[0];
  int64_t k = x.shape()[1];
  int64_t n = w.shape()[1];
  if (w.shape()[0] != k) bad_args(name, "inner dimensions differ");
  if (bias) expect_shape(name, *bias, {n});
  expect_shape(name, y, {m, n});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t) acc += x.get(i * k + t) * w.get(t * n + j);
      if (bias) acc += bias->get(j);
      y.set(i * n + j, acc);
    }
  }
}

void softmax(std::span<NDArray> b) {
  expect_count("softmax", b, 2);
  const NDArray& x = b[0];
  NDArray& y = b[1];
  if (x.ndim() < 1) bad_args("softmax", "operand must have rank >= 1");
  expect_shape("softmax", y, x.shape());
  int64_t n = x.shape().back();
  int64_t rows = n == 0 ? 0 : x.numel() / n;
  for (int64_t r = 0; r < rows; ++r) {
    double hi = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < n; ++j) hi = std::max(hi, x.get(r * n + j));
    double total = 0.0;
    for (int64_t j = 0; j < n; ++j) total += std::exp(x.get(r * n + j) - hi);
    for (int64_t j = 0; j < n; ++j) y.set(r * n + j, std::exp(x.get(r * n + j) - hi) / total);
  }
}

void rms_norm(std::span<NDArray> b) {
  expect_count("rms_norm", b, 3);
  const NDArray& x = b[0];
  const NDArray& w = b[1];
  NDArray& y = b[2];
  if (x.ndim() < 1) bad_args("rms_norm", "operand must have rank >= 1");
  int64_t n = x.shape().back();
  expect_shape("rms_norm", w, {n});
  expect_shape("rms_norm", y, x.shape());
  int64_t rows = n == 0 ? 0 : x.numel() / n;
  for (int64_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (int64_t j = 0; j < n; ++j) sq += x.get(r * n + j) * x.get(r * n + j);
    double scale = 1.0 / std::sqrt(sq / static_cast<double>(n) + kRmsEps);
    for (int64_t j = 0; j < n; ++j) y.set(r * n + j, x.get(r * n + j) * scale * w.get(j));
  }
}

LibraryRegistry make_reference() {
  LibraryRegistry r;
  r.add("matmul", [](std::span<NDArray> b) {
    expect_count("matmul", b, 3);
    gemm("matmul", b, nullptr);
  });
  r.add("linear_bias", [](std::span<NDArray> b) {
    expect_count("linear_bias", b, 4);
    gemm("linear_bias", b, &b[2]);
  });
  r.add("softmax", softmax);
  r.add("rms_norm", rms_norm);
  return r;
}

}  // namespace

const LibraryRegistry& LibraryRegistry::reference() {
  static const LibraryRegistry registry = make_reference();
  return registry;
}

void LibraryRegistry::add(const std::string& name, LibraryRoutine routine) { routines_[name] = std::move(routine); }

const LibraryRoutine* LibraryRegistry::find(const std::string& name) const {
  auto it = routines_.find(name);
  return it == routines_.end() ? nullptr : &it->second;
}

std::vector<std::string> LibraryRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : routines_) out.push_back(name);
  return out;
}

const BuiltinRoutine* find_builtin(const std::string& name) {
  static const std::map<std::string, BuiltinRoutine> builtins = {
      {"unique",
       [](std::span<const Value> args, const std::shared_ptr<AllocStats>& stats) -> Value {
         if (args.size() != 1 || !std::holds_alternative<NDArray>(args[0])) {
           throw Error(ErrorKind::kShapeMismatch, "unique: expects one tensor argument");
         }
         return unique_sorted(std::get<NDArray>(args[0]), stats);
       }},
  };
  auto it = builtins.find(name);
  return it == builtins.end() ? nullptr : &it->second;
}

}  // namespace symrelax
