// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/reference_ops.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "symrelax/error.h"

namespace symrelax {

namespace {

using Stats = std::shared_ptr<AllocStats>;

[[noreturn]] void mismatch(const std::string& op, const std::string& msg) {
  throw Error(ErrorKind::kShapeMismatch, op + ": " + msg);
}

const NDArray& tensor_at(const std::string& op, std::span<const Value> args, size_t i) {
  if (i >= args.size()) throw Error(ErrorKind::kArityMismatch, op + " is missing argument " + std::to_string(i));
  const auto* a = std::get_if<NDArray>(&args[i]);
  if (!a) mismatch(op, "argument " + std::to_string(i) + " is " + describe(args[i]) + ", not a tensor");
  return *a;
}

std::vector<int64_t> strides_of(const std::vector<int64_t>& shape) {
  std::vector<int64_t> s(shape.size(), 1);
  for (size_t k = shape.size(); k-- > 1;) s[k - 1] = s[k] * shape[k];
  return s;
}

void unravel(int64_t flat, const std::vector<int64_t>& shape, std::vector<int64_t>& idx) {
  idx.assign(shape.size(), 0);
  for (size_t k = shape.size(); k-- > 0;) {
    if (shape[k] == 0) return;
    idx[k] = flat % shape[k];
    flat /= shape[k];
  }
}

void copy_elem(const NDArray& src, int64_t i, NDArray& dst, int64_t j) {
  if (src.dtype() == DType::kI64) {
    dst.set_i64(j, src.get_i64(i));
  } else {
    dst.set(j, src.get(i));
  }
}

Value binary(const std::string& op, const NDArray& a, const NDArray& b, const Stats& stats) {
  if (a.dtype() != b.dtype()) mismatch(op, "dtype mismatch");
  size_t r = std::max(a.shape().size(), b.shape().size());
  std::vector<int64_t> out(r);
  for (size_t k = 0; k < r; ++k) {
    int64_t da = k + a.shape().size() >= r ? a.shape()[k + a.shape().size() - r] : 1;
    int64_t db = k + b.shape().size() >= r ? b.shape()[k + b.shape().size() - r] : 1;
    if (da != db && da != 1 && db != 1) {
      mismatch(op, "cannot broadcast " + shape_to_string(a.shape()) + " with " + shape_to_string(b.shape()));
    }
    out[k] = da == 1 ? db : da;
  }
  NDArray res = NDArray::empty(a.dtype(), out, stats);
  auto sa = strides_of(a.shape());
  auto sb = strides_of(b.shape());
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < res.numel(); ++i) {
    unravel(i, out, idx);
    int64_t fa = 0;
    int64_t fb = 0;
    for (size_t k = 0; k < r; ++k) {
      if (k + a.shape().size() >= r) {
        size_t ka = k + a.shape().size() - r;
        if (a.shape()[ka] != 1) fa += idx[k] * sa[ka];
      }
      if (k + b.shape().size() >= r) {
        size_t kb = k + b.shape().size() - r;
        if (b.shape()[kb] != 1) fb += idx[k] * sb[kb];
      }
    }
    if (a.dtype() == DType::kI64 && op != "divide") {
      int64_t x = a.get_i64(fa);
      int64_t y = b.get_i64(fb);
      int64_t z = op == "add" ? x + y : op == "sub" ? x - y : x * y;
      res.set_i64(i, z);
    } else {
      double x = a.get(fa);
      double y = b.get(fb);
      double z = op == "add" ? x + y : op == "sub" ? x - y : op == "mul" ? x * y : x / y;
      res.set(i, z);
    }
  }
  return res;
}

Value unary(const std::string& op, const NDArray& a, const Stats& stats) {
  NDArray res = NDArray::empty(a.dtype(), a.shape(), stats);
  for (int64_t i = 0; i < a.numel(); ++i) {
    double x = a.get(i);
    res.set(i, op == "exp" ? std::exp(x) : std::max(x, 0.0));
  }
  return res;
}

Value matmul(const NDArray& a, const NDArray& b, const Stats& stats) {
  if (a.ndim() != 2 || b.ndim() != 2) mismatch("matmul", "operands must be rank 2");
  int64_t m = a.shape()[0];
  int64_t k = a.shape()[1];
  int64_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    mismatch("matmul", "inner dimensions " + std::to_string(k) + " and " + std::to_string(b.shape()[0]) + " differ");
  }
  NDArray res = NDArray::empty(a.dtype(), {m, n}, stats);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < k; ++t) acc += a.get(i * k + t) * b.get(t * n + j);
      res.set(i * n + j, acc);
    }
  }
  return res;
}

NDArray relayout(const NDArray& a, std::vector<int64_t> shape, const Stats& stats) {
  NDArray res = NDArray::empty(a.dtype(), std::move(shape), stats);
  if (res.numel() != a.numel()) {
    mismatch("reshape", "cannot reshape " + shape_to_string(a.shape()) + " to " + shape_to_string(res.shape()));
  }
  for (int64_t i = 0; i < a.numel(); ++i) copy_elem(a, i, res, i);
  return res;
}

Value permute(const NDArray& a, const OpAttrs& attrs, const Stats& stats) {
  auto r = a.ndim();
  std::vector<int64_t> axes = attr_ints(attrs, "axes");
  if (axes.empty()) {
    for (int64_t k = r; k-- > 0;) axes.push_back(k);
  }
  if (static_cast<int64_t>(axes.size()) != r) mismatch("permute_dims", "axes do not match rank");
  for (auto& x : axes) x = normalize_axis(x, r);
  std::vector<int64_t> out;
  for (auto x : axes) out.push_back(a.shape()[static_cast<size_t>(x)]);
  NDArray res = NDArray::empty(a.dtype(), out, stats);
  auto sa = strides_of(a.shape());
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < res.numel(); ++i) {
    unravel(i, out, idx);
    int64_t src = 0;
    for (size_t k = 0; k < axes.size(); ++k) src += idx[k] * sa[static_cast<size_t>(axes[k])];
    copy_elem(a, src, res, i);
  }
  return res;
}

Value concat(std::span<const Value> args, const OpAttrs& attrs, const Stats& stats) {
  if (args.empty()) throw Error(ErrorKind::kArityMismatch, "concat needs at least one argument");
  const NDArray& first = tensor_at("concat", args, 0);
  auto axis = static_cast<size_t>(normalize_axis(attr_int(attrs, "axis").value_or(0), first.ndim()));
  std::vector<int64_t> out = first.shape();
  out[axis] = 0;
  for (size_t i = 0; i < args.size(); ++i) {
    const NDArray& t = tensor_at("concat", args, i);
    if (t.ndim() != first.ndim() || t.dtype() != first.dtype()) mismatch("concat", "operands differ in rank or dtype");
    for (size_t k = 0; k < out.size(); ++k) {
      if (k != axis && t.shape()[k] != first.shape()[k]) mismatch("concat", "operands differ off the concat axis");
    }
    out[axis] += t.shape()[axis];
  }
  NDArray res = NDArray::empty(first.dtype(), out, stats);
  auto so = strides_of(out);
  int64_t offset = 0;
  std::vector<int64_t> idx;
  for (const auto& v : args) {
    const NDArray& t = std::get<NDArray>(v);
    for (int64_t i = 0; i < t.numel(); ++i) {
      unravel(i, t.shape(), idx);
      idx[axis] += offset;
      int64_t dst = 0;
      for (size_t k = 0; k < idx.size(); ++k) dst += idx[k] * so[k];
      copy_elem(t, i, res, dst);
    }
    offset += t.shape()[axis];
  }
  return res;
}

Value split(const NDArray& a, const OpAttrs& attrs, const Stats& stats) {
  auto axis = static_cast<size_t>(normalize_axis(attr_int(attrs, "axis").value_or(0), a.ndim()));
  int64_t d = a.shape()[axis];
  std::vector<int64_t> bounds{0};
  if (auto sections = attr_int(attrs, "sections")) {
    if (*sections <= 0 || d % *sections != 0) mismatch("split", "dimension " + std::to_string(d) + " is not divisible");
    for (int64_t s = 1; s <= *sections; ++s) bounds.push_back(d / *sections * s);
  } else {
    for (auto i : attr_ints(attrs, "indices")) bounds.push_back(std::clamp<int64_t>(i, 0, d));
    bounds.push_back(d);
  }
  auto sa = strides_of(a.shape());
  std::vector<Value> parts;
  std::vector<int64_t> idx;
  for (size_t p = 0; p + 1 < bounds.size(); ++p) {
    std::vector<int64_t> shape = a.shape();
    shape[axis] = std::max<int64_t>(bounds[p + 1] - bounds[p], 0);
    NDArray part = NDArray::empty(a.dtype(), shape, stats);
    for (int64_t i = 0; i < part.numel(); ++i) {
      unravel(i, shape, idx);
      idx[axis] += bounds[p];
      int64_t src = 0;
      for (size_t k = 0; k < idx.size(); ++k) src += idx[k] * sa[k];
      copy_elem(a, src, part, i);
    }
    parts.emplace_back(std::move(part));
  }
  return make_tuple_value(std::move(parts));
}

Value sum(const NDArray& a, const OpAttrs& attrs, const Stats& stats) {
  auto r = a.ndim();
  bool keepdims = attr_int(attrs, "keepdims").value_or(0) != 0;
  auto axes = attr_ints(attrs, "axis");
  std::vector<bool> reduced(static_cast<size_t>(r), axes.empty());
  for (auto x : axes) reduced[static_cast<size_t>(normalize_axis(x, r))] = true;
  std::vector<int64_t> out;
  std::vector<int64_t> kept;  // out shape with reduced axes set to 1
  for (size_t k = 0; k < reduced.size(); ++k) {
    kept.push_back(reduced[k] ? 1 : a.shape()[k]);
    if (!reduced[k]) {
      out.push_back(a.shape()[k]);
    } else if (keepdims) {
      out.push_back(1);
    }
  }
  int64_t n = 1;
  for (auto x : kept) n *= x;
  std::vector<double> acc(static_cast<size_t>(n), 0.0);
  std::vector<int64_t> idx;
  auto sk = strides_of(kept);
  for (int64_t i = 0; i < a.numel(); ++i) {
    unravel(i, a.shape(), idx);
    int64_t dst = 0;
    for (size_t k = 0; k < idx.size(); ++k) {
      if (!reduced[k]) dst += idx[k] * sk[k];
    }
    acc[static_cast<size_t>(dst)] += a.get(i);
  }
  NDArray res = NDArray::empty(a.dtype(), out, stats);
  for (int64_t i = 0; i < n; ++i) res.set(i, acc[static_cast<size_t>(i)]);
  return res;
}

}  // namespace

NDArray unique_sorted(const NDArray& x, const std::shared_ptr<AllocStats>& stats) {
  if (x.ndim() != 1) mismatch("unique", "expects a rank-1 tensor, got " + shape_to_string(x.shape()));
  NDArray res;
  if (x.dtype() == DType::kI64) {
    std::set<int64_t> vals;
    for (int64_t i = 0; i < x.numel(); ++i) vals.insert(x.get_i64(i));
    res = NDArray::empty(x.dtype(), {static_cast<int64_t>(vals.size())}, stats);
    int64_t i = 0;
    for (auto v : vals) res.set_i64(i++, v);
  } else {
    std::set<double> vals;
    for (int64_t i = 0; i < x.numel(); ++i) vals.insert(x.get(i));
    res = NDArray::empty(x.dtype(), {static_cast<int64_t>(vals.size())}, stats);
    int64_t i = 0;
    for (auto v : vals) res.set(i++, v);
  }
  return res;
}

Value eval_op(const std::string& op, const OpAttrs& attrs, std::span<const Value> args, const Stats& stats) {
  if (!is_known_op(op)) throw Error(ErrorKind::kUnknownOperator, "unknown operator " + op);
  if (is_binary_broadcast_op(op)) return binary(op, tensor_at(op, args, 0), tensor_at(op, args, 1), stats);
  if (is_unary_elementwise_op(op)) return unary(op, tensor_at(op, args, 0), stats);
  if (op == "matmul") return matmul(tensor_at(op, args, 0), tensor_at(op, args, 1), stats);
  if (op == "flatten") {
    const NDArray& a = tensor_at(op, args, 0);
    return relayout(a, {a.numel()}, stats);
  }
  if (op == "reshape") {
    const NDArray& a = tensor_at(op, args, 0);
    const auto* s = args.size() > 1 ? std::get_if<ShapeTuple>(&args[1]) : nullptr;
    if (!s) mismatch(op, "second argument must be a shape");
    return relayout(a, *s, stats);
  }
  if (op == "permute_dims") return permute(tensor_at(op, args, 0), attrs, stats);
  if (op == "concat") return concat(args, attrs, stats);
  if (op == "split") return split(tensor_at(op, args, 0), attrs, stats);
  if (op == "sum") return sum(tensor_at(op, args, 0), attrs, stats);
  return unique_sorted(tensor_at(op, args, 0), stats);
}

}  // namespace symrelax
