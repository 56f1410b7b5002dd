// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include "symrelax/ndarray.h"

#include <cmath>
#include <cstring>
#include <sstream>

#include "symrelax/error.h"
#include "symrelax/symexpr.h"

namespace symrelax {

int64_t dtype_bytes(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return 4;
    case DType::kI64:
      return 8;
    case DType::kBool:
      return 1;
  }
  return 0;
}

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return "f32";
    case DType::kI64:
      return "i64";
    case DType::kBool:
      return "bool";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view name) {
  if (name == "f32") return DType::kF32;
  if (name == "i64") return DType::kI64;
  if (name == "bool") return DType::kBool;
  return std::nullopt;
}

Storage::Storage(int64_t bytes, std::shared_ptr<AllocStats> stats)
    : data_(static_cast<size_t>(bytes)), stats_(std::move(stats)) {
  if (stats_) {
    stats_->allocs += 1;
    stats_->live_bytes += bytes;
    stats_->peak_bytes = std::max(stats_->peak_bytes, stats_->live_bytes);
  }
}

Storage::~Storage() {
  if (stats_) stats_->live_bytes -= static_cast<int64_t>(data_.size());
}

int64_t NDArray::numel() const {
  int64_t n = 1;
  for (int64_t d : shape_) n = checked_mul(n, d);
  return n;
}

NDArray NDArray::empty(DType dtype, std::vector<int64_t> shape, std::shared_ptr<AllocStats> stats) {
  NDArray a;
  a.dtype_ = dtype;
  a.shape_ = std::move(shape);
  for (int64_t d : a.shape_) {
    if (d < 0) throw Error(ErrorKind::kShapeMismatch, "negative dimension " + std::to_string(d));
  }
  a.storage_ = std::make_shared<Storage>(a.nbytes(), std::move(stats));
  return a;
}

NDArray NDArray::view(std::shared_ptr<Storage> storage, int64_t byte_offset, DType dtype,
                      std::vector<int64_t> shape) {
  NDArray a;
  a.dtype_ = dtype;
  a.shape_ = std::move(shape);
  for (int64_t d : a.shape_) {
    if (d < 0) throw Error(ErrorKind::kShapeMismatch, "negative dimension " + std::to_string(d));
  }
  if (byte_offset < 0 || byte_offset + a.nbytes() > storage->bytes()) {
    throw Error(ErrorKind::kRuntime, "tensor of " + std::to_string(a.nbytes()) + " bytes at offset " +
                                         std::to_string(byte_offset) + " exceeds storage of " +
                                         std::to_string(storage->bytes()) + " bytes");
  }
  a.storage_ = std::move(storage);
  a.offset_ = byte_offset;
  return a;
}

NDArray NDArray::from_f32(std::vector<int64_t> shape, const std::vector<float>& values) {
  NDArray a = empty(DType::kF32, std::move(shape));
  if (static_cast<int64_t>(values.size()) != a.numel()) {
    throw Error(ErrorKind::kShapeMismatch, "value count does not match shape");
  }
  std::memcpy(a.raw(), values.data(), values.size() * sizeof(float));
  return a;
}

NDArray NDArray::from_i64(std::vector<int64_t> shape, const std::vector<int64_t>& values) {
  NDArray a = empty(DType::kI64, std::move(shape));
  if (static_cast<int64_t>(values.size()) != a.numel()) {
    throw Error(ErrorKind::kShapeMismatch, "value count does not match shape");
  }
  std::memcpy(a.raw(), values.data(), values.size() * sizeof(int64_t));
  return a;
}

NDArray NDArray::from_bool(std::vector<int64_t> shape, const std::vector<bool>& values) {
  NDArray a = empty(DType::kBool, std::move(shape));
  if (static_cast<int64_t>(values.size()) != a.numel()) {
    throw Error(ErrorKind::kShapeMismatch, "value count does not match shape");
  }
  for (size_t i = 0; i < values.size(); ++i) a.raw()[i] = std::byte{values[i] ? uint8_t{1} : uint8_t{0}};
  return a;
}

double NDArray::get(int64_t flat) const {
  switch (dtype_) {
    case DType::kF32: {
      float v;
      std::memcpy(&v, raw() + flat * 4, 4);
      return v;
    }
    case DType::kI64: {
      int64_t v;
      std::memcpy(&v, raw() + flat * 8, 8);
      return static_cast<double>(v);
    }
    case DType::kBool:
      return raw()[flat] != std::byte{0} ? 1.0 : 0.0;
  }
  return 0;
}

void NDArray::set(int64_t flat, double value) {
  switch (dtype_) {
    case DType::kF32: {
      float v = static_cast<float>(value);
      std::memcpy(raw() + flat * 4, &v, 4);
      return;
    }
    case DType::kI64: {
      int64_t v = static_cast<int64_t>(value);
      std::memcpy(raw() + flat * 8, &v, 8);
      return;
    }
    case DType::kBool:
      raw()[flat] = value != 0.0 ? std::byte{1} : std::byte{0};
      return;
  }
}

int64_t NDArray::get_i64(int64_t flat) const {
  if (dtype_ == DType::kI64) {
    int64_t v;
    std::memcpy(&v, raw() + flat * 8, 8);
    return v;
  }
  return static_cast<int64_t>(get(flat));
}

void NDArray::set_i64(int64_t flat, int64_t value) {
  if (dtype_ == DType::kI64) {
    std::memcpy(raw() + flat * 8, &value, 8);
    return;
  }
  set(flat, static_cast<double>(value));
}

std::vector<double> NDArray::to_doubles() const {
  std::vector<double> out(static_cast<size_t>(numel()));
  for (int64_t i = 0; i < numel(); ++i) out[static_cast<size_t>(i)] = get(i);
  return out;
}

NDArray NDArray::clone() const {
  NDArray out = empty(dtype_, shape_);
  if (nbytes() > 0) std::memcpy(out.raw(), raw(), static_cast<size_t>(nbytes()));
  return out;
}

std::string shape_to_string(std::span<const int64_t> shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

Value make_tuple_value(std::vector<Value> fields) {
  auto t = std::make_shared<TupleValue>();
  t->fields = std::move(fields);
  return t;
}

std::string describe(const Value& v) {
  if (std::holds_alternative<std::monostate>(v)) return "none";
  if (auto* t = std::get_if<NDArray>(&v)) {
    return std::string("Tensor(") + shape_to_string(t->shape()) + ", " + dtype_name(t->dtype()) + ")";
  }
  if (std::holds_alternative<std::shared_ptr<Storage>>(v)) return "Storage";
  if (auto* s = std::get_if<ShapeTuple>(&v)) return "Shape(" + shape_to_string(*s) + ")";
  if (auto* tup = std::get_if<std::shared_ptr<TupleValue>>(&v)) {
    std::string out = "Tuple(";
    for (size_t i = 0; i < (*tup)->fields.size(); ++i) {
      if (i) out += ", ";
      out += describe((*tup)->fields[i]);
    }
    return out + ")";
  }
  return "?";
}

bool values_close(const Value& a, const Value& b, double rtol, std::string* why) {
  auto fail = [why](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  if (a.index() != b.index()) return fail("value kinds differ: " + describe(a) + " vs " + describe(b));
  if (auto* ta = std::get_if<NDArray>(&a)) {
    const auto& tb = std::get<NDArray>(b);
    if (ta->dtype() != tb.dtype() || ta->shape() != tb.shape()) {
      return fail("tensor mismatch: " + describe(a) + " vs " + describe(b));
    }
    for (int64_t i = 0; i < ta->numel(); ++i) {
      if (ta->dtype() == DType::kF32) {
        double x = ta->get(i);
        double y = tb.get(i);
        if (std::isnan(x) && std::isnan(y)) continue;
        double scale = std::max({std::fabs(x), std::fabs(y), 1.0});
        if (!(std::fabs(x - y) <= rtol * scale)) {
          return fail("element " + std::to_string(i) + ": " + std::to_string(x) + " vs " + std::to_string(y));
        }
      } else if (ta->get_i64(i) != tb.get_i64(i)) {
        return fail("element " + std::to_string(i) + " differs");
      }
    }
    return true;
  }
  if (auto* sa = std::get_if<ShapeTuple>(&a)) {
    if (*sa != std::get<ShapeTuple>(b)) return fail("shape values differ");
    return true;
  }
  if (auto* ta = std::get_if<std::shared_ptr<TupleValue>>(&a)) {
    const auto& tb = std::get<std::shared_ptr<TupleValue>>(b);
    if ((*ta)->fields.size() != tb->fields.size()) return fail("tuple arity differs");
    for (size_t i = 0; i < tb->fields.size(); ++i) {
      if (!values_close((*ta)->fields[i], tb->fields[i], rtol, why)) return false;
    }
    return true;
  }
  return true;
}

}  // namespace symrelax
