// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors backed by reference-counted storages.

#ifndef SYMRELAX_NDARRAY_H_
#define SYMRELAX_NDARRAY_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace symrelax {

enum class DType : uint8_t { kF32 = 0, kI64 = 1, kBool = 2 };

int64_t dtype_bytes(DType dtype);
const char* dtype_name(DType dtype);
std::optional<DType> parse_dtype(std::string_view name);

// Allocation accounting shared by every storage created through one tracker.
struct AllocStats {
  int64_t allocs = 0;
  int64_t live_bytes = 0;
  int64_t peak_bytes = 0;
};

class Storage {
 public:
  Storage(int64_t bytes, std::shared_ptr<AllocStats> stats);
  ~Storage();
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;

  int64_t bytes() const { return static_cast<int64_t>(data_.size()); }
  std::byte* data() { return data_.data(); }
  const std::byte* data() const { return data_.data(); }

 private:
  std::vector<std::byte> data_;
  std::shared_ptr<AllocStats> stats_;
};

class NDArray {
 public:
  NDArray() = default;

  // Fresh zero-initialized tensor with its own storage.
  static NDArray empty(DType dtype, std::vector<int64_t> shape,
                       std::shared_ptr<AllocStats> stats = nullptr);
  // View into an existing storage; throws if it does not fit.
  static NDArray view(std::shared_ptr<Storage> storage, int64_t byte_offset, DType dtype,
                      std::vector<int64_t> shape);

  static NDArray from_f32(std::vector<int64_t> shape, const std::vector<float>& values);
  static NDArray from_i64(std::vector<int64_t> shape, const std::vector<int64_t>& values);
  static NDArray from_bool(std::vector<int64_t> shape, const std::vector<bool>& values);

  bool defined() const { return storage_ != nullptr; }
  DType dtype() const { return dtype_; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t numel() const;
  int64_t nbytes() const { return numel() * dtype_bytes(dtype_); }
  const std::shared_ptr<Storage>& storage() const { return storage_; }
  int64_t byte_offset() const { return offset_; }

  std::byte* raw() { return storage_->data() + offset_; }
  const std::byte* raw() const { return storage_->data() + offset_; }

  // Element access through double; bool is 0/1, i64 is exact below 2^53.
  double get(int64_t flat) const;
  void set(int64_t flat, double value);
  int64_t get_i64(int64_t flat) const;
  void set_i64(int64_t flat, int64_t value);

  std::vector<double> to_doubles() const;

  // Deep copy into a fresh storage.
  NDArray clone() const;

 private:
  std::shared_ptr<Storage> storage_;
  int64_t offset_ = 0;
  DType dtype_ = DType::kF32;
  std::vector<int64_t> shape_;
};

std::string shape_to_string(std::span<const int64_t> shape);

struct TupleValue;

// A runtime value: tensor, raw storage, shape tuple, tuple, or nothing.
using ShapeTuple = std::vector<int64_t>;
using Value = std::variant<std::monostate, NDArray, std::shared_ptr<Storage>, ShapeTuple,
                           std::shared_ptr<TupleValue>>;

struct TupleValue {
  std::vector<Value> fields;
};

Value make_tuple_value(std::vector<Value> fields);
std::string describe(const Value& v);

// Elementwise comparison: shapes and dtypes must match; f32 within relative
// tolerance `rtol` (absolute floor `rtol` near zero), integers exact.
bool values_close(const Value& a, const Value& b, double rtol, std::string* why = nullptr);

}  // namespace symrelax

#endif  // SYMRELAX_NDARRAY_H_
