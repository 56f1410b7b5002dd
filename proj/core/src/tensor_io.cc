// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "symrelax/error.h"
#include "symrelax/text.h"

namespace symrelax {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'E', 'N'};
constexpr uint8_t kVersion = 1;

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64(std::string_view in, size_t at) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(in[at + i])) << (8 * i);
  return v;
}

[[noreturn]] void bad_tensor(const std::string& msg) { throw Error(ErrorKind::kUsage, "tensor: " + msg); }

}  // namespace

std::string encode_tensor(const NDArray& a) {
  static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(a.dtype()));
  out.push_back(static_cast<char>(a.ndim()));
  for (int64_t d : a.shape()) put_u64(out, static_cast<uint64_t>(d));
  out.append(reinterpret_cast<const char*>(a.raw()), static_cast<size_t>(a.nbytes()));
  return out;
}

NDArray decode_tensor(std::string_view bytes) {
  if (bytes.size() < 7 || std::memcmp(bytes.data(), kMagic, 4) != 0) bad_tensor("missing RTEN header");
  if (static_cast<uint8_t>(bytes[4]) != kVersion) bad_tensor("unsupported version");
  auto code = static_cast<uint8_t>(bytes[5]);
  if (code > 2) bad_tensor("unknown dtype code " + std::to_string(code));
  auto dtype = static_cast<DType>(code);
  size_t ndim = static_cast<uint8_t>(bytes[6]);
  size_t at = 7;
  if (bytes.size() < at + 8 * ndim) bad_tensor("truncated dims");
  std::vector<int64_t> shape;
  for (size_t i = 0; i < ndim; ++i, at += 8) shape.push_back(static_cast<int64_t>(get_u64(bytes, at)));
  NDArray a = NDArray::empty(dtype, shape);
  if (bytes.size() - at != static_cast<size_t>(a.nbytes())) bad_tensor("data size does not match shape");
  std::memcpy(a.raw(), bytes.data() + at, static_cast<size_t>(a.nbytes()));
  return a;
}

NDArray read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kUsage, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_tensor(ss.str());
}

void write_tensor_file(const std::string& path, const NDArray& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kUsage, "cannot write " + path);
  std::string bytes = encode_tensor(a);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace {

void flatten_nested(const nlohmann::json& j, size_t depth, std::vector<int64_t>& shape, std::vector<double>& out) {
  if (!j.is_array()) {
    if (depth != shape.size()) bad_tensor("ragged nested array");
    if (j.is_boolean()) {
      out.push_back(j.get<bool>() ? 1.0 : 0.0);
    } else if (j.is_number()) {
      out.push_back(j.get<double>());
    } else {
      bad_tensor("non-numeric element");
    }
    return;
  }
  if (depth == shape.size()) {
    if (!out.empty()) bad_tensor("ragged nested array");
    shape.push_back(static_cast<int64_t>(j.size()));
  } else if (depth > shape.size() || shape[depth] != static_cast<int64_t>(j.size())) {
    bad_tensor("ragged nested array");
  }
  for (const auto& x : j) flatten_nested(x, depth + 1, shape, out);
}

}  // namespace

NDArray parse_tensor_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    bad_tensor(std::string("invalid JSON: ") + e.what());
  }
  DType dtype = DType::kF32;
  std::vector<int64_t> shape;
  std::vector<double> values;
  if (j.is_object()) {
    if (j.contains("dtype")) {
      auto d = parse_dtype(j.at("dtype").get<std::string>());
      if (!d) bad_tensor("unknown dtype");
      dtype = *d;
    }
    if (!j.contains("data")) bad_tensor("missing \"data\"");
    std::vector<int64_t> nested_shape;
    flatten_nested(j.at("data"), 0, nested_shape, values);
    if (j.contains("shape")) {
      shape = j.at("shape").get<std::vector<int64_t>>();
    } else {
      shape = nested_shape;
    }
  } else {
    flatten_nested(j, 0, shape, values);
  }
  NDArray a = NDArray::empty(dtype, shape);
  if (static_cast<int64_t>(values.size()) != a.numel()) bad_tensor("data length does not match shape");
  for (size_t i = 0; i < values.size(); ++i) {
    if (dtype == DType::kI64) {
      a.set_i64(static_cast<int64_t>(i), static_cast<int64_t>(std::llround(values[i])));
    } else {
      a.set(static_cast<int64_t>(i), values[i]);
    }
  }
  return a;
}

namespace {

nlohmann::json tensor_json(const NDArray& a) {
  nlohmann::json data = nlohmann::json::array();
  for (int64_t i = 0; i < a.numel(); ++i) {
    switch (a.dtype()) {
      case DType::kF32: {
        auto f = static_cast<float>(a.get(i));
        if (std::isfinite(f)) {
          data.push_back(f);
        } else {
          data.push_back(nullptr);
        }
        break;
      }
      case DType::kI64:
        data.push_back(a.get_i64(i));
        break;
      case DType::kBool:
        data.push_back(a.get(i) != 0);
        break;
    }
  }
  return {{"dtype", dtype_name(a.dtype())}, {"shape", a.shape()}, {"data", std::move(data)}};
}

nlohmann::json value_json(const Value& v) {
  if (const auto* a = std::get_if<NDArray>(&v)) return tensor_json(*a);
  if (const auto* s = std::get_if<ShapeTuple>(&v)) return {{"shape_value", *s}};
  if (const auto* t = std::get_if<std::shared_ptr<TupleValue>>(&v)) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : (*t)->fields) arr.push_back(value_json(f));
    return {{"tuple", std::move(arr)}};
  }
  if (const auto* st = std::get_if<std::shared_ptr<Storage>>(&v)) return {{"storage_bytes", (*st)->bytes()}};
  return nullptr;
}

}  // namespace

std::string tensor_to_json(const NDArray& a) { return tensor_json(a).dump(); }

std::string value_to_json(const Value& v) { return value_json(v).dump(); }

}  // namespace symrelax
