// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Native routines reachable from call_dps_library and call_builtin.

#ifndef SYMRELAX_LIBRARY_H_
#define SYMRELAX_LIBRARY_H_

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "symrelax/ndarray.h"

namespace symrelax {

// Destination-passing routine: inputs first, then preallocated outputs.
using LibraryRoutine = std::function<void(std::span<NDArray> buffers)>;

// Builtins allocate their own results (e.g. unique, whose length is data dependent).
using BuiltinRoutine = std::function<Value(std::span<const Value> args, const std::shared_ptr<AllocStats>& stats)>;

class LibraryRegistry {
 public:
  // matmul, linear_bias, softmax, rms_norm.
  static const LibraryRegistry& reference();

  void add(const std::string& name, LibraryRoutine routine);
  const LibraryRoutine* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, LibraryRoutine> routines_;
};

// unique; alloc_storage and alloc_tensor are handled by the runtimes.
const BuiltinRoutine* find_builtin(const std::string& name);

}  // namespace symrelax

#endif  // SYMRELAX_LIBRARY_H_
