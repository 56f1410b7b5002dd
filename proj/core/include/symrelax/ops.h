// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// The fixed graph-level operator set.

#ifndef SYMRELAX_OPS_H_
#define SYMRELAX_OPS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace symrelax {

// Integer attributes such as `axis=1` or `axes=[1, 0]`.
using OpAttrs = std::map<std::string, std::vector<int64_t>>;

std::span<const std::string_view> all_ops();
bool is_known_op(std::string_view name);
bool is_binary_broadcast_op(std::string_view name);  // add sub mul divide
bool is_unary_elementwise_op(std::string_view name);  // exp relu

std::optional<int64_t> attr_int(const OpAttrs& attrs, const std::string& key);
std::vector<int64_t> attr_ints(const OpAttrs& attrs, const std::string& key);

// Maps a possibly negative axis into [0, rank); throws on out of range.
int64_t normalize_axis(int64_t axis, int64_t rank);

}  // namespace symrelax

#endif  // SYMRELAX_OPS_H_
