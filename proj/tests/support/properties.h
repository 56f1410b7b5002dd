// Copyright 2026 The symrelax Authors
// SPDX-License-Identifier: Apache-2.0
//
// Randomized property suites. Each returns the number of cases checked and a
// description of every failure; gtest and the acceptance binary share them.

#ifndef SYMRELAX_TESTS_PROPERTIES_H_
#define SYMRELAX_TESTS_PROPERTIES_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace symrelax::testing {

struct PropertyResult {
  int64_t cases = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty() && cases > 0; }
  void fail(std::string msg) {
    if (failures.size() < 20) failures.push_back(std::move(msg));
  }
};

// Normalized expressions evaluate like an independent reference evaluator;
// normalization is idempotent; commuted sums and products prove equal;
// prove_equal verdicts agree with evaluation.
PropertyResult symexpr_properties(int cases, uint64_t seed);

// subsumes is reflexive, transitive and antisymmetric with Object on top;
// join is an upper bound; dropping dims coarsens.
PropertyResult annotation_properties(int cases, uint64_t seed);

// A random well-formed module over (n, 4)-shaped tensors, as source text.
std::string random_module_text(std::mt19937_64& rng);

// print(parse(print(m))) == print(m) for the corpus, the corpus after every
// pass, and `generated` random modules; every kernel those random modules
// lower to reparses to a structurally equal PrimFunc.
PropertyResult round_trip_properties(int generated, uint64_t seed);

// classify(derive_prim(op)) against a fixed table.
PropertyResult classify_golden();

// Every prefix of each preset preserves interpreter results, the full
// pipeline agrees with the VM, and pass-by-pass composition equals the preset.
PropertyResult pipeline_composition(uint64_t seed);

}  // namespace symrelax::testing

#endif  // SYMRELAX_TESTS_PROPERTIES_H_
