#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "engram/model.hpp"
#include "engram/tensor_store.hpp"

namespace engram::selftest {

struct CheckResult {
  int id;  // criterion number
  std::string name;
  bool passed;
  std::string detail;
};

// Oracle-backed property suite. Runs with no external assets; every expected
// value is computed by an independent route (naive reference forward pass,
// exhaustive enumeration, normal equations, closed forms) inside this module.
std::vector<CheckResult> run_property_suite(uint64_t seed = 42);

// Random tiny transformer weights for a config, normal(0, scale) entries.
NamedTensorStore random_store(const ModelConfig& config, uint64_t seed, double scale = 0.2);

// Independent O(T^2) float64 reference forward pass reading raw tensors from
// the store. Returns row-major [T x vocab] logits. Deliberately separate from
// Model::forward; the two must agree only up to float32 round-off.
std::vector<double> reference_forward(const NamedTensorStore& store, const ModelConfig& config,
                                      const std::vector<int>& tokens);

}  // namespace engram::selftest
