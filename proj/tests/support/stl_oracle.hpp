#pragma once

// Test-only reference semantics for STL formulas. These evaluate the definitions
// directly by recursion over every window and share no code with the library's
// signal-level evaluator.

#include <cstdint>
#include <random>
#include <vector>

#include "towerfleet/stl/formula.hpp"

namespace towerfleet::testing {

/// Exact robustness by direct recursion at a single step.
double brute_force_robustness(const stl::Formula& f, const stl::Trace& trace, std::size_t k);

/// Boolean satisfaction (predicate holds iff mu > 0).
bool boolean_satisfaction(const stl::Formula& f, const stl::Trace& trace, std::size_t k);

struct RandomInstance {
  stl::Formula formula;
  stl::Trace trace;
};

/// Random formula of operator depth <= max_depth with windows that fit the generated trace.
RandomInstance random_instance(std::mt19937_64& rng, int max_depth, std::size_t dimension);

}  // namespace towerfleet::testing
