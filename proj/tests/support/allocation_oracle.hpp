#pragma once

// Test-only allocation reference: enumerates every partial one-to-one assignment.

#include <string>
#include <vector>

#include "towerfleet/tasks/allocation.hpp"

namespace towerfleet::testing {

struct AllocationInstance {
  std::vector<tasks::Task> tasks;
  std::vector<tasks::Candidate> candidates;
  tasks::AllocationParams params;
};

struct OracleOptimum {
  int assigned = 0;
  double total_travel = 0.0;
};

/// Maximum number of assigned tasks, then the least total travel time among those assignments.
OracleOptimum brute_force_allocation(const AllocationInstance& instance);

/// Instances from tests/fixtures/allocation.json.
std::vector<AllocationInstance> load_allocation_fixtures(const std::string& path);

}  // namespace towerfleet::testing
