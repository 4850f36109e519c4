#pragma once

// Test-only 1-D reach oracle: a single vehicle at rest at x = 0 must enter the slab
// lo <= x <= hi before a deadline, in open space.

#include <string>
#include <vector>

#include "towerfleet/world/scenario.hpp"

namespace towerfleet::testing {

struct ReachInstance {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  double deadline = 0.0;
};

struct ReachLimits {
  double ts = 0.1;
  double v_max = 3.0;
  double a_max = 2.5;
  double lateral = 1.0;  // half extent of the target box across the direction of travel
};

/// Best robustness over accelerate / coast / brake profiles on the step grid.
double bang_bang_reach(const ReachInstance& r, const ReachLimits& lim);

/// Open space with vehicle 1 at (0, 0, 5) and the target box "goal" along x.
world::Scenario reach_scenario(const ReachInstance& r, const ReachLimits& lim);

std::vector<ReachInstance> load_reach_fixtures(const std::string& path);

}  // namespace towerfleet::testing
