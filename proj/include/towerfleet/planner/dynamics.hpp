#pragma once

#include <span>
#include <vector>

#include "towerfleet/world/types.hpp"

namespace towerfleet::planner {

// Discrete double integrator over a fleet. Controls are stacked as
// a[(u * (N - 1) + k) * 3 + axis] for vehicle slot u and step k < N - 1.

struct FleetRollout {
  std::size_t samples = 0;
  std::size_t vehicles = 0;
  /// Trace layout: sample k holds p_x, p_y, p_z of every vehicle.
  std::vector<double> positions;
  /// Same layout as positions.
  std::vector<double> velocities;
};

/// p_{k+1} = p_k + v_k Ts + a_k Ts^2 / 2, v_{k+1} = v_k + a_k Ts.
FleetRollout rollout(std::span<const world::Vec3> p0, std::span<const world::Vec3> v0, std::span<const double> a,
                     std::size_t samples, double ts);

/**
 * @brief Maps d(objective)/d(positions) to d(objective)/d(accelerations) by the adjoint recursion.
 *
 * `position_gradient` uses the trace layout of FleetRollout::positions.
 */
std::vector<double> control_gradient(std::span<const double> position_gradient, std::size_t vehicles,
                                     std::size_t samples, double ts);

/**
 * @brief Forward clipping: each a_k is clamped to |a| <= a_max and to the set keeping |v_{k+1}| <= v_max.
 *
 * When the start velocity already exceeds v_max the vehicle brakes at full authority.
 */
void project_controls(std::span<const world::Vec3> v0, std::span<double> a, std::size_t samples, double ts,
                      double v_max, double a_max);

}  // namespace towerfleet::planner
