#pragma once

#include "towerfleet/sim/rng.hpp"
#include "towerfleet/world/settings.hpp"
#include "towerfleet/world/types.hpp"

namespace towerfleet::sim {

struct ActuatorCommand {
  world::Vec3 acceleration;
  double yaw_rate = 0.0;
};

/// Power draw of one vehicle: idle watts plus watts per m/s^2, both scaled by an anomaly factor.
struct PowerModel {
  double idle = 10.0;
  double per_accel = 4.0;
  double factor = 1.0;
};

/**
 * @brief Flat vehicle over one step.
 *
 * Acceleration relaxes toward the clamped command with time constant params.lag; position and
 * velocity are integrated exactly through the lag. Heading integrates the clamped yaw rate.
 * Energy drops by factor * (idle + per_accel * |a|) * dt with |a| taken at the end of the step;
 * an empty battery fails the vehicle.
 */
world::UavState plant_step(const world::UavState& state, const ActuatorCommand& command,
                           const world::PlantParams& params, const PowerModel& power, double dt);

/// Reference point of a trajectory at one instant.
struct Reference {
  world::Vec3 position;
  world::Vec3 velocity;
  world::Vec3 acceleration;
  double heading = 0.0;
};

/// a = a* + kv (v* - v) + kp (p* - p), yaw rate = k_heading wrap(psi* - psi); both clamped to the plant.
ActuatorCommand track(const Reference& ref, const world::UavState& estimate, const world::TrackingGains& gains,
                      const world::PlantParams& plant);

/// Gaussian position and velocity noise; everything else passes through.
world::UavState sense(const world::UavState& truth, double sigma_position, double sigma_velocity, Rng& rng);

}  // namespace towerfleet::sim
