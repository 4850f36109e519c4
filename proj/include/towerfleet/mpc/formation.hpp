#pragma once

#include <stdexcept>
#include <vector>

#include "towerfleet/world/types.hpp"

namespace towerfleet::mpc {

struct SlotPose {
  world::Vec3 position;
  double heading = 0.0;  // points at the worker

  bool operator==(const SlotPose&) const = default;
};

/**
 * Slots on a circle of radius distance*cos(elevation) around the worker at height
 * worker.z + distance*sin(elevation), azimuths azimuth_center + (i - (g-1)/2) inter_uav_angle.
 */
std::vector<SlotPose> formation_slots(const world::Vec3& worker, const world::FormationGeometry& geometry, int g);

/// Worker bearing relative to the camera axis.
struct PerceptionState {
  double azimuth_error = 0.0;    // worker azimuth minus heading, wrapped
  double elevation_error = 0.0;  // worker elevation minus mount pitch, wrapped
  double distance = 0.0;

  bool operator==(const PerceptionState&) const = default;
};

class DegenerateBearingError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Throws DegenerateBearingError when the worker coincides with the vehicle.
PerceptionState perception(const world::Vec3& position, double heading, const world::Vec3& worker,
                           const world::CameraParams& camera);

/// w_h * azimuth_error^2 + w_v * elevation_error^2.
double visibility_cost(const world::UavState& state, const world::WorkerState& worker,
                       const world::CameraParams& camera, double w_h, double w_v);

/// Worker inside both half-angles of the field of view.
bool in_field_of_view(const PerceptionState& z, const world::CameraParams& camera);

}  // namespace towerfleet::mpc
