#include "towerfleet/mpc/formation.hpp"

#include <cmath>

namespace towerfleet::mpc {

using world::Vec3;

std::vector<SlotPose> formation_slots(const Vec3& worker, const world::FormationGeometry& geometry, int g) {
  if (g < 1) throw std::invalid_argument("formation needs at least one vehicle");
  const double radius = geometry.distance * std::cos(geometry.elevation);
  const double lift = geometry.distance * std::sin(geometry.elevation);
  std::vector<SlotPose> slots;
  for (int i = 0; i < g; ++i) {
    const double az = geometry.azimuth_center + (i - 0.5 * (g - 1)) * geometry.inter_uav_angle;
    const Vec3 offset{radius * std::cos(az), radius * std::sin(az), lift};
    slots.push_back(SlotPose{worker + offset, world::wrap_angle(az + M_PI)});
  }
  return slots;
}

PerceptionState perception(const Vec3& position, double heading, const Vec3& worker,
                           const world::CameraParams& camera) {
  const Vec3 d = worker - position;
  const double dist = world::norm(d);
  if (!(dist > 0.0)) throw DegenerateBearingError("worker coincides with the vehicle");
  PerceptionState z;
  z.distance = dist;
  z.azimuth_error = world::wrap_angle(std::atan2(d.y, d.x) - heading);
  z.elevation_error = world::wrap_angle(std::atan2(d.z, world::horizontal_norm(d)) - camera.mount_pitch);
  return z;
}

double visibility_cost(const world::UavState& state, const world::WorkerState& worker,
                       const world::CameraParams& camera, double w_h, double w_v) {
  const auto z = perception(state.position, state.heading, worker.position, camera);
  return w_h * z.azimuth_error * z.azimuth_error + w_v * z.elevation_error * z.elevation_error;
}

bool in_field_of_view(const PerceptionState& z, const world::CameraParams& camera) {
  return std::abs(z.azimuth_error) <= 0.5 * camera.fov_horizontal &&
         std::abs(z.elevation_error) <= 0.5 * camera.fov_vertical;
}

}  // namespace towerfleet::mpc
