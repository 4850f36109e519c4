#include "towerfleet/world/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace towerfleet::world {

double tower_signed_distance(const Vec3& p, const Tower& tower) {
  const double rho = std::hypot(p.x - tower.center.x, p.y - tower.center.y);
  const double top = tower.center.z + tower.height;
  const double radial = rho - tower.radius;  // > 0 outside the mantle
  const double vertical = p.z - top;         // > 0 above the cap
  if (radial <= 0.0 && vertical <= 0.0) {
    return std::max(radial, vertical);
  }
  const double r = std::max(radial, 0.0);
  const double v = std::max(vertical, 0.0);
  return std::hypot(r, v);
}

double wire_signed_distance(const Vec3& p, const WireSegment& wire) {
  const Vec3 c = closest_point_on_segment(p, wire.endpoint_a, wire.endpoint_b);
  return norm(p - c) - wire.clearance_radius;
}

Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) return a;
  const double s = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return a + s * ab;
}

Vec3 tower_distance_gradient(const Vec3& p, const Tower& tower) {
  const double dx = p.x - tower.center.x;
  const double dy = p.y - tower.center.y;
  const double rho = std::hypot(dx, dy);
  const double top = tower.center.z + tower.height;
  const double radial = rho - tower.radius;
  const double vertical = p.z - top;
  const Vec3 radial_dir = rho > 0.0 ? Vec3{dx / rho, dy / rho, 0.0} : Vec3{};
  if (radial <= 0.0 && vertical <= 0.0) {
    return radial >= vertical ? radial_dir : Vec3{0.0, 0.0, 1.0};
  }
  const double r = std::max(radial, 0.0);
  const double v = std::max(vertical, 0.0);
  const double d = std::hypot(r, v);
  return (r / d) * radial_dir + Vec3{0.0, 0.0, v / d};
}

Vec3 wire_distance_gradient(const Vec3& p, const WireSegment& wire) {
  const Vec3 d = p - closest_point_on_segment(p, wire.endpoint_a, wire.endpoint_b);
  const double n = norm(d);
  return n > 0.0 ? d / n : Vec3{};
}

double distance_to_obstacles(const Vec3& p, std::span<const Tower> towers, std::span<const WireSegment> wires) {
  double best = kNoObstacle;
  for (const auto& t : towers) best = std::min(best, tower_signed_distance(p, t));
  for (const auto& w : wires) best = std::min(best, wire_signed_distance(p, w));
  return best;
}

bool in_region(const Vec3& p, const TargetRegion& region) {
  const Vec3 d = p - region.center;
  return std::abs(d.x) <= region.half_extents.x && std::abs(d.y) <= region.half_extents.y &&
         std::abs(d.z) <= region.half_extents.z;
}

}  // namespace towerfleet::world
