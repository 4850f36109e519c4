#pragma once

#include <limits>
#include <span>

#include "towerfleet/world/types.hpp"

namespace towerfleet::world {

/// Value returned by distance queries over an empty obstacle set.
inline constexpr double kNoObstacle = std::numeric_limits<double>::infinity();

/**
 * @brief Signed distance to a tower cylinder.
 *
 * The cylinder is anchored in the ground: it extends downward without a bottom face,
 * so a point inside is only released through the mantle or the top cap.
 */
double tower_signed_distance(const Vec3& p, const Tower& tower);

/// Signed distance to the capsule of radius `clearance_radius` around the wire segment.
double wire_signed_distance(const Vec3& p, const WireSegment& wire);

/// Closest point on segment a-b to p.
Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);

/// Unit gradient of the signed distance. Zero vector where undefined (on the axis, on the segment).
Vec3 tower_distance_gradient(const Vec3& p, const Tower& tower);
Vec3 wire_distance_gradient(const Vec3& p, const WireSegment& wire);

/**
 * @brief Minimum signed distance to every tower and wire; negative inside an obstacle.
 *
 * Returns kNoObstacle (+infinity) when both lists are empty.
 */
double distance_to_obstacles(const Vec3& p, std::span<const Tower> towers, std::span<const WireSegment> wires);

/// Closed-box membership: |p - center| <= half_extents componentwise.
bool in_region(const Vec3& p, const TargetRegion& region);

}  // namespace towerfleet::world
