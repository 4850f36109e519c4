#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace towerfleet::world {

/**
 * @brief Cartesian 3-vector in the world frame (meters, z up).
 */
struct Vec3 {
  double x{};
  double y{};
  double z{};

  bool operator==(const Vec3&) const = default;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return Vec3{a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return Vec3{a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator-(const Vec3& v) { return Vec3{-v.x, -v.y, -v.z}; }
inline Vec3 operator*(double s, const Vec3& v) { return Vec3{s * v.x, s * v.y, s * v.z}; }
inline Vec3 operator*(const Vec3& v, double s) { return s * v; }
inline Vec3 operator/(const Vec3& v, double s) { return Vec3{v.x / s, v.y / s, v.z / s}; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) { a = a + b; return a; }
inline Vec3& operator-=(Vec3& a, const Vec3& b) { a = a - b; return a; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double norm_inf(const Vec3& v) { return std::max({std::abs(v.x), std::abs(v.y), std::abs(v.z)}); }
inline double horizontal_norm(const Vec3& v) { return std::hypot(v.x, v.y); }
inline bool is_finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

/// Component access by axis index 0..2.
inline double axis(const Vec3& v, int j) { return j == 0 ? v.x : (j == 1 ? v.y : v.z); }
inline double& axis(Vec3& v, int j) { return j == 0 ? v.x : (j == 1 ? v.y : v.z); }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::atan2(std::sin(a), std::cos(a));
  if (w <= -M_PI) w = M_PI;
  return w;
}

enum class UavStatus : std::uint8_t { Active, Failed, Landed };

std::string to_string(UavStatus s);
UavStatus uav_status_from_string(const std::string& s);

using CapabilitySet = std::set<std::string>;

inline const std::string kInspectionCamera = "inspection-camera";
inline const std::string kSafetyCamera = "safety-camera";

/**
 * @brief Per-vehicle truth record.
 *
 * Failed and landed vehicles receive zero commanded acceleration from the engine.
 */
struct UavState {
  Vec3 position{};
  Vec3 velocity{};
  Vec3 acceleration{};
  double heading = 0.0;         // rad, (-pi, pi]
  double heading_rate = 0.0;    // rad/s
  double battery_energy = 0.0;  // J
  CapabilitySet capabilities;
  UavStatus status = UavStatus::Active;

  bool operator==(const UavState&) const = default;
};

/// Eye-in-hand pinhole camera; pointing comes from the vehicle heading.
struct CameraParams {
  double fov_horizontal = 1.2;  // rad
  double fov_vertical = 0.9;    // rad
  double mount_pitch = 0.0;     // rad, negative looks down

  bool operator==(const CameraParams&) const = default;
};

/// Vertical cylinder standing on the ground plane through `center`.
struct Tower {
  Vec3 center{};
  double radius = 15.0;
  double height = 20.0;
  std::vector<Vec3> insulators;

  bool operator==(const Tower&) const = default;
};

/// Conductor modeled as a capsule around the segment a-b.
struct WireSegment {
  Vec3 endpoint_a{};
  Vec3 endpoint_b{};
  double clearance_radius = 0.5;

  bool operator==(const WireSegment&) const = default;
};

/// Axis-aligned inspection box. `viewpoint` is where the vehicle stands while inspecting.
struct TargetRegion {
  std::string id;
  Vec3 center{};
  Vec3 half_extents{};
  double dwell_time = 0.0;  // s
  Vec3 viewpoint{};

  bool operator==(const TargetRegion&) const = default;
};

struct WorkerState {
  std::string id;
  Vec3 position{};
  Vec3 velocity{};

  bool operator==(const WorkerState&) const = default;
};

/// Safety formation parameters relative to the tracked worker.
struct FormationGeometry {
  double distance = 5.0;         // m
  double azimuth_center = 0.0;   // rad, world frame
  double elevation = 0.0;        // rad
  double inter_uav_angle = 0.7;  // rad

  bool operator==(const FormationGeometry&) const = default;
};

}  // namespace towerfleet::world
