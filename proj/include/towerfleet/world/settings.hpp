#pragma once

// Tunable parameters carried by scenario files. Every field has a default so that
// scenario documents only need to state what they change.

#include <cstdint>
#include <map>
#include <string>

namespace towerfleet::world {

/// Inspection trajectory optimizer.
struct PlannerSettings {
  double ts = 0.1;                 // s, sampling period of planned trajectories
  double obstacle_margin = 1.0;    // m
  int iterations = 400;            // per restart
  int restarts = 5;
  double kappa_initial = 10.0;
  double kappa_max = 80.0;
  double cruise_fraction = 0.8;    // fraction of v_max used by the initial guess
  int tower_faces = 16;            // prism faces approximating each tower in the formula
  bool stop_on_success = true;     // skip remaining restarts once robustness > 0

  bool operator==(const PlannerSettings&) const = default;
};

/// Receding-horizon safety controller.
struct MpcParams {
  double horizon = 2.0;            // s
  int shooting_points = 20;
  double w_track = 4.0;            // slot position error
  double w_track_rate = 1.0;       // first time derivative of the tracking error
  double w_track_accel = 0.2;      // second time derivative of the tracking error
  double w_effort = 0.05;
  double w_jerk = 0.02;
  double w_visibility_h = 2.0;
  double w_visibility_v = 2.0;
  double w_yaw_rate = 0.05;
  double d_min = 2.0;
  double d_max = 8.0;
  double separation_min = 1.0;
  double obstacle_margin = 1.0;
  double v_max = 3.0;
  double a_max = 2.5;
  double yaw_rate_max = 1.5;
  int max_outer_iterations = 5;
  double tolerance = 1e-4;
  double replan_period = 0.1;      // s

  bool operator==(const MpcParams&) const = default;
};

/// Flat plant with a first-order lag standing in for the attitude and rate loops.
struct PlantParams {
  double lag = 0.15;               // s
  double a_max = 4.0;              // hardware clamp, m/s^2 per axis
  double yaw_rate_max = 2.0;       // rad/s
  double accel_power = 4.0;        // W per m/s^2 of actual acceleration

  bool operator==(const PlantParams&) const = default;
};

struct TrackingGains {
  double kp = 4.0;
  double kv = 4.0;
  double k_heading = 2.0;

  bool operator==(const TrackingGains&) const = default;
};

struct SensingNoise {
  double sigma_position = 0.02;    // m
  double sigma_velocity = 0.02;    // m/s
  double sigma_worker = 0.05;      // m, worker position measurement

  bool operator==(const SensingNoise&) const = default;
};

struct TopicConfig {
  double rate = 100.0;             // Hz
  double latency = 0.0;            // s
  double drop_probability = 0.0;
  std::uint64_t stream = 0;

  bool operator==(const TopicConfig&) const = default;
};

struct ManagerSettings {
  double tick_period = 1.0;        // s
  double critical_endurance = 60.0;// s
  double reserve_fraction = 0.2;
  double deadline_slack = 2.0;     // s added per region to generated deadlines
  double deadline_padding = 10.0;  // s added to generated deadlines

  bool operator==(const ManagerSettings&) const = default;
};

struct SimSettings {
  double dt = 0.01;                // master step
  double telemetry_period = 0.1;
  double snapshot_period = 0.1;
  double worker_filter_tau = 0.5;
  double safety_violation_allowance = 0.1;  // m, tracking allowance on planned clearances
  double fov_transient = 5.0;      // s excluded from field-of-view statistics
  double land_speed = 1.0;         // m/s

  bool operator==(const SimSettings&) const = default;
};

struct Settings {
  PlannerSettings planner;
  MpcParams mpc;
  PlantParams plant;
  TrackingGains tracking;
  SensingNoise sensing;
  ManagerSettings manager;
  SimSettings sim;
  std::map<std::string, TopicConfig> bus = default_bus();

  static std::map<std::string, TopicConfig> default_bus();

  bool operator==(const Settings&) const = default;
};

}  // namespace towerfleet::world
