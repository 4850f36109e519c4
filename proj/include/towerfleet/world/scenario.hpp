#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "towerfleet/world/settings.hpp"
#include "towerfleet/world/types.hpp"

namespace towerfleet::world {

struct FleetMember {
  int id = 0;
  UavState initial;
  CameraParams camera;
  double discharge_rate = 10.0;  // W, nominal idle draw

  bool operator==(const FleetMember&) const = default;
};

/// Worker with a scripted path walked at constant speed, holding at the last waypoint.
struct WorkerScript {
  WorkerState initial;
  std::vector<Vec3> waypoints;
  double speed = 0.5;  // m/s

  bool operator==(const WorkerScript&) const = default;
};

/// Operator-level mission entry; the task manager turns these into tasks.
struct MissionTask {
  enum class Kind : std::uint8_t { Inspect, Safety, Idle, Recharge, Land };
  Kind kind = Kind::Idle;
  std::vector<std::string> regions;  // Inspect
  std::vector<double> deadlines;     // Inspect, seconds after dispatch; empty = generated
  std::string worker;                // Safety
  FormationGeometry geometry;        // Safety
  int team_size = 1;
  double duration = 0.0;             // Safety/Idle, s
  int station = 0;                   // Recharge
  CapabilitySet capabilities;

  bool operator==(const MissionTask&) const = default;
};

std::string to_string(MissionTask::Kind k);
MissionTask::Kind mission_kind_from_string(const std::string& s);

/// Command issued by the ground operator, either scripted or through the gateway.
struct OperatorCommand {
  enum class Kind : std::uint8_t { SetFormation, AssignInspection, InjectFailure, Pause, Resume, SetSpeed };
  Kind kind = Kind::Pause;
  std::optional<double> distance;
  std::optional<double> azimuth_center;
  std::optional<double> elevation;
  std::optional<double> inter_uav_angle;
  std::vector<std::string> regions;
  std::vector<double> deadlines;
  int uav = -1;
  double speed = 1.0;

  bool operator==(const OperatorCommand&) const = default;
};

std::string to_string(OperatorCommand::Kind k);

struct ScenarioEvent {
  enum class Kind : std::uint8_t { BatteryAnomaly, UavFailure, Operator };
  double time = 0.0;
  Kind kind = Kind::Operator;
  int uav = -1;
  double factor = 1.0;  // discharge multiplier for BatteryAnomaly
  OperatorCommand command;

  bool operator==(const ScenarioEvent&) const = default;
};

struct Scenario {
  std::string name;
  std::vector<Tower> towers;
  std::vector<WireSegment> wires;
  std::vector<TargetRegion> regions;
  std::vector<WorkerScript> workers;
  std::vector<FleetMember> fleet;
  std::vector<Vec3> stations;
  std::vector<MissionTask> mission;
  double v_max = 3.0;
  double a_max = 2.5;
  double separation_min = 1.0;
  double ts = 0.1;
  std::uint64_t seed = 0;
  std::vector<ScenarioEvent> events;
  Settings settings;

  const TargetRegion* find_region(const std::string& id) const;
  const FleetMember* find_uav(int id) const;
  const WorkerScript* find_worker(const std::string& id) const;

  bool operator==(const Scenario&) const = default;
};

/// One broken rule; `field` names where, `rule` names which invariant.
struct Violation {
  std::string field;
  std::string rule;
  std::string context;  // e.g. source line, filled in by load_scenario

  bool operator==(const Violation&) const = default;
};

/// Empty iff every type invariant holds.
std::vector<Violation> validate_scenario(const Scenario& scenario);

}  // namespace towerfleet::world
