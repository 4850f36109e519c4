#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace towerfleet::sim {

/**
 * @brief Everything a run records, written as one directory:
 *
 *   telemetry.csv     t,uav,px,py,pz,vx,vy,vz,ax,ay,az,psi,battery,status (truth, telemetry period)
 *   commands.jsonl    one line per manager command: t, published, command
 *   decisions.jsonl   one line per manager tick
 *   events.jsonl      scenario events, operator commands and mission milestones
 *   snapshots.jsonl   one public state snapshot per snapshot period
 *   bus_stats.json    per-topic counters
 *   metrics.json      safety and mission metrics
 */
struct MissionLog {
  std::string telemetry_csv;
  std::vector<nlohmann::json> commands;
  std::vector<nlohmann::json> decisions;
  std::vector<nlohmann::json> events;
  std::vector<nlohmann::json> snapshots;
  nlohmann::json bus_stats = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();

  void write(const std::filesystem::path& dir) const;
};

inline constexpr const char* kTelemetryHeader = "t,uav,px,py,pz,vx,vy,vz,ax,ay,az,psi,battery,status\n";

/// Exit status of a run: 0 success, 1 mission failure, 2 configuration error.
struct Outcome {
  int code = 0;
  std::string reason;  // ok, planner-failure, safety-violation, mission-incomplete, configuration-error
  std::string detail;
};

void to_json(nlohmann::json& j, const Outcome& o);

/// Success iff metrics report zero safety violations and a complete mission.
Outcome assess(const MissionLog& log);

/// Reads a directory written by MissionLog::write.
MissionLog read_mission_log(const std::filesystem::path& dir);

}  // namespace towerfleet::sim
