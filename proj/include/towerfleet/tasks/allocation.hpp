#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "towerfleet/world/scenario.hpp"

namespace towerfleet::tasks {

using TaskKind = world::MissionTask::Kind;

/**
 * @brief Unit of work the manager assigns to a single vehicle.
 *
 * A Safety mission entry with team size g becomes g tasks, one per formation slot.
 */
struct Task {
  int id = 0;
  TaskKind kind = TaskKind::Idle;
  std::vector<std::string> regions;  // Inspect, in visiting order
  std::vector<double> deadlines;     // Inspect; empty = generated at dispatch
  std::string worker;                // Safety
  world::FormationGeometry geometry; // Safety
  int slot = 0;                      // Safety
  int team_size = 1;                 // Safety
  int station = -1;                  // Recharge
  world::CapabilitySet capabilities;
  double duration = 0.0;             // s, estimated work once at `start`; travel excluded
  world::Vec3 start;                 // where the work begins
  world::Vec3 finish;                // where the vehicle is when it is done
  bool located = true;               // false for Idle: no travel needed

  bool operator==(const Task&) const = default;
};

/// Allocation view of one vehicle.
struct Candidate {
  int id = 0;
  world::Vec3 position;          // where the vehicle becomes free
  double endurance = 0.0;        // s
  double committed = 0.0;        // s of work already queued
  world::CapabilitySet capabilities;

  bool operator==(const Candidate&) const = default;
};

struct AllocationParams {
  double v_max = 3.0;
  double a_max = 2.5;
  double reserve_fraction = 0.2;
};

struct Allocation {
  std::vector<int> assignee;   // per task: vehicle id, or -1 when pending
  double total_travel = 0.0;   // s, over assigned pairs
  int assigned = 0;

  bool operator==(const Allocation&) const = default;
};

class NoActiveVehicleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// battery_energy / discharge_rate. Throws std::invalid_argument for a non-positive rate.
double estimate_endurance(const world::UavState& state, double discharge_rate);

/// Time-optimal rest-to-rest bound over the Euclidean distance (triangular or trapezoidal profile).
double travel_time(const world::Vec3& from, const world::Vec3& to, double v_max, double a_max);

/// Travel from the candidate to the task start; 0 for unlocated tasks.
double travel_to(const Candidate& c, const Task& t, const AllocationParams& p);

/// Capabilities contained and endurance >= (1 + reserve) * (committed + travel + duration).
bool feasible(const Candidate& c, const Task& t, const AllocationParams& p);

/**
 * @brief One task per vehicle at most.
 *
 * Maximizes the number of assigned tasks, then minimizes total travel time over feasible pairs.
 * Exhaustive for up to 6 tasks and 6 vehicles, greedy cheapest-pair-first beyond. Ties go to
 * the lowest vehicle id in task order. Throws NoActiveVehicleError when `candidates` is empty.
 */
Allocation allocate(const std::vector<Task>& tasks, const std::vector<Candidate>& candidates,
                    const AllocationParams& params);

}  // namespace towerfleet::tasks
