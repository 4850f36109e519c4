#pragma once

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "towerfleet/tasks/allocation.hpp"

namespace towerfleet::tasks {

struct Command {
  enum class Kind : std::uint8_t { Inspect, Safety, Idle, Recharge, Land, Fail, SetFormation };
  Kind kind = Kind::Idle;
  int uav = 0;
  int task_id = -1;
  std::vector<std::string> regions;
  std::vector<double> deadlines;
  std::string worker;
  world::FormationGeometry geometry;
  int slot = 0;
  int team_size = 1;
  double duration = 0.0;
  int station = -1;
  world::Vec3 target;  // Recharge: station position

  bool operator==(const Command&) const = default;
};

std::string to_string(Command::Kind k);
void to_json(nlohmann::json& j, const Command& c);

/// What the manager hears from one vehicle.
struct UavTelemetry {
  int id = 0;
  double time = 0.0;
  world::UavState state;
  int task_id = -1;          // task being executed, -1 when none
  double progress = 0.0;     // fraction of the current task, Safety/Idle
  bool task_done = false;
  std::vector<std::string> completed_regions;  // of the current Inspect task

  bool operator==(const UavTelemetry&) const = default;
};

struct Plan {
  double created = 0.0;
  std::map<int, std::deque<Task>> assignment;  // front is the task in execution
  std::map<int, double> margins;               // s, endurance minus reserved remaining work
  std::vector<Task> pending;

  bool operator==(const Plan&) const = default;
};

/// One record of the decision log.
struct Decision {
  double time = 0.0;
  std::string branch;  // emergency, feasibility, dispatch, operator, none
  std::vector<Command> commands;
  std::map<int, std::vector<int>> assignments;
  std::map<int, double> margins;
  std::map<int, double> endurance;
  std::vector<int> pending;
  std::vector<std::string> notes;

  bool operator==(const Decision&) const = default;
};

void to_json(nlohmann::json& j, const Decision& d);

struct TickResult {
  std::vector<Command> commands;
  Decision decision;
};

/**
 * @brief Behavior-tree executive.
 *
 * Each tick runs one pass of a priority selector; the first branch whose condition holds acts
 * and the tick ends:
 *   emergency    failed vehicles and vehicles under the critical endurance land; their work is orphaned
 *   feasibility  orphaned work or a negative endurance margin triggers re-allocation
 *   dispatch     next tasks are commanded and pending tasks are allocated
 *   operator     queued operator commands are applied
 */
class TaskManager {
 public:
  explicit TaskManager(const world::Scenario& scenario);

  void observe(const UavTelemetry& telemetry);
  void enqueue(const world::OperatorCommand& command);
  /// The planner could not satisfy a task; it is dropped and the mission cannot complete.
  void report_failure(int uav, int task_id, const std::string& reason);

  TickResult tick(double time);

  const Plan& plan() const { return plan_; }
  bool mission_complete() const;
  const std::vector<std::string>& failures() const { return failures_; }
  /// Remaining reserved work of a vehicle's queue, s.
  double remaining_work(int uav) const;

 private:
  struct Vehicle {
    int id = 0;
    world::CapabilitySet capabilities;
    double nominal_rate = 10.0;
    bool have_telemetry = false;
    UavTelemetry last;
    double prev_energy = 0.0;
    double prev_time = -1.0;
    double rate = 10.0;
    double endurance = 0.0;
    bool grounded = false;     // landing or landed on command
    int dispatched = -1;       // task id of the last command sent for the queue front
  };

  Task make_task(const world::MissionTask& m, int slot);
  void refresh_inspect(Task& t) const;
  std::vector<Candidate> candidates(const std::set<int>& exclude) const;
  /// Repeated one-to-one rounds until nothing more fits; returns what stayed unassigned.
  std::vector<Task> assign(std::vector<Task> pool, const std::set<int>& exclude, Decision& d);
  std::vector<Command> dispatch_fronts(Decision& d);
  Command command_for(int uav, const Task& t) const;
  void update_margins();

  world::Scenario scenario_;
  AllocationParams alloc_;
  double critical_;
  std::map<int, Vehicle> vehicles_;
  Plan plan_;
  std::deque<world::OperatorCommand> operator_queue_;
  std::vector<Task> orphans_;
  std::vector<std::string> failures_;
  int next_task_id_ = 1;
};

}  // namespace towerfleet::tasks
