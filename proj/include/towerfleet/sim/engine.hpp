#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "towerfleet/mpc/safety_mpc.hpp"
#include "towerfleet/planner/inspection.hpp"
#include "towerfleet/sim/bus.hpp"
#include "towerfleet/sim/mission_log.hpp"
#include "towerfleet/sim/plant.hpp"
#include "towerfleet/sim/worker.hpp"
#include "towerfleet/tasks/task_manager.hpp"
#include "towerfleet/world/geometry.hpp"

namespace towerfleet::sim {

enum class Mode : std::uint8_t { Hover, Inspect, Safety, Idle, Recharge, Land, Landed };

std::string to_string(Mode m);

/// Component schedule in master steps; every period must be an integer multiple of dt.
struct SimClock {
  double dt = 0.01;
  std::int64_t manager = 100;
  std::int64_t telemetry = 10;
  std::int64_t snapshot = 10;
  std::int64_t mpc = 10;
  std::int64_t plan_sample = 10;

  /// Throws ConfigurationError when a period is not a positive multiple of dt.
  static SimClock from(const world::Scenario& scenario);
};

struct MpcStats {
  std::int64_t solves = 0;
  std::int64_t converged = 0;
  std::int64_t degraded = 0;
  std::int64_t converged_violations = 0;  // converged solves with a residual above the tolerance
  double max_converged_inequality = 0.0;
  double max_converged_equality = 0.0;
};

struct ExecutedPlan {
  double t0 = 0.0;
  std::vector<int> uavs;
  double planned_robustness = 0.0;
  double executed_robustness = 0.0;
};

struct Metrics {
  std::int64_t steps = 0;
  double min_pairwise_distance = world::kNoObstacle;
  double min_obstacle_clearance = world::kNoObstacle;
  std::int64_t separation_violations = 0;  // steps below separation_min minus the allowance
  std::int64_t clearance_violations = 0;   // steps below obstacle_margin minus the allowance
  std::int64_t fov_samples = 0;
  std::int64_t fov_inside = 0;
  double max_tracking_error = 0.0;         // truth against the planned inspection reference
  MpcStats mpc;
  std::vector<ExecutedPlan> executed;
  std::map<std::string, double> region_completion;
  std::map<int, double> task_completion;
  std::vector<std::string> planner_failures;
  bool mission_complete = false;
  double mission_complete_time = -1.0;
  std::int64_t safety_violations() const { return separation_violations + clearance_violations; }
  double fov_fraction() const;
};

void to_json(nlohmann::json& j, const Metrics& m);

/**
 * @brief Fixed-step closed-loop simulation of the fleet, the worker, the bus and the task manager.
 *
 * One step at t = n dt: scenario events, bus deliveries to the manager, manager tick, command
 * delivery to the vehicles, safety controller solves, region bookkeeping, telemetry, snapshot,
 * metrics, then tracking and the plant advance every vehicle to t + dt.
 */
class Engine {
 public:
  /// Throws world::ScenarioValidationError or ConfigurationError.
  Engine(const world::Scenario& scenario, std::uint64_t seed);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void step();
  /// Steps until round(duration / dt) steps have run in total.
  void run_until(double duration);

  std::int64_t step_index() const { return step_; }
  double time() const;
  const SimClock& clock() const { return clock_; }

  /// Operator command from outside the scenario; logged like a scripted one, applied at the next manager tick.
  void submit(const world::OperatorCommand& command);

  /// Public state at the current step.
  nlohmann::json snapshot() const;
  /// Snapshots logged so far, one per snapshot period.
  std::size_t snapshot_count() const { return log_.snapshots.size(); }
  const nlohmann::json& snapshot_at(std::size_t i) const { return log_.snapshots.at(i); }
  const Metrics& metrics() const { return metrics_; }
  const tasks::TaskManager& manager() const { return manager_; }
  const world::UavState& truth(int uav) const;
  Mode mode(int uav) const;

  /// Final bus statistics and metrics are filled in; the engine can keep stepping afterwards.
  MissionLog log() const;

 private:
  struct Vehicle;
  struct Job;

  double stamp(std::int64_t n) const;
  void apply_events();
  void deliver();
  void manager_tick();
  void handle(const tasks::Command& c);
  void replan_inspection(const std::vector<int>& requested);
  void fail_job(const std::vector<int>& uavs, const std::string& reason);
  void solve_safety(Vehicle& v);
  void bookkeeping();
  void publish_telemetry();
  void record_metrics();
  void advance_vehicles();
  Reference reference(const Vehicle& v, double t) const;
  void hold(Vehicle& v, Mode mode);
  void finish_task(Vehicle& v);
  void event(nlohmann::json e);

  world::Scenario scenario_;
  std::uint64_t seed_;
  SimClock clock_;
  Bus bus_;
  int telemetry_sub_ = -1, command_sub_ = -1, worker_sub_ = -1, prediction_sub_ = -1;
  tasks::TaskManager manager_;
  std::vector<std::unique_ptr<Vehicle>> vehicles_;
  std::vector<WorkerPath> worker_paths_;
  std::vector<WorkerFilter> worker_filters_;
  std::vector<Rng> worker_rngs_;
  std::map<int, PredictionMsg> predictions_;
  std::vector<world::ScenarioEvent> events_;
  std::size_t next_event_ = 0;
  std::vector<tasks::Command> inbox_;
  std::int64_t step_ = 0;
  Metrics metrics_;
  MissionLog log_;
  std::deque<nlohmann::json> recent_decisions_;
  bool complete_logged_ = false;
};

/// Runs a fresh engine for `duration` seconds.
MissionLog run(const world::Scenario& scenario, double duration, std::uint64_t seed);

}  // namespace towerfleet::sim
