#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "towerfleet/stl/formula.hpp"
#include "towerfleet/world/scenario.hpp"

namespace towerfleet::planner {

struct RegionVisit {
  std::string region;
  double deadline = 0.0;  // s after plan start; the dwell must finish by then

  bool operator==(const RegionVisit&) const = default;
};

/**
 * @brief Multi-vehicle inspection request.
 *
 * `region_visits[i]` belongs to `uav_ids[i]`. `initial_states` is optional; when empty the
 * scenario's fleet initial states are used.
 */
struct InspectionTask {
  std::vector<int> uav_ids;
  std::vector<std::vector<RegionVisit>> region_visits;
  std::vector<world::UavState> initial_states;
  double horizon = 0.0;  // s
  double separation_min = 1.0;

  bool operator==(const InspectionTask&) const = default;
};

/**
 * Visits in the given order with deadlines relative to now. Explicit deadlines are used where
 * given; missing ones are generated from cruise travel between viewpoints, dwell and slack.
 */
std::vector<RegionVisit> schedule_visits(const world::Scenario& scenario, const world::Vec3& start,
                                         const std::vector<std::string>& regions,
                                         const std::vector<double>& deadlines = {});

/// Task with one UAV per mission Inspect entry of the scenario, in mission order.
InspectionTask task_from_scenario(const world::Scenario& scenario);

/// Infeasible or inconsistent task (deadline < dwell, unknown region, deadline past horizon, ...).
class InfeasibleTaskError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Signal layout used by the inspection formula: sample k holds p_x, p_y, p_z of every UAV in task order.
inline std::size_t position_index(std::size_t uav_slot, int axis) { return 3 * uav_slot + static_cast<std::size_t>(axis); }

/// Number of samples of a plan with the given horizon: round(T / Ts) + 1.
std::size_t sample_count(double horizon, double ts);

/**
 * @brief Inspection requirement as an STL formula over stacked positions.
 *
 * Top-level conjunction of labelled nodes:
 *   visit:uav<id>:<region>  F[0, (deadline - dwell)/Ts] G[0, dwell/Ts] (position in box)
 *   avoid:uav<id>:tower<i>  G over the horizon, outside the circumscribed prism of radius r + margin or above it
 *   avoid:uav<id>:wire<i>   G over the horizon, outside the wire's bounding box inflated by clearance + margin
 *   sep:uav<a>:uav<b>       G over the horizon, infinity-norm separation >= separation_min
 */
stl::Formula build_inspection_formula(const InspectionTask& task, const world::Scenario& scenario, double ts);

struct Trajectory {
  int uav_id = 0;
  std::vector<world::Vec3> p;
  std::vector<world::Vec3> v;
  /// a[k] drives sample k to k+1; the last entry is zero.
  std::vector<world::Vec3> a;
  /// Heading reference per sample.
  std::vector<double> psi;

  bool operator==(const Trajectory&) const = default;
};

struct PlanDiagnostics {
  int iterations = 0;       // gradient steps over all restarts
  int restarts = 0;         // restarts actually run
  int best_restart = 0;
  double smooth_objective = 0.0;  // smoothed robustness of the returned plan at final_kappa
  double final_kappa = 0.0;

  bool operator==(const PlanDiagnostics&) const = default;
};

struct PlanResult {
  double ts = 0.1;
  std::vector<Trajectory> trajectories;  // task order
  double robustness = 0.0;               // exact, of build_inspection_formula on the returned positions
  bool success = false;                  // robustness > 0
  /// Label of the top-level conjunct with the lowest robustness; set on failure.
  std::string most_violated;
  double most_violated_robustness = 0.0;
  PlanDiagnostics diagnostics;

  bool operator==(const PlanResult&) const = default;
};

/**
 * @brief Maximizes smoothed robustness over per-axis accelerations.
 *
 * Positions and velocities follow the discrete double integrator exactly. Accelerations are
 * kept within a_max and velocities within v_max per axis by a forward projection after every
 * step. Restarts anneal kappa; restart 0 starts from a tracked reference through the viewpoints.
 * A result with success == false is the structured failure: best-found trajectories plus the
 * most violated node.
 */
PlanResult plan_inspection(const InspectionTask& task, const world::Scenario& scenario, double v_max, double a_max,
                           double ts);

/// Heading schedule: viewpoint-to-center azimuth during each visit, velocity azimuth elsewhere.
std::vector<std::vector<double>> heading_reference(const InspectionTask& task, const PlanResult& plan,
                                                   const world::Scenario& scenario);

}  // namespace towerfleet::planner
