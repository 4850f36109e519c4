#pragma once

#include <span>
#include <string>
#include <vector>

#include "towerfleet/mpc/formation.hpp"
#include "towerfleet/world/settings.hpp"
#include "towerfleet/world/types.hpp"

namespace towerfleet::mpc {

using world::MpcParams;

/// Everything one vehicle's controller sees at a replanning instant.
struct MpcInput {
  world::UavState current;
  SlotPose slot;                      // desired pose now; moves with the worker velocity over the horizon
  world::Vec3 worker_position;        // filtered estimate
  world::Vec3 worker_velocity;        // constant-velocity extrapolation
  world::CameraParams camera;
  /// Last published predictions of the other formation vehicles, samples 0..W on this solve's grid.
  std::vector<std::vector<world::Vec3>> neighbors;
  std::span<const world::Tower> towers;
  std::span<const world::WireSegment> wires;
};

struct WarmStart {
  std::vector<world::Vec3> accelerations;
  std::vector<double> heading_rates;
};

enum class MpcStatus { Converged, Degraded };

std::string to_string(MpcStatus s);

struct Residuals {
  double max_equality = 0.0;    // largest |r|: dynamics defects of the predicted states
  double max_inequality = 0.0;  // largest positive h, 0 when every constraint holds
  std::string worst;            // name of the constraint attaining max_inequality
};

struct MpcSolution {
  MpcStatus status = MpcStatus::Degraded;
  double dt = 0.1;
  std::vector<world::Vec3> accelerations;  // W controls
  std::vector<double> heading_rates;       // W controls
  std::vector<world::UavState> predicted;  // W + 1 states, predicted[0] = current
  std::vector<PerceptionState> perception; // W + 1
  double action_cost = 0.0;                // J: tracking, its derivatives, effort, jerk, yaw rate
  double perception_cost = 0.0;            // J_p: visibility over the horizon
  Residuals residuals;
  int iterations = 0;                      // outer linearization passes
  int qp_iterations = 0;
  std::string note;                        // reason for degraded mode
};

/**
 * @brief One receding-horizon solve.
 *
 * Accelerations are piecewise constant over W intervals of T_h / W; heading is a single
 * integrator driven by the rate. Nonconvex constraints are linearized around the previous
 * iterate (inner approximations for the distance floor, separation and obstacles) and each
 * pass solves a dense QP. When the QP is infeasible or the true constraints are still violated
 * after the pass limit the result is a braking sequence with status Degraded.
 */
MpcSolution solve_step(const MpcInput& input, const MpcParams& params, const WarmStart& warm = {});

/// Shift by one interval, duplicating the last control. Empty previous gives zeros.
WarmStart advance(const MpcSolution& previous, int shooting_points);

/// Dynamics defects and constraint violations of a solution, from the true nonlinear constraints.
Residuals evaluate_residuals(const MpcInput& input, const MpcParams& params, const MpcSolution& solution);

/// Full-authority deceleration to hover, heading held.
MpcSolution braking_sequence(const MpcInput& input, const MpcParams& params, std::string note);

}  // namespace towerfleet::mpc
