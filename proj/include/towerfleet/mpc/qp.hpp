#pragma once

#include <Eigen/Dense>
#include <vector>

namespace towerfleet::mpc {

/**
 * Dense convex QP
 *
 *   minimize    0.5 x' G x + g' x
 *   subject to  Aeq' x + beq  = 0
 *               Ain' x + bin >= 0
 *
 * Constraints are columns of Aeq / Ain. G must be symmetric positive definite.
 */
struct QuadraticProgram {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::MatrixXd Ain;
  Eigen::VectorXd bin;
};

enum class QpStatus { Optimal, Infeasible, NotConvex, IterationLimit };

struct QpResult {
  QpStatus status = QpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Multipliers: equalities first, then inequalities (zero when inactive).
  Eigen::VectorXd multipliers;
  std::vector<int> active;  // indices into the inequality columns
  int iterations = 0;
};

/// Goldfarb-Idnani dual active-set method.
QpResult solve_qp(const QuadraticProgram& qp, int max_iterations = 1000);

}  // namespace towerfleet::mpc
