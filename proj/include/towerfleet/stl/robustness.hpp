#pragma once

#include <span>
#include <vector>

#include "towerfleet/stl/formula.hpp"

namespace towerfleet::stl {

/**
 * @brief Exact quantitative semantics at step k.
 *
 * Predicate -> mu(s_k); And -> min; Or -> max; G[a,b] -> min over k+a..k+b;
 * F[a,b] -> max over k+a..k+b. Throws EvaluationError when a window leaves the trace.
 */
double robustness(const Formula& formula, const Trace& trace, std::size_t k = 0);

/// Exact robustness of the formula at every step in [k_first, k_last].
std::vector<double> robustness_signal(const Formula& formula, const Trace& trace, std::size_t k_first,
                                      std::size_t k_last);

/**
 * @brief Smoothed robustness: min and max replaced by log-sum-exp with sharpness kappa.
 *
 * soft-min(a) = -(1/kappa) ln sum exp(-kappa a_i), soft-max(a) = (1/kappa) ln sum exp(kappa a_i).
 * Single-operand nodes are exact. Throws std::invalid_argument for kappa <= 0.
 */
double smooth_robustness(const Formula& formula, const Trace& trace, std::size_t k, double kappa);

struct SmoothValueAndGradient {
  double value = 0.0;
  /// d value / d trace sample entries, laid out like Trace::data().
  std::vector<double> gradient;
};

/// Smoothed robustness together with its exact gradient (reverse accumulation through the tree).
SmoothValueAndGradient smooth_robustness_gradient(const Formula& formula, const Trace& trace, std::size_t k,
                                                  double kappa);

double soft_min(std::span<const double> values, double kappa);
double soft_max(std::span<const double> values, double kappa);

}  // namespace towerfleet::stl
