#pragma once

#include <vector>

#include "towerfleet/world/scenario.hpp"

namespace towerfleet::sim {

/// Scripted worker: start position, then each waypoint in turn at constant speed, holding at the last.
class WorkerPath {
 public:
  explicit WorkerPath(const world::WorkerScript& script);

  /// Truth at time t >= 0, evaluated in closed form so long runs do not accumulate error.
  world::WorkerState at(double t) const;

 private:
  world::WorkerScript script_;
  std::vector<double> arrival_;  // time of reaching each waypoint
};

/// Alpha-beta tracker on worker position fixes. alpha = min(1, 2 dt / tau), beta = alpha^2 / (2 - alpha).
class WorkerFilter {
 public:
  WorkerFilter(double dt, double tau);

  void update(const world::Vec3& measurement, double time);
  /// Constant-velocity extrapolation of the current estimate to `time`.
  world::Vec3 position(double time) const;
  const world::Vec3& velocity() const { return velocity_; }
  bool initialized() const { return initialized_; }

 private:
  double alpha_;
  double beta_;
  double dt_;
  bool initialized_ = false;
  double time_ = 0.0;
  world::Vec3 position_;
  world::Vec3 velocity_;
};

}  // namespace towerfleet::sim
