#include "towerfleet/sim/worker.hpp"

#include <algorithm>
#include <stdexcept>

namespace towerfleet::sim {

using world::Vec3;

WorkerPath::WorkerPath(const world::WorkerScript& script) : script_(script) {
  double t = 0.0;
  Vec3 from = script.initial.position;
  for (const Vec3& w : script.waypoints) {
    t += script.speed > 0.0 ? world::norm(w - from) / script.speed : 0.0;
    arrival_.push_back(t);
    from = w;
  }
}

world::WorkerState WorkerPath::at(double t) const {
  world::WorkerState s = script_.initial;
  s.velocity = {};
  if (script_.speed <= 0.0) return s;
  Vec3 from = script_.initial.position;
  double start = 0.0;
  for (std::size_t i = 0; i < script_.waypoints.size(); ++i) {
    const Vec3& to = script_.waypoints[i];
    if (t < arrival_[i]) {
      const double len = world::norm(to - from);
      const Vec3 dir = (1.0 / len) * (to - from);
      s.position = from + (script_.speed * (t - start)) * dir;
      s.velocity = script_.speed * dir;
      return s;
    }
    from = to;
    start = arrival_[i];
  }
  s.position = from;
  return s;
}

WorkerFilter::WorkerFilter(double dt, double tau) : dt_(dt) {
  if (!(dt > 0.0) || !(tau > 0.0)) throw std::invalid_argument("worker filter needs dt > 0 and tau > 0");
  alpha_ = std::min(1.0, 2.0 * dt / tau);
  beta_ = alpha_ * alpha_ / (2.0 - alpha_);
}

void WorkerFilter::update(const Vec3& z, double time) {
  if (!initialized_) {
    position_ = z;
    velocity_ = {};
    time_ = time;
    initialized_ = true;
    return;
  }
  const double h = std::max(time - time_, dt_);
  const Vec3 predicted = position_ + h * velocity_;
  const Vec3 r = z - predicted;
  position_ = predicted + alpha_ * r;
  velocity_ = velocity_ + (beta_ / h) * r;
  time_ = time;
}

Vec3 WorkerFilter::position(double time) const { return position_ + (time - time_) * velocity_; }

}  // namespace towerfleet::sim
