#include "towerfleet/sim/plant.hpp"

#include <algorithm>
#include <cmath>

namespace towerfleet::sim {

using world::Vec3;

namespace {

Vec3 clamp_axes(const Vec3& v, double limit) {
  return {std::clamp(v.x, -limit, limit), std::clamp(v.y, -limit, limit), std::clamp(v.z, -limit, limit)};
}

}  // namespace

world::UavState plant_step(const world::UavState& s, const ActuatorCommand& cmd, const world::PlantParams& params,
                           const PowerModel& power, double dt) {
  world::UavState n = s;
  const Vec3 ac = clamp_axes(cmd.acceleration, params.a_max);
  const Vec3 d = s.acceleration - ac;
  const double tau = params.lag;
  const double decay = std::exp(-dt / tau);
  // a(t) = ac + d e^{-t/tau}, integrated twice in closed form.
  const double i1 = tau * (1.0 - decay);       // int_0^dt e^{-t/tau}
  const double i2 = tau * (dt - i1);           // int_0^dt int_0^t e^{-s/tau}
  n.acceleration = ac + decay * d;
  n.velocity = s.velocity + dt * ac + i1 * d;
  n.position = s.position + dt * s.velocity + (0.5 * dt * dt) * ac + i2 * d;
  const double w = std::clamp(cmd.yaw_rate, -params.yaw_rate_max, params.yaw_rate_max);
  n.heading_rate = w;
  n.heading = world::wrap_angle(s.heading + dt * w);
  const double draw = power.factor * (power.idle + power.per_accel * world::norm(n.acceleration));
  n.battery_energy = std::max(0.0, s.battery_energy - draw * dt);
  if (n.battery_energy <= 0.0) n.status = world::UavStatus::Failed;
  return n;
}

ActuatorCommand track(const Reference& ref, const world::UavState& est, const world::TrackingGains& g,
                      const world::PlantParams& plant) {
  ActuatorCommand c;
  c.acceleration = clamp_axes(ref.acceleration + g.kv * (ref.velocity - est.velocity) + g.kp * (ref.position - est.position),
                              plant.a_max);
  c.yaw_rate = std::clamp(g.k_heading * world::wrap_angle(ref.heading - est.heading), -plant.yaw_rate_max,
                          plant.yaw_rate_max);
  return c;
}

world::UavState sense(const world::UavState& truth, double sp, double sv, Rng& rng) {
  world::UavState e = truth;
  if (sp > 0.0) e.position = truth.position + Vec3{sp * rng.normal(), sp * rng.normal(), sp * rng.normal()};
  if (sv > 0.0) e.velocity = truth.velocity + Vec3{sv * rng.normal(), sv * rng.normal(), sv * rng.normal()};
  return e;
}

}  // namespace towerfleet::sim
