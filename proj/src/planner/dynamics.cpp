#include "towerfleet/planner/dynamics.hpp"

#include <algorithm>
#include <stdexcept>

namespace towerfleet::planner {

FleetRollout rollout(std::span<const world::Vec3> p0, std::span<const world::Vec3> v0, std::span<const double> a,
                     std::size_t samples, double ts) {
  const std::size_t q = p0.size();
  if (v0.size() != q || samples < 1 || a.size() != q * (samples - 1) * 3) {
    throw std::invalid_argument("rollout: inconsistent sizes");
  }
  FleetRollout out;
  out.samples = samples;
  out.vehicles = q;
  out.positions.assign(samples * q * 3, 0.0);
  out.velocities.assign(samples * q * 3, 0.0);
  const double half = 0.5 * ts * ts;
  for (std::size_t u = 0; u < q; ++u) {
    for (int j = 0; j < 3; ++j) {
      double p = world::axis(p0[u], j);
      double v = world::axis(v0[u], j);
      out.positions[3 * u + j] = p;
      out.velocities[3 * u + j] = v;
      for (std::size_t k = 0; k + 1 < samples; ++k) {
        const double ak = a[(u * (samples - 1) + k) * 3 + j];
        p = p + v * ts + ak * half;
        v = v + ak * ts;
        out.positions[(k + 1) * q * 3 + 3 * u + j] = p;
        out.velocities[(k + 1) * q * 3 + 3 * u + j] = v;
      }
    }
  }
  return out;
}

std::vector<double> control_gradient(std::span<const double> position_gradient, std::size_t vehicles,
                                     std::size_t samples, double ts) {
  std::vector<double> g(vehicles * (samples - 1) * 3, 0.0);
  const double half = 0.5 * ts * ts;
  for (std::size_t u = 0; u < vehicles; ++u) {
    for (int j = 0; j < 3; ++j) {
      // Adjoints of p_{k+1} and v_{k+1} while walking backwards.
      double lp = position_gradient[(samples - 1) * vehicles * 3 + 3 * u + j];
      double lv = 0.0;
      for (std::size_t k = samples - 1; k-- > 0;) {
        g[(u * (samples - 1) + k) * 3 + j] = lp * half + lv * ts;
        lv = lv + lp * ts;
        lp = position_gradient[k * vehicles * 3 + 3 * u + j] + lp;
      }
    }
  }
  return g;
}

void project_controls(std::span<const world::Vec3> v0, std::span<double> a, std::size_t samples, double ts,
                      double v_max, double a_max) {
  const std::size_t q = v0.size();
  for (std::size_t u = 0; u < q; ++u) {
    for (int j = 0; j < 3; ++j) {
      double v = world::axis(v0[u], j);
      for (std::size_t k = 0; k + 1 < samples; ++k) {
        double& ak = a[(u * (samples - 1) + k) * 3 + j];
        const double lo = std::max(-a_max, (-v_max - v) / ts);
        const double hi = std::min(a_max, (v_max - v) / ts);
        if (lo <= hi) {
          ak = std::clamp(ak, lo, hi);
        } else {
          ak = v > 0.0 ? -a_max : a_max;
        }
        v = v + ak * ts;
      }
    }
  }
}

}  // namespace towerfleet::planner
