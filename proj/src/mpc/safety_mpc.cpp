#include "towerfleet/mpc/safety_mpc.hpp"

#include <algorithm>
#include <cmath>

#include "towerfleet/mpc/qp.hpp"
#include "towerfleet/world/geometry.hpp"

namespace towerfleet::mpc {

using world::Vec3;

namespace {

// Constraints whose linearization point is farther than this from binding are left out of the
// QP; the residual check after each pass brings them back if the new iterate gets closer.
constexpr double kReach = 2.0;

struct Horizon {
  int w;
  double dt;
};

/// Least-squares accumulator: sum of weight * (row . x + r0)^2.
struct Lsq {
  explicit Lsq(int n) : H(Eigen::MatrixXd::Zero(n, n)), g(Eigen::VectorXd::Zero(n)) {}
  void add(const Eigen::VectorXd& row, double r0, double weight) {
    if (weight <= 0.0) return;
    H.noalias() += weight * row * row.transpose();
    g.noalias() += weight * r0 * row;
  }
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
};

/// Constraint list in the solver's column form: row . x + b >= 0.
struct Constraints {
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> b;
  void add(const Eigen::VectorXd& row, double offset) {
    rows.push_back(row);
    b.push_back(offset);
  }
};

/// Coefficients of p_k[axis] in the stacked controls (k = 1..W) and its constant part.
Eigen::VectorXd position_row(const Horizon& h, int k, int axis) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(3 * h.w);
  for (int i = 0; i < k; ++i) row(3 * i + axis) = (k - i - 0.5) * h.dt * h.dt;
  return row;
}

Eigen::VectorXd velocity_row(const Horizon& h, int k, int axis) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(3 * h.w);
  for (int i = 0; i < k; ++i) row(3 * i + axis) = h.dt;
  return row;
}

Vec3 position_constant(const world::UavState& s, const Horizon& h, int k) { return s.position + (k * h.dt) * s.velocity; }

/// Row and constant of the linear function n . p_k.
std::pair<Eigen::VectorXd, double> along(const Horizon& h, const world::UavState& s, int k, const Vec3& n) {
  Eigen::VectorXd row = n.x * position_row(h, k, 0) + n.y * position_row(h, k, 1) + n.z * position_row(h, k, 2);
  return {row, world::dot(n, position_constant(s, h, k))};
}

void rollout(const world::UavState& s, const Horizon& h, const std::vector<Vec3>& a, const std::vector<double>& omega,
             std::vector<world::UavState>& out) {
  out.assign(static_cast<std::size_t>(h.w) + 1, s);
  for (int k = 0; k < h.w; ++k) {
    const auto& cur = out[k];
    auto& nxt = out[k + 1];
    nxt.position = cur.position + h.dt * cur.velocity + (0.5 * h.dt * h.dt) * a[k];
    nxt.velocity = cur.velocity + h.dt * a[k];
    nxt.acceleration = a[k];
    nxt.heading = world::wrap_angle(cur.heading + h.dt * omega[k]);
    nxt.heading_rate = omega[k];
  }
}

Vec3 worker_at(const MpcInput& in, const Horizon& h, int k) { return in.worker_position + (k * h.dt) * in.worker_velocity; }
Vec3 slot_at(const MpcInput& in, const Horizon& h, int k) { return in.slot.position + (k * h.dt) * in.worker_velocity; }

/// Bearing angles from p to the worker and their gradients with respect to p.
struct Bearing {
  double azimuth = 0.0, elevation = 0.0;
  Vec3 d_azimuth, d_elevation;
  bool azimuth_defined = false;
};

Bearing bearing(const Vec3& p, const Vec3& w) {
  Bearing b;
  const Vec3 d = w - p;
  const double rh2 = d.x * d.x + d.y * d.y;
  const double rh = std::sqrt(rh2);
  const double r2 = rh2 + d.z * d.z;
  b.azimuth = std::atan2(d.y, d.x);
  b.elevation = std::atan2(d.z, rh);
  if (rh > 1e-9) {
    b.azimuth_defined = true;
    b.d_azimuth = Vec3{d.y / rh2, -d.x / rh2, 0.0};
    b.d_elevation = Vec3{d.z * d.x / (rh * r2), d.z * d.y / (rh * r2), -rh / r2};
  } else {
    b.d_elevation = Vec3{0.0, 0.0, 0.0};
  }
  return b;
}

double costs(const MpcInput& in, const MpcParams& prm, const Horizon& h, const std::vector<world::UavState>& states,
             const std::vector<Vec3>& a, const std::vector<double>& omega, double& perception_cost) {
  double action = 0.0;
  perception_cost = 0.0;
  for (int k = 1; k <= h.w; ++k) {
    const Vec3 e = states[k].position - slot_at(in, h, k);
    const Vec3 ev = states[k].velocity - in.worker_velocity;
    action += prm.w_track * world::dot(e, e) + prm.w_track_rate * world::dot(ev, ev);
    const Vec3 w = worker_at(in, h, k);
    if (!(states[k].position == w)) {
      const auto z = perception(states[k].position, states[k].heading, w, in.camera);
      perception_cost += prm.w_visibility_h * z.azimuth_error * z.azimuth_error +
                         prm.w_visibility_v * z.elevation_error * z.elevation_error;
    }
  }
  Vec3 prev = in.current.acceleration;
  for (int k = 0; k < h.w; ++k) {
    const Vec3 j = (a[k] - prev) / h.dt;
    action += (prm.w_track_accel + prm.w_effort) * world::dot(a[k], a[k]) + prm.w_jerk * world::dot(j, j) +
              prm.w_yaw_rate * omega[k] * omega[k];
    prev = a[k];
  }
  return action;
}

/// Position pass: QP over the 3W accelerations, linearized around `lin` with headings from `lin`.
QpResult position_pass(const MpcInput& in, const MpcParams& prm, const Horizon& h,
                       const std::vector<world::UavState>& lin) {
  const int n = 3 * h.w;
  Lsq lsq(n);
  const auto& s0 = in.current;
  for (int k = 1; k <= h.w; ++k) {
    const Vec3 pc = position_constant(s0, h, k);
    const Vec3 slot = slot_at(in, h, k);
    for (int j = 0; j < 3; ++j) {
      lsq.add(position_row(h, k, j), world::axis(pc, j) - world::axis(slot, j), prm.w_track);
      lsq.add(velocity_row(h, k, j), world::axis(s0.velocity, j) - world::axis(in.worker_velocity, j),
              prm.w_track_rate);
    }
    const Vec3 w = worker_at(in, h, k);
    const Vec3& pbar = lin[k].position;
    if (pbar == w) continue;
    const Bearing b = bearing(pbar, w);
    const Vec3 off = pc - pbar;
    if (b.azimuth_defined) {
      auto [row, c] = along(h, s0, k, b.d_azimuth);
      (void)c;
      const double e0 = world::wrap_angle(b.azimuth - lin[k].heading);
      lsq.add(row, e0 + world::dot(b.d_azimuth, off), prm.w_visibility_h);
    }
    auto [row, c] = along(h, s0, k, b.d_elevation);
    (void)c;
    const double e0 = world::wrap_angle(b.elevation - in.camera.mount_pitch);
    lsq.add(row, e0 + world::dot(b.d_elevation, off), prm.w_visibility_v);
  }
  for (int k = 0; k < h.w; ++k) {
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
      row(3 * k + j) = 1.0;
      lsq.add(row, 0.0, prm.w_track_accel + prm.w_effort);
      Eigen::VectorXd jerk = Eigen::VectorXd::Zero(n);
      jerk(3 * k + j) = 1.0 / h.dt;
      double r0 = 0.0;
      if (k > 0) {
        jerk(3 * (k - 1) + j) = -1.0 / h.dt;
      } else {
        r0 = -world::axis(s0.acceleration, j) / h.dt;
      }
      lsq.add(jerk, r0, prm.w_jerk);
    }
  }

  Constraints cons;
  for (int k = 0; k < h.w; ++k) {
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
      row(3 * k + j) = 1.0;
      cons.add(row, prm.a_max);
      cons.add(-row, prm.a_max);
    }
  }
  for (int k = 1; k <= h.w; ++k) {
    for (int j = 0; j < 3; ++j) {
      const Eigen::VectorXd row = velocity_row(h, k, j);
      const double v0 = world::axis(s0.velocity, j);
      cons.add(row, prm.v_max + v0);
      cons.add(-row, prm.v_max - v0);
    }
    const Vec3& pbar = lin[k].position;
    const Vec3 w = worker_at(in, h, k);
    const Vec3 rel = pbar - w;
    const double dist = world::norm(rel);
    if (dist > 1e-9) {
      const Vec3 nh = rel / dist;
      auto [row, c] = along(h, s0, k, nh);
      const double nw = world::dot(nh, w);
      if (dist < prm.d_min + kReach) cons.add(row, c - nw - prm.d_min);
      if (dist > prm.d_max - kReach) cons.add(-row, prm.d_max - c + nw);
    }
    for (const auto& nb : in.neighbors) {
      if (static_cast<int>(nb.size()) <= k) continue;
      const Vec3 relq = pbar - nb[k];
      const double dq = world::norm(relq);
      if (dq >= prm.separation_min + kReach) continue;
      const Vec3 nh = dq > 1e-9 ? relq / dq : Vec3{1.0, 0.0, 0.0};
      auto [row, c] = along(h, s0, k, nh);
      cons.add(row, c - world::dot(nh, nb[k]) - prm.separation_min);
    }
    auto obstacle = [&](double d, const Vec3& grad) {
      if (d >= prm.obstacle_margin + kReach || grad == Vec3{}) return;
      auto [row, c] = along(h, s0, k, grad);
      cons.add(row, d - world::dot(grad, pbar) + c - prm.obstacle_margin);
    };
    for (const auto& t : in.towers) obstacle(world::tower_signed_distance(pbar, t), world::tower_distance_gradient(pbar, t));
    for (const auto& wseg : in.wires) obstacle(world::wire_signed_distance(pbar, wseg), world::wire_distance_gradient(pbar, wseg));
  }

  QuadraticProgram qp;
  qp.G = lsq.H + 1e-9 * Eigen::MatrixXd::Identity(n, n);
  qp.g = lsq.g;
  qp.Aeq.resize(n, 0);
  qp.beq.resize(0);
  qp.Ain.resize(n, static_cast<Eigen::Index>(cons.rows.size()));
  qp.bin.resize(static_cast<Eigen::Index>(cons.b.size()));
  for (std::size_t i = 0; i < cons.rows.size(); ++i) {
    qp.Ain.col(static_cast<Eigen::Index>(i)) = cons.rows[i];
    qp.bin(static_cast<Eigen::Index>(i)) = cons.b[i];
  }
  return solve_qp(qp);
}

/// Heading pass: tracks the unwrapped bearing to the worker from the predicted positions.
QpResult heading_pass(const MpcInput& in, const MpcParams& prm, const Horizon& h,
                      const std::vector<world::UavState>& states) {
  const int n = h.w;
  Lsq lsq(n);
  double target = in.current.heading;
  for (int k = 1; k <= h.w; ++k) {
    const Vec3 d = worker_at(in, h, k) - states[k].position;
    if (world::horizontal_norm(d) > 1e-9) target += world::wrap_angle(std::atan2(d.y, d.x) - target);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < k; ++i) row(i) = h.dt;
    lsq.add(row, in.current.heading - target, prm.w_visibility_h);
  }
  QuadraticProgram qp;
  qp.G = lsq.H + std::max(prm.w_yaw_rate, 1e-9) * Eigen::MatrixXd::Identity(n, n);
  qp.g = lsq.g;
  qp.Aeq.resize(n, 0);
  qp.beq.resize(0);
  qp.Ain = Eigen::MatrixXd::Zero(n, 2 * n);
  qp.bin = Eigen::VectorXd::Constant(2 * n, prm.yaw_rate_max);
  for (int i = 0; i < n; ++i) {
    qp.Ain(i, 2 * i) = 1.0;
    qp.Ain(i, 2 * i + 1) = -1.0;
  }
  return solve_qp(qp);
}

void fill(const MpcInput& in, const MpcParams& prm, const Horizon& h, MpcSolution& sol) {
  rollout(in.current, h, sol.accelerations, sol.heading_rates, sol.predicted);
  sol.perception.clear();
  for (int k = 0; k <= h.w; ++k) {
    const Vec3 w = worker_at(in, h, k);
    sol.perception.push_back(sol.predicted[k].position == w
                                 ? PerceptionState{}
                                 : perception(sol.predicted[k].position, sol.predicted[k].heading, w, in.camera));
  }
  sol.action_cost = costs(in, prm, h, sol.predicted, sol.accelerations, sol.heading_rates, sol.perception_cost);
  sol.residuals = evaluate_residuals(in, prm, sol);
}

}  // namespace

std::string to_string(MpcStatus s) { return s == MpcStatus::Converged ? "converged" : "degraded"; }

Residuals evaluate_residuals(const MpcInput& in, const MpcParams& prm, const MpcSolution& sol) {
  Residuals r;
  const int w = static_cast<int>(sol.accelerations.size());
  const double dt = sol.dt;
  auto ineq = [&](double h, const char* name) {
    if (h > r.max_inequality) {
      r.max_inequality = h;
      r.worst = name;
    }
  };
  for (int k = 0; k < w; ++k) {
    const auto& s = sol.predicted[k];
    const auto& nx = sol.predicted[k + 1];
    const Vec3 dp = nx.position - (s.position + dt * s.velocity + (0.5 * dt * dt) * sol.accelerations[k]);
    const Vec3 dv = nx.velocity - (s.velocity + dt * sol.accelerations[k]);
    const double dpsi = world::wrap_angle(nx.heading - (s.heading + dt * sol.heading_rates[k]));
    r.max_equality = std::max({r.max_equality, world::norm_inf(dp), world::norm_inf(dv), std::abs(dpsi)});
    ineq(world::norm_inf(sol.accelerations[k]) - prm.a_max, "acceleration bound");
    ineq(std::abs(sol.heading_rates[k]) - prm.yaw_rate_max, "yaw-rate bound");
  }
  const double residual_dt0 = world::norm(sol.predicted[0].position - in.current.position);
  r.max_equality = std::max(r.max_equality, residual_dt0);
  for (int k = 1; k <= w; ++k) {
    const Vec3& p = sol.predicted[k].position;
    ineq(world::norm_inf(sol.predicted[k].velocity) - prm.v_max, "velocity bound");
    const double dist = world::norm(p - (in.worker_position + (k * dt) * in.worker_velocity));
    ineq(prm.d_min - dist, "worker distance floor");
    ineq(dist - prm.d_max, "worker distance ceiling");
    for (const auto& nb : in.neighbors) {
      if (static_cast<int>(nb.size()) > k) ineq(prm.separation_min - world::norm(p - nb[k]), "separation");
    }
    const double clearance = world::distance_to_obstacles(p, in.towers, in.wires);
    if (std::isfinite(clearance)) ineq(prm.obstacle_margin - clearance, "obstacle clearance");
  }
  return r;
}

MpcSolution braking_sequence(const MpcInput& in, const MpcParams& prm, std::string note) {
  const Horizon h{prm.shooting_points, prm.horizon / prm.shooting_points};
  MpcSolution sol;
  sol.dt = h.dt;
  sol.status = MpcStatus::Degraded;
  sol.note = std::move(note);
  Vec3 v = in.current.velocity;
  for (int k = 0; k < h.w; ++k) {
    Vec3 a;
    for (int j = 0; j < 3; ++j) world::axis(a, j) = std::clamp(-world::axis(v, j) / h.dt, -prm.a_max, prm.a_max);
    sol.accelerations.push_back(a);
    sol.heading_rates.push_back(0.0);
    v = v + h.dt * a;
  }
  fill(in, prm, h, sol);
  sol.status = MpcStatus::Degraded;
  return sol;
}

MpcSolution solve_step(const MpcInput& in, const MpcParams& prm, const WarmStart& warm) {
  if (prm.shooting_points < 2 || !(prm.horizon > 0.0)) throw std::invalid_argument("invalid MPC horizon");
  const Horizon h{prm.shooting_points, prm.horizon / prm.shooting_points};
  MpcSolution sol;
  sol.dt = h.dt;
  // Cold starts linearize around the braking trajectory: a zero-acceleration guess can run through the
  // worker and flip the distance-floor normals.
  sol.accelerations = braking_sequence(in, prm, {}).accelerations;
  sol.heading_rates.assign(h.w, 0.0);
  if (static_cast<int>(warm.accelerations.size()) == h.w) sol.accelerations = warm.accelerations;
  if (static_cast<int>(warm.heading_rates.size()) == h.w) sol.heading_rates = warm.heading_rates;
  std::vector<world::UavState> lin;
  rollout(in.current, h, sol.accelerations, sol.heading_rates, lin);

  for (int it = 1; it <= prm.max_outer_iterations; ++it) {
    sol.iterations = it;
    const QpResult pos = position_pass(in, prm, h, lin);
    sol.qp_iterations += pos.iterations;
    if (pos.status != QpStatus::Optimal) return braking_sequence(in, prm, "position QP infeasible");
    std::vector<Vec3> a(h.w);
    for (int k = 0; k < h.w; ++k) a[k] = Vec3{pos.x(3 * k), pos.x(3 * k + 1), pos.x(3 * k + 2)};
    std::vector<world::UavState> states;
    rollout(in.current, h, a, sol.heading_rates, states);
    const QpResult head = heading_pass(in, prm, h, states);
    sol.qp_iterations += head.iterations;
    if (head.status != QpStatus::Optimal) return braking_sequence(in, prm, "heading QP infeasible");

    double change = 0.0;
    for (int k = 0; k < h.w; ++k) {
      change = std::max({change, world::norm_inf(a[k] - sol.accelerations[k]), std::abs(head.x(k) - sol.heading_rates[k])});
      sol.accelerations[k] = a[k];
      sol.heading_rates[k] = head.x(k);
    }
    fill(in, prm, h, sol);
    lin = sol.predicted;
    if (change <= prm.tolerance && sol.residuals.max_inequality <= prm.tolerance) break;
  }
  if (sol.residuals.max_inequality > prm.tolerance) {
    return braking_sequence(in, prm, "constraint '" + sol.residuals.worst + "' violated after linearization passes");
  }
  sol.status = MpcStatus::Converged;
  return sol;
}

WarmStart advance(const MpcSolution& previous, int shooting_points) {
  WarmStart w;
  if (previous.accelerations.empty()) {
    w.accelerations.assign(shooting_points, Vec3{});
    w.heading_rates.assign(shooting_points, 0.0);
    return w;
  }
  w.accelerations.assign(previous.accelerations.begin() + 1, previous.accelerations.end());
  w.accelerations.push_back(previous.accelerations.back());
  w.heading_rates.assign(previous.heading_rates.begin() + 1, previous.heading_rates.end());
  w.heading_rates.push_back(previous.heading_rates.back());
  return w;
}

}  // namespace towerfleet::mpc
