#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "towerfleet/mpc/formation.hpp"
#include "towerfleet/mpc/qp.hpp"
#include "towerfleet/mpc/safety_mpc.hpp"
#include "towerfleet/world/geometry.hpp"

using namespace towerfleet;
using mpc::QpStatus;
using mpc::QuadraticProgram;
using world::Vec3;

namespace {

QuadraticProgram random_qp(std::mt19937_64& rng, int n, int meq, int min) {
  std::normal_distribution<double> N(0.0, 1.0);
  QuadraticProgram qp;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = N(rng);
  qp.G = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  qp.g.resize(n);
  for (int i = 0; i < n; ++i) qp.g(i) = 3.0 * N(rng);
  qp.Aeq.resize(n, meq);
  qp.beq.resize(meq);
  for (int c = 0; c < meq; ++c) {
    for (int i = 0; i < n; ++i) qp.Aeq(i, c) = N(rng);
    qp.beq(c) = N(rng);
  }
  // Inequalities around a strictly feasible point so the instance is never empty.
  Eigen::VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0(i) = N(rng);
  if (meq > 0) {
    // Move x0 onto the equality set (least-norm correction).
    const Eigen::VectorXd r = qp.Aeq.transpose() * x0 + qp.beq;
    x0 -= qp.Aeq * (qp.Aeq.transpose() * qp.Aeq).ldlt().solve(r);
  }
  qp.Ain.resize(n, min);
  qp.bin.resize(min);
  std::uniform_real_distribution<double> slack(0.1, 1.0);
  for (int c = 0; c < min; ++c) {
    for (int i = 0; i < n; ++i) qp.Ain(i, c) = N(rng);
    qp.bin(c) = -qp.Ain.col(c).dot(x0) + slack(rng);
  }
  return qp;
}

double objective(const QuadraticProgram& qp, const Eigen::VectorXd& x) { return 0.5 * x.dot(qp.G * x) + qp.g.dot(x); }

/// Enumerates every active set, solves its KKT system and keeps the best primal-feasible point.
double brute_force_qp(const QuadraticProgram& qp, Eigen::VectorXd& best_x) {
  const int n = static_cast<int>(qp.g.size());
  const int me = static_cast<int>(qp.Aeq.cols());
  const int mi = static_cast<int>(qp.Ain.cols());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int c = 0; c < mi; ++c)
      if (mask & (1u << c)) act.push_back(c);
    const int m = me + static_cast<int>(act.size());
    if (m > n) continue;
    Eigen::MatrixXd A(n, m);
    Eigen::VectorXd b(m);
    for (int c = 0; c < me; ++c) {
      A.col(c) = qp.Aeq.col(c);
      b(c) = qp.beq(c);
    }
    for (std::size_t c = 0; c < act.size(); ++c) {
      A.col(me + c) = qp.Ain.col(act[c]);
      b(me + c) = qp.bin(act[c]);
    }
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = qp.G;
    K.topRightCorner(n, m) = -A;
    K.bottomLeftCorner(m, n) = A.transpose();
    Eigen::VectorXd rhs(n + m);
    rhs << -qp.g, -b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (lu.rank() < n + m) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    bool feasible = true;
    for (int c = 0; c < mi; ++c)
      if (qp.Ain.col(c).dot(x) + qp.bin(c) < -1e-9) feasible = false;
    for (int c = 0; c < me; ++c)
      if (std::abs(qp.Aeq.col(c).dot(x) + qp.beq(c)) > 1e-9) feasible = false;
    if (feasible && objective(qp, x) < best) {
      best = objective(qp, x);
      best_x = x;
    }
  }
  return best;
}

/// Worker at the origin standing still; vehicle hovering in the single slot at 5 m due east.
mpc::MpcInput hover_input() {
  mpc::MpcInput in;
  world::FormationGeometry geo;
  geo.distance = 5.0;
  const auto slots = mpc::formation_slots(Vec3{}, geo, 1);
  in.slot = slots[0];
  in.current.position = slots[0].position;
  in.current.heading = slots[0].heading;
  in.worker_position = Vec3{};
  return in;
}

struct Violation {
  double equality = 0.0;
  double inequality = 0.0;
};

/// Independent replay of a solution against the nonlinear model and constraints.
Violation check(const mpc::MpcInput& in, const mpc::MpcParams& p, const mpc::MpcSolution& s) {
  Violation v;
  const double dt = p.horizon / p.shooting_points;
  Vec3 pos = in.current.position, vel = in.current.velocity;
  double psi = in.current.heading;
  for (int k = 0; k < p.shooting_points; ++k) {
    const Vec3 a = s.accelerations[k];
    v.inequality = std::max(v.inequality, world::norm_inf(a) - p.a_max);
    v.inequality = std::max(v.inequality, std::abs(s.heading_rates[k]) - p.yaw_rate_max);
    pos = pos + dt * vel + 0.5 * dt * dt * a;
    vel = vel + dt * a;
    psi = world::wrap_angle(psi + dt * s.heading_rates[k]);
    const auto& pred = s.predicted[k + 1];
    v.equality = std::max({v.equality, world::norm(pred.position - pos), world::norm(pred.velocity - vel),
                           std::abs(world::wrap_angle(pred.heading - psi))});
    v.inequality = std::max(v.inequality, world::norm_inf(vel) - p.v_max);
    const Vec3 w = in.worker_position + ((k + 1) * dt) * in.worker_velocity;
    const double d = world::norm(pos - w);
    v.inequality = std::max({v.inequality, p.d_min - d, d - p.d_max});
    for (const auto& nb : in.neighbors) v.inequality = std::max(v.inequality, p.separation_min - world::norm(pos - nb[k + 1]));
    for (const auto& t : in.towers)
      v.inequality = std::max(v.inequality, p.obstacle_margin - world::tower_signed_distance(pos, t));
  }
  return v;
}

}  // namespace

TEST_CASE("qp: unconstrained and simple bound") {
  QuadraticProgram qp;
  qp.G = Eigen::Matrix2d::Identity();
  qp.g = Eigen::Vector2d(-2.0, -4.0);
  qp.Aeq.resize(2, 0);
  qp.beq.resize(0);
  qp.Ain.resize(2, 0);
  qp.bin.resize(0);
  auto r = mpc::solve_qp(qp);
  REQUIRE(r.status == QpStatus::Optimal);
  CHECK(r.x(0) == doctest::Approx(2.0));
  CHECK(r.x(1) == doctest::Approx(4.0));

  // x1 <= 1  ->  -x1 + 1 >= 0
  qp.Ain = Eigen::MatrixXd(2, 1);
  qp.Ain << 0.0, -1.0;
  qp.bin = Eigen::VectorXd::Constant(1, 1.0);
  r = mpc::solve_qp(qp);
  REQUIRE(r.status == QpStatus::Optimal);
  CHECK(r.x(0) == doctest::Approx(2.0));
  CHECK(r.x(1) == doctest::Approx(1.0));
  CHECK(r.multipliers(0) == doctest::Approx(3.0));
  CHECK(r.active == std::vector<int>{0});
}

TEST_CASE("qp: infeasible and non-convex inputs are reported") {
  QuadraticProgram qp;
  qp.G = Eigen::MatrixXd::Identity(1, 1);
  qp.g = Eigen::VectorXd::Zero(1);
  qp.Aeq.resize(1, 0);
  qp.beq.resize(0);
  qp.Ain = Eigen::MatrixXd(1, 2);
  qp.Ain << 1.0, -1.0;  // x >= 1 and x <= 0
  qp.bin = Eigen::Vector2d(-1.0, 0.0);
  CHECK(mpc::solve_qp(qp).status == QpStatus::Infeasible);

  qp.G(0, 0) = -1.0;
  CHECK(mpc::solve_qp(qp).status == QpStatus::NotConvex);

  qp.bin.resize(1);
  CHECK_THROWS_AS(mpc::solve_qp(qp), std::invalid_argument);
}

TEST_CASE("qp: KKT conditions hold on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 6;
    const int meq = trial % 3 == 0 ? 1 : 0;
    const int mi = 1 + trial % 12;
    const auto qp = random_qp(rng, n, meq, mi);
    const auto r = mpc::solve_qp(qp);
    REQUIRE(r.status == QpStatus::Optimal);
    const Eigen::VectorXd lam = r.multipliers.head(meq);
    const Eigen::VectorXd mu = r.multipliers.tail(mi);
    const Eigen::VectorXd stationarity = qp.G * r.x + qp.g - qp.Aeq * lam - qp.Ain * mu;
    CHECK(stationarity.norm() <= 1e-8 * (1.0 + qp.g.norm()));
    for (int c = 0; c < mi; ++c) {
      const double s = qp.Ain.col(c).dot(r.x) + qp.bin(c);
      CHECK(s >= -1e-9);
      CHECK(mu(c) >= -1e-12);
      CHECK(std::abs(mu(c) * s) <= 1e-8);
    }
    for (int c = 0; c < meq; ++c) CHECK(std::abs(qp.Aeq.col(c).dot(r.x) + qp.beq(c)) <= 1e-9);
  }
}

TEST_CASE("qp: matches active-set enumeration") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 150; ++trial) {
    const int n = 2 + trial % 3;
    const auto qp = random_qp(rng, n, trial % 4 == 0 ? 1 : 0, 2 + trial % 6);
    Eigen::VectorXd xb;
    const double best = brute_force_qp(qp, xb);
    const auto r = mpc::solve_qp(qp);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK((r.x - xb).norm() <= 1e-7);
  }
}

TEST_CASE("formation slots") {
  world::FormationGeometry geo;
  geo.distance = 6.0;
  geo.azimuth_center = 0.0;
  geo.elevation = 0.0;
  geo.inter_uav_angle = 40.0 * M_PI / 180.0;
  const Vec3 w{1.0, 2.0, 3.0};
  const auto slots = mpc::formation_slots(w, geo, 3);
  REQUIRE(slots.size() == 3);
  const double az[3] = {-40.0, 0.0, 40.0};
  for (int i = 0; i < 3; ++i) {
    const double a = az[i] * M_PI / 180.0;
    CHECK(slots[i].position.x == doctest::Approx(1.0 + 6.0 * std::cos(a)));
    CHECK(slots[i].position.y == doctest::Approx(2.0 + 6.0 * std::sin(a)));
    CHECK(slots[i].position.z == doctest::Approx(3.0));
    CHECK(std::abs(world::wrap_angle(slots[i].heading - (a + M_PI))) < 1e-12);
    CHECK(world::norm(slots[i].position - w) == doctest::Approx(6.0));
  }
  CHECK(slots[1].heading == doctest::Approx(M_PI));

  const auto one = mpc::formation_slots(w, geo, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == slots[1]);

  geo.elevation = M_PI / 6.0;
  const auto raised = mpc::formation_slots(Vec3{}, geo, 1);
  CHECK(raised[0].position.x == doctest::Approx(6.0 * std::cos(M_PI / 6.0)));
  CHECK(raised[0].position.z == doctest::Approx(3.0));

  // Translating the worker translates the slots.
  const auto a = mpc::formation_slots(Vec3{}, geo, 4);
  const auto b = mpc::formation_slots(Vec3{5.0, -3.0, 2.0}, geo, 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(world::norm(b[i].position - a[i].position - Vec3{5.0, -3.0, 2.0}) < 1e-12);
    CHECK(b[i].heading == a[i].heading);
  }
  CHECK_THROWS_AS(mpc::formation_slots(w, geo, 0), std::invalid_argument);
}

TEST_CASE("visibility cost") {
  world::CameraParams cam;
  cam.fov_horizontal = 1.2;
  world::WorkerState worker;
  worker.position = {0.0, 0.0, 0.0};
  world::UavState s;
  s.position = {5.0, 0.0, 0.0};
  s.heading = M_PI;
  CHECK(mpc::visibility_cost(s, worker, cam, 2.0, 2.0) == doctest::Approx(0.0));
  CHECK(mpc::in_field_of_view(mpc::perception(s.position, s.heading, worker.position, cam), cam));

  s.heading = M_PI + 0.6;
  CHECK(mpc::visibility_cost(s, worker, cam, 2.0, 2.0) == doctest::Approx(2.0 * 0.36));
  s.heading = M_PI - 0.6;
  CHECK(mpc::visibility_cost(s, worker, cam, 2.0, 2.0) == doctest::Approx(2.0 * 0.36));
  s.heading = M_PI + 0.7;
  CHECK_FALSE(mpc::in_field_of_view(mpc::perception(s.position, s.heading, worker.position, cam), cam));

  s.heading = M_PI;
  s.position = {5.0, 0.0, 5.0};  // worker 45 degrees below
  const auto z = mpc::perception(s.position, s.heading, worker.position, cam);
  CHECK(z.elevation_error == doctest::Approx(-M_PI / 4.0));
  cam.mount_pitch = -M_PI / 4.0;
  CHECK(mpc::visibility_cost(s, worker, cam, 1.0, 1.0) == doctest::Approx(0.0));

  s.position = worker.position;
  CHECK_THROWS_AS(mpc::visibility_cost(s, worker, cam, 1.0, 1.0), mpc::DegenerateBearingError);
}

TEST_CASE("mpc: hovering in the slot is an equilibrium") {
  const auto in = hover_input();
  const mpc::MpcParams p;
  const auto sol = mpc::solve_step(in, p);
  REQUIRE(sol.status == mpc::MpcStatus::Converged);
  REQUIRE(sol.accelerations.size() == 20);
  REQUIRE(sol.predicted.size() == 21);
  for (const auto& a : sol.accelerations) CHECK(world::norm(a) <= 1e-3);
  for (double w : sol.heading_rates) CHECK(std::abs(w) <= 1e-3);
  CHECK(sol.perception_cost <= 1e-9);
  CHECK(sol.action_cost <= 1e-9);
}

TEST_CASE("mpc: three-interval one-axis instance matches a dense grid") {
  mpc::MpcParams p;
  p.shooting_points = 3;
  p.horizon = 0.3;
  p.w_visibility_h = 0.0;
  p.w_visibility_v = 0.0;
  p.d_min = 0.0;
  p.d_max = 1e3;
  mpc::MpcInput in;
  in.worker_position = {-100.0, 0.0, 0.0};
  in.slot.position = {10.0, 0.0, 0.0};
  in.current.velocity = {2.8, 0.0, 0.0};  // velocity bound binds while closing on the slot
  in.current.acceleration = {0.5, 0.0, 0.0};
  const auto sol = mpc::solve_step(in, p);
  REQUIRE(sol.status == mpc::MpcStatus::Converged);

  const double dt = 0.1;
  auto cost = [&](const double a[3]) {
    double x = 0.0, v = 2.8, prev = 0.5, J = 0.0;
    for (int k = 0; k < 3; ++k) {
      x += dt * v + 0.5 * dt * dt * a[k];
      v += dt * a[k];
      if (std::abs(v) > p.v_max) return std::numeric_limits<double>::infinity();
      J += p.w_track * (x - 10.0) * (x - 10.0) + p.w_track_rate * v * v;
      J += (p.w_track_accel + p.w_effort) * a[k] * a[k] + p.w_jerk * std::pow((a[k] - prev) / dt, 2);
      prev = a[k];
    }
    return J;
  };
  double best = std::numeric_limits<double>::infinity(), arg[3] = {0, 0, 0};
  double center[3] = {0, 0, 0}, half = p.a_max, step = 0.05;
  for (int level = 0; level < 3; ++level) {
    double c[3] = {center[0], center[1], center[2]};
    for (double a0 = c[0] - half; a0 <= c[0] + half + 1e-12; a0 += step)
      for (double a1 = c[1] - half; a1 <= c[1] + half + 1e-12; a1 += step)
        for (double a2 = c[2] - half; a2 <= c[2] + half + 1e-12; a2 += step) {
          const double a[3] = {std::clamp(a0, -p.a_max, p.a_max), std::clamp(a1, -p.a_max, p.a_max),
                               std::clamp(a2, -p.a_max, p.a_max)};
          const double J = cost(a);
          if (J < best) {
            best = J;
            std::copy(a, a + 3, arg);
          }
        }
    std::copy(arg, arg + 3, center);
    half = 2.0 * step;
    step /= 10.0;
  }
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(sol.accelerations[k].x - arg[k]) <= 1e-2);
    CHECK(std::abs(sol.accelerations[k].y) < 1e-9);
    CHECK(std::abs(sol.accelerations[k].z) < 1e-9);
  }
  const double mine[3] = {sol.accelerations[0].x, sol.accelerations[1].x, sol.accelerations[2].x};
  CHECK(cost(mine) <= best + 1e-6);
  CHECK(sol.action_cost == doctest::Approx(cost(mine)).epsilon(1e-9));
}

TEST_CASE("mpc: constraints hold on random encounters") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const mpc::MpcParams p;
  std::vector<world::Tower> towers(1);
  towers[0].center = {0.0, 0.0, 0.0};
  towers[0].radius = 1.0;
  towers[0].height = 30.0;
  int converged = 0;
  for (int trial = 0; trial < 60; ++trial) {
    mpc::MpcInput in;
    in.worker_position = {2.5 + 0.5 * U(rng), 0.5 * U(rng), 10.0 + U(rng)};  // on the tower face
    in.worker_velocity = {0.0, 0.0, 0.3 * U(rng)};
    world::FormationGeometry geo;
    geo.distance = 5.0;
    geo.azimuth_center = 0.6 * U(rng);
    geo.inter_uav_angle = 0.7;
    const auto slots = mpc::formation_slots(in.worker_position, geo, 2);
    in.slot = slots[0];
    in.current.position = slots[0].position + Vec3{1.5 * U(rng), 1.5 * U(rng), U(rng)};
    in.current.velocity = {U(rng), U(rng), 0.5 * U(rng)};
    in.current.heading = M_PI * U(rng);
    in.towers = towers;
    std::vector<Vec3> neighbor;
    for (int k = 0; k <= p.shooting_points; ++k) neighbor.push_back(slots[1].position + (k * 0.1) * in.worker_velocity);
    in.neighbors = {neighbor};
    const auto sol = mpc::solve_step(in, p);
    const auto v = check(in, p, sol);
    CHECK(v.equality <= 1e-6);
    CHECK(sol.residuals.max_equality <= 1e-6);
    CHECK(sol.residuals.max_inequality == doctest::Approx(v.inequality > 0 ? v.inequality : 0.0).epsilon(1e-9));
    if (sol.status == mpc::MpcStatus::Converged) {
      ++converged;
      CHECK(v.inequality <= 1e-4);
      for (const auto& z : sol.predicted) {
        const double d = world::norm(z.position - in.worker_position);
        CHECK(d >= p.d_min - 0.5);  // worker moves at most 0.6 m over the horizon
      }
    } else {
      CHECK_FALSE(sol.note.empty());
    }
  }
  CHECK(converged >= 54);
}

TEST_CASE("mpc: band residuals are nonpositive for a vehicle closing fast on the worker") {
  mpc::MpcParams p;
  mpc::MpcInput in = hover_input();
  in.current.position = {3.9, 0.0, 0.0};
  in.current.velocity = {-3.0, 0.0, 0.0};  // braking distance 1.8 m
  const auto sol = mpc::solve_step(in, p);
  REQUIRE(sol.status == mpc::MpcStatus::Converged);
  for (int k = 1; k <= p.shooting_points; ++k) {
    const double d = world::norm(sol.predicted[k].position - in.worker_position);
    CHECK(p.d_min - d <= 1e-4);
  }
  // Starting too close, the floor is pushed out at full authority.
  in.current.position = {2.05, 0.0, 0.0};
  in.current.velocity = {0.0, 0.0, 0.0};
  const auto close = mpc::solve_step(in, p);
  CHECK(close.residuals.max_inequality >= 0.0);
  CHECK(close.accelerations[0].x > 0.0);
}

TEST_CASE("mpc: translation invariance") {
  std::vector<world::Tower> towers(1);
  towers[0].center = {0.0, 3.0, 0.0};
  towers[0].radius = 1.0;
  towers[0].height = 20.0;
  auto in = hover_input();
  in.current.position = {6.0, 1.0, 0.5};
  in.current.velocity = {0.3, -0.4, 0.1};
  in.worker_velocity = {0.1, 0.0, 0.0};
  in.towers = towers;
  const mpc::MpcParams p;
  const auto a = mpc::solve_step(in, p);

  const Vec3 shift{12.0, -7.0, 3.0};
  auto moved = in;
  std::vector<world::Tower> t2 = towers;
  t2[0].center = t2[0].center + shift;
  moved.towers = t2;
  moved.current.position = in.current.position + shift;
  moved.slot.position = in.slot.position + shift;
  moved.worker_position = in.worker_position + shift;
  const auto b = mpc::solve_step(moved, p);
  REQUIRE(a.status == b.status);
  for (int k = 0; k < p.shooting_points; ++k) {
    CHECK(world::norm(a.accelerations[k] - b.accelerations[k]) <= 1e-9);
    CHECK(std::abs(a.heading_rates[k] - b.heading_rates[k]) <= 1e-9);
  }
}

TEST_CASE("mpc: warm start shift and iteration count") {
  mpc::MpcSolution prev;
  for (int k = 0; k < 4; ++k) {
    prev.accelerations.push_back(Vec3{double(k), 0.0, 0.0});
    prev.heading_rates.push_back(0.1 * k);
  }
  const auto w = mpc::advance(prev, 4);
  REQUIRE(w.accelerations.size() == 4);
  CHECK(w.accelerations[0].x == 1.0);
  CHECK(w.accelerations[2].x == 3.0);
  CHECK(w.accelerations[3].x == 3.0);
  CHECK(w.heading_rates[3] == doctest::Approx(0.3));
  const auto empty = mpc::advance(mpc::MpcSolution{}, 5);
  CHECK(empty.accelerations.size() == 5);
  CHECK(empty.heading_rates.size() == 5);

  // Closed loop on a walking worker: warm starts should not need more passes than cold ones.
  const mpc::MpcParams p;
  auto in = hover_input();
  in.current.position = {7.0, 2.0, 1.0};
  in.worker_velocity = {0.0, 0.4, 0.1};
  std::vector<int> warm_it, cold_it;
  mpc::MpcSolution last;
  for (int step = 0; step < 30; ++step) {
    const auto cold = mpc::solve_step(in, p);
    const auto warm = mpc::solve_step(in, p, mpc::advance(last, p.shooting_points));
    cold_it.push_back(cold.iterations);
    warm_it.push_back(warm.iterations);
    last = warm;
    in.current = warm.predicted[1];
    in.worker_position = in.worker_position + 0.1 * in.worker_velocity;
    in.slot.position = in.slot.position + 0.1 * in.worker_velocity;
  }
  auto median = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(warm_it) <= median(cold_it));
}

TEST_CASE("mpc: braking sequence") {
  auto in = hover_input();
  in.current.velocity = {2.0, -1.0, 0.05};
  const mpc::MpcParams p;
  const auto b = mpc::braking_sequence(in, p, "test");
  CHECK(b.status == mpc::MpcStatus::Degraded);
  CHECK(b.note == "test");
  CHECK(b.accelerations[0].x == doctest::Approx(-2.5));
  CHECK(b.accelerations[0].z == doctest::Approx(-0.5));
  CHECK(world::norm(b.predicted.back().velocity) <= 1e-12);
  for (double w : b.heading_rates) CHECK(w == 0.0);
}
