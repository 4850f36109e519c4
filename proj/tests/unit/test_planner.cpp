#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "support/planner_oracle.hpp"
#include "towerfleet/planner/dynamics.hpp"
#include "towerfleet/planner/inspection.hpp"
#include "towerfleet/planner/plan_io.hpp"
#include "towerfleet/stl/robustness.hpp"
#include "towerfleet/stl/text.hpp"
#include "towerfleet/world/geometry.hpp"
#include "towerfleet/world/scenario_io.hpp"

using namespace towerfleet;
using planner::InspectionTask;
using planner::RegionVisit;
using world::Vec3;

namespace {

world::Scenario reference() {
  return world::load_scenario(std::filesystem::path(TOWERFLEET_SCENARIO_DIR) / "inspection_ref.json");
}

/// Open space, one vehicle at (0, 0, 5) at rest.
world::Scenario open_space() {
  world::Scenario s;
  s.name = "open";
  world::FleetMember m;
  m.id = 1;
  m.initial.position = {0.0, 0.0, 5.0};
  m.initial.capabilities = {world::kInspectionCamera};
  s.fleet.push_back(m);
  return s;
}

const planner::PlanResult& reference_plan() {
  static const planner::PlanResult plan = [] {
    const auto s = reference();
    const auto task = planner::task_from_scenario(s);
    const auto t0 = std::chrono::steady_clock::now();
    auto p = planner::plan_inspection(task, s, s.v_max, s.a_max, s.ts);
    MESSAGE("reference plan: " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                               << " s, robustness " << p.robustness << ", iterations " << p.diagnostics.iterations
                               << ", restarts " << p.diagnostics.restarts);
    return p;
  }();
  return plan;
}

double max_dynamics_defect(const planner::Trajectory& tr, double ts) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < tr.p.size(); ++k) {
    const Vec3 dp = tr.p[k + 1] - (tr.p[k] + ts * tr.v[k] + (0.5 * ts * ts) * tr.a[k]);
    const Vec3 dv = tr.v[k + 1] - (tr.v[k] + ts * tr.a[k]);
    worst = std::max({worst, world::norm_inf(dp), world::norm_inf(dv)});
  }
  return worst;
}

void check_bounds(const planner::PlanResult& plan, double v_max, double a_max) {
  for (const auto& tr : plan.trajectories) {
    CHECK(max_dynamics_defect(tr, plan.ts) <= 1e-6);
    for (std::size_t k = 0; k < tr.p.size(); ++k) {
      CHECK(world::norm_inf(tr.v[k]) <= v_max + 1e-9);
      CHECK(world::norm_inf(tr.a[k]) <= a_max + 1e-9);
    }
  }
}

stl::Trace positions(const planner::PlanResult& plan) {
  const std::size_t q = plan.trajectories.size();
  const std::size_t n = plan.trajectories.front().p.size();
  std::vector<double> data(n * q * 3);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t u = 0; u < q; ++u) {
      for (int j = 0; j < 3; ++j) data[k * q * 3 + 3 * u + j] = world::axis(plan.trajectories[u].p[k], j);
    }
  }
  return stl::Trace(plan.ts, 3 * q, std::move(data));
}

}  // namespace

TEST_CASE("visit encoding") {
  auto s = open_space();
  s.regions.push_back(world::TargetRegion{"R", {10.0, 0.0, 5.0}, {1.0, 1.0, 1.0}, 2.0, {10.0, 0.0, 5.0}});
  InspectionTask task{{1}, {{RegionVisit{"R", 10.0}}}, {}, 10.0, 1.0};
  const auto f = planner::build_inspection_formula(task, s, 0.5);
  REQUIRE(f.children().size() == 1);
  const auto& visit = f.children()[0];
  CHECK(visit.label() == "visit:uav1:R");
  CHECK(visit.op() == stl::Op::Eventually);
  CHECK(visit.lo() == 0);
  CHECK(visit.hi() == 16);
  const auto& hold = visit.children()[0];
  CHECK(hold.op() == stl::Op::Globally);
  CHECK(hold.hi() == 4);
  CHECK(hold.children()[0].op() == stl::Op::And);
  CHECK(hold.children()[0].children().size() == 6);
}

TEST_CASE("separation and obstacle encoding") {
  const auto s = reference();
  InspectionTask task{{1, 2}, {{}, {}}, {}, 5.0, 1.0};
  const auto f = planner::build_inspection_formula(task, s, 0.1);
  std::vector<std::string> labels;
  for (const auto& c : f.children()) labels.push_back(c.label());
  CHECK(labels == std::vector<std::string>{"avoid:uav1:tower0", "avoid:uav1:wire0", "avoid:uav2:tower0",
                                           "avoid:uav2:wire0", "sep:uav1:uav2"});
  const auto& sep = f.children().back();
  CHECK(sep.op() == stl::Op::Globally);
  CHECK(sep.hi() == 50);
  CHECK(sep.children()[0].op() == stl::Op::Or);
  CHECK(sep.children()[0].children().size() == 6);

  // 2 m apart along x only: separation robustness is 2 - 1 = 1.
  stl::Trace tr(0.1, 6);
  for (int k = 0; k <= 50; ++k) tr.push_back(std::vector<double>{30.0, 0.0, 5.0, 32.0, 0.0, 5.0});
  CHECK(stl::robustness(sep, tr, 0) == doctest::Approx(1.0));
  // Tower prism: 30 m from the axis, reach 16 m along the +x face.
  CHECK(stl::robustness(f.children()[0], tr, 0) == doctest::Approx(14.0));
}

TEST_CASE("infeasible windows are rejected") {
  auto s = open_space();
  s.regions.push_back(world::TargetRegion{"R", {10.0, 0.0, 5.0}, {1.0, 1.0, 1.0}, 3.0, {10.0, 0.0, 5.0}});
  CHECK_THROWS_AS(planner::build_inspection_formula(InspectionTask{{1}, {{RegionVisit{"R", 2.0}}}, {}, 10.0, 1.0}, s, 0.1),
                  planner::InfeasibleTaskError);
  CHECK_THROWS_AS(planner::build_inspection_formula(InspectionTask{{1}, {{RegionVisit{"R", 20.0}}}, {}, 10.0, 1.0}, s, 0.1),
                  planner::InfeasibleTaskError);
  CHECK_THROWS_AS(planner::build_inspection_formula(InspectionTask{{1}, {{RegionVisit{"X", 5.0}}}, {}, 10.0, 1.0}, s, 0.1),
                  planner::InfeasibleTaskError);
}

TEST_CASE("adjoint gradient matches finite differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01(0.0, 1.0);
  const std::size_t samples = 12, q = 2;
  const double ts = 0.2;
  std::vector<Vec3> p0{{1.0, 2.0, 3.0}, {-1.0, 0.0, 2.0}};
  std::vector<Vec3> v0{{0.5, 0.0, -0.2}, {0.0, 0.3, 0.1}};
  std::vector<double> a(q * (samples - 1) * 3);
  for (auto& x : a) x = n01(rng);
  std::vector<double> w(samples * q * 3);
  for (auto& x : w) x = n01(rng);
  auto objective = [&](const std::vector<double>& ctrl) {
    const auto r = planner::rollout(p0, v0, ctrl, samples, ts);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * r.positions[i];
    return acc;
  };
  const auto g = planner::control_gradient(w, q, samples, ts);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto plus = a, minus = a;
    plus[i] += 1e-4;
    minus[i] -= 1e-4;
    CHECK(g[i] == doctest::Approx((objective(plus) - objective(minus)) / 2e-4).epsilon(1e-7));
  }
}

TEST_CASE("projection keeps velocity and acceleration inside the box") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01(0.0, 5.0);
  const std::size_t samples = 60;
  std::vector<Vec3> p0{{0.0, 0.0, 0.0}};
  std::vector<Vec3> v0{{1.0, -2.0, 0.0}};
  std::vector<double> a((samples - 1) * 3);
  for (auto& x : a) x = n01(rng);
  planner::project_controls(v0, a, samples, 0.1, 3.0, 2.5);
  const auto r = planner::rollout(p0, v0, a, samples, 0.1);
  for (double x : a) CHECK(std::abs(x) <= 2.5 + 1e-12);
  for (double v : r.velocities) CHECK(std::abs(v) <= 3.0 + 1e-9);
}

TEST_CASE("reference inspection plan") {
  const auto s = reference();
  const auto task = planner::task_from_scenario(s);
  const auto& plan = reference_plan();
  CHECK(plan.success);
  CHECK(plan.robustness > 0.0);
  check_bounds(plan, s.v_max, s.a_max);

  const auto f = planner::build_inspection_formula(task, s, s.ts);
  CHECK(stl::robustness(f, positions(plan), 0) == plan.robustness);

  const auto& a = plan.trajectories[0];
  const auto& b = plan.trajectories[1];
  for (std::size_t k = 0; k < a.p.size(); ++k) {
    CHECK(world::norm_inf(a.p[k] - b.p[k]) >= s.separation_min);
    for (const auto& tr : plan.trajectories) {
      CHECK(world::distance_to_obstacles(tr.p[k], s.towers, s.wires) >= s.settings.planner.obstacle_margin);
    }
  }
  for (std::size_t u = 0; u < task.uav_ids.size(); ++u) {
    for (const auto& visit : task.region_visits[u]) {
      const auto* r = s.find_region(visit.region);
      const std::size_t last = static_cast<std::size_t>(std::lround(visit.deadline / s.ts));
      std::size_t run = 0, best = 0;
      for (std::size_t k = 0; k <= last; ++k) {
        run = world::in_region(plan.trajectories[u].p[k], *r) ? run + 1 : 0;
        best = std::max(best, run);
      }
      CHECK(best >= static_cast<std::size_t>(std::lround(r->dwell_time / s.ts)) + 1);
    }
  }
}

TEST_CASE("planning is deterministic and independent of vehicle order") {
  auto s = reference();
  s.settings.planner.restarts = 2;
  s.settings.planner.iterations = 60;
  auto task = planner::task_from_scenario(s);
  const auto p1 = planner::plan_inspection(task, s, s.v_max, s.a_max, s.ts);
  const auto p2 = planner::plan_inspection(task, s, s.v_max, s.a_max, s.ts);
  CHECK(p1 == p2);

  InspectionTask swapped = task;
  std::swap(swapped.uav_ids[0], swapped.uav_ids[1]);
  std::swap(swapped.region_visits[0], swapped.region_visits[1]);
  std::swap(swapped.initial_states[0], swapped.initial_states[1]);
  const auto p3 = planner::plan_inspection(swapped, s, s.v_max, s.a_max, s.ts);
  CHECK(p3.trajectories[0] == p1.trajectories[1]);
  CHECK(p3.trajectories[1] == p1.trajectories[0]);
  CHECK(p3.robustness == p1.robustness);
}

TEST_CASE("vehicle already inside its region stays put") {
  auto s = open_space();
  s.regions.push_back(world::TargetRegion{"R", {0.0, 0.0, 5.0}, {1.0, 1.0, 1.0}, 0.0, {0.0, 0.0, 5.0}});
  const InspectionTask task{{1}, {{RegionVisit{"R", 2.0}}}, {}, 2.0, 1.0};
  const auto plan = planner::plan_inspection(task, s, 3.0, 2.5, 0.1);
  CHECK(plan.success);
  CHECK(plan.robustness == doctest::Approx(1.0));
  for (const auto& a : plan.trajectories[0].a) CHECK(world::norm_inf(a) <= 1e-6);
}

TEST_CASE("minimum-time reach matches the bang-bang optimum") {
  // First instance: 1.2 s at 2.5 m/s^2 to 3 m/s, then 2.4 s cruise reaches 9 m at 3.6 s.
  const testing::ReachLimits lim;
  const auto fixtures = testing::load_reach_fixtures(TOWERFLEET_FIXTURE_DIR "/planner_1d.json");
  REQUIRE(fixtures.size() >= 4);
  CHECK(testing::bang_bang_reach(fixtures[0], lim) == doctest::Approx(0.0).epsilon(1e-9));
  for (const auto& r : fixtures) {
    const auto s = testing::reach_scenario(r, lim);
    const InspectionTask task{{1}, {{RegionVisit{"goal", r.deadline}}}, {}, r.deadline, 1.0};
    const auto plan = planner::plan_inspection(task, s, lim.v_max, lim.a_max, lim.ts);
    check_bounds(plan, lim.v_max, lim.a_max);
    const double oracle = testing::bang_bang_reach(r, lim);
    MESSAGE(r.name << ": bang-bang oracle " << oracle << ", planner " << plan.robustness);
    CHECK(std::abs(plan.robustness - oracle) <= 0.05);
  }
}

TEST_CASE("heading reference during visits points at the region") {
  auto s = open_space();
  const std::vector<std::pair<Vec3, double>> cases{
      {{1.0, 0.0, 0.0}, 0.0}, {{0.0, 1.0, 0.0}, M_PI / 2}, {{1.0, 1.0, 0.0}, M_PI / 4}};
  for (const auto& [offset, expected] : cases) {
    s.regions = {world::TargetRegion{"R", Vec3{0.0, 0.0, 5.0} + offset, {2.0, 2.0, 2.0}, 1.0, {0.0, 0.0, 5.0}}};
    const InspectionTask task{{1}, {{RegionVisit{"R", 1.0}}}, {}, 1.0, 1.0};
    planner::PlanResult plan;
    plan.ts = 0.1;
    planner::Trajectory tr;
    tr.uav_id = 1;
    tr.p.assign(11, Vec3{0.0, 0.0, 5.0});
    tr.v.assign(11, Vec3{});
    tr.a.assign(11, Vec3{});
    plan.trajectories.push_back(tr);
    const auto psi = planner::heading_reference(task, plan, s);
    for (double h : psi[0]) CHECK(h == doctest::Approx(expected));
  }
}

TEST_CASE("heading follows velocity between visits and holds when slow") {
  auto s = open_space();
  const InspectionTask task{{1}, {{}}, {}, 0.3, 1.0};
  planner::PlanResult plan;
  planner::Trajectory tr;
  tr.uav_id = 1;
  tr.p.assign(4, Vec3{});
  tr.a.assign(4, Vec3{});
  tr.v = {Vec3{0.0, 0.0, 0.0}, Vec3{0.0, 1.0, 0.0}, Vec3{0.01, 0.0, 0.0}, Vec3{-1.0, 0.0, 0.0}};
  plan.trajectories.push_back(tr);
  const auto psi = planner::heading_reference(task, plan, s);
  CHECK(psi[0][0] == 0.0);
  CHECK(psi[0][1] == doctest::Approx(M_PI / 2));
  CHECK(psi[0][2] == doctest::Approx(M_PI / 2));
  CHECK(psi[0][3] == doctest::Approx(M_PI));
}

TEST_CASE("plan dump") {
  planner::Trajectory tr;
  tr.uav_id = 3;
  tr.p = {Vec3{1, 2, 3}};
  tr.v = {Vec3{}};
  tr.a = {Vec3{}};
  tr.psi = {0.5};
  const auto csv = planner::trajectory_csv(tr, 0.1);
  CHECK(csv == "t,px,py,pz,vx,vy,vz,ax,ay,az,psi\n0.000,1,2,3,0,0,0,0,0,0,0.5\n");
}
