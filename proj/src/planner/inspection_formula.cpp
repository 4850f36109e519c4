#include <algorithm>
#include <cmath>

#include "towerfleet/planner/inspection.hpp"
#include "towerfleet/world/geometry.hpp"

namespace towerfleet::planner {

using stl::Formula;
using stl::LinearPredicate;
using world::Vec3;

namespace {

int steps(double seconds, double ts) { return static_cast<int>(std::lround(seconds / ts)); }

Formula in_box(std::size_t slot, const world::TargetRegion& r) {
  std::vector<Formula> faces;
  for (int j = 0; j < 3; ++j) {
    const double c = world::axis(r.center, j);
    const double h = world::axis(r.half_extents, j);
    faces.push_back(Formula::predicate(stl::greater_equal(position_index(slot, j), c - h)));
    faces.push_back(Formula::predicate(stl::less_equal(position_index(slot, j), c + h)));
  }
  return Formula::conjunction(std::move(faces));
}

Formula outside_tower(std::size_t slot, const world::Tower& t, double margin, int faces) {
  std::vector<Formula> sides;
  const double reach = t.radius + margin;
  for (int j = 0; j < faces; ++j) {
    const double th = 2.0 * M_PI * j / faces;
    const double nx = std::cos(th), ny = std::sin(th);
    LinearPredicate p{{{position_index(slot, 0), nx}, {position_index(slot, 1), ny}},
                      nx * t.center.x + ny * t.center.y + reach};
    sides.push_back(Formula::predicate(std::move(p)));
  }
  sides.push_back(Formula::predicate(stl::greater_equal(position_index(slot, 2), t.center.z + t.height + margin)));
  return Formula::disjunction(std::move(sides));
}

Formula outside_wire(std::size_t slot, const world::WireSegment& w, double margin) {
  std::vector<Formula> sides;
  const double pad = w.clearance_radius + margin;
  for (int j = 0; j < 3; ++j) {
    const double lo = std::min(world::axis(w.endpoint_a, j), world::axis(w.endpoint_b, j)) - pad;
    const double hi = std::max(world::axis(w.endpoint_a, j), world::axis(w.endpoint_b, j)) + pad;
    sides.push_back(Formula::predicate(stl::less_equal(position_index(slot, j), lo)));
    sides.push_back(Formula::predicate(stl::greater_equal(position_index(slot, j), hi)));
  }
  return Formula::disjunction(std::move(sides));
}

Formula separated(std::size_t a, std::size_t b, double s) {
  std::vector<Formula> sides;
  for (int j = 0; j < 3; ++j) {
    sides.push_back(Formula::predicate(LinearPredicate{{{position_index(a, j), 1.0}, {position_index(b, j), -1.0}}, s}));
    sides.push_back(Formula::predicate(LinearPredicate{{{position_index(a, j), -1.0}, {position_index(b, j), 1.0}}, s}));
  }
  return Formula::disjunction(std::move(sides));
}

std::string uav_tag(int id) { return "uav" + std::to_string(id); }

}  // namespace

std::size_t sample_count(double horizon, double ts) {
  return static_cast<std::size_t>(std::max<long>(std::lround(horizon / ts), 1)) + 1;
}

std::vector<RegionVisit> schedule_visits(const world::Scenario& scenario, const Vec3& start,
                                         const std::vector<std::string>& regions, const std::vector<double>& deadlines) {
  std::vector<RegionVisit> visits;
  Vec3 at = start;
  double clock = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto* r = scenario.find_region(regions[i]);
    if (!r) throw InfeasibleTaskError("unknown region '" + regions[i] + "'");
    clock += 1.5 * world::norm(r->viewpoint - at) / (scenario.settings.planner.cruise_fraction * scenario.v_max) +
             r->dwell_time + scenario.settings.manager.deadline_slack;
    visits.push_back(RegionVisit{r->id, i < deadlines.size() ? deadlines[i] : clock});
    at = r->viewpoint;
  }
  return visits;
}

InspectionTask task_from_scenario(const world::Scenario& scenario) {
  InspectionTask task;
  task.separation_min = scenario.separation_min;
  std::vector<const world::FleetMember*> free;
  for (const auto& m : scenario.fleet) {
    if (m.initial.capabilities.count(world::kInspectionCamera)) free.push_back(&m);
  }
  std::sort(free.begin(), free.end(), [](auto* a, auto* b) { return a->id < b->id; });
  double last = 0.0;
  std::size_t next = 0;
  for (const auto& t : scenario.mission) {
    if (t.kind != world::MissionTask::Kind::Inspect) continue;
    if (next >= free.size()) throw InfeasibleTaskError("more inspection tasks than inspection-capable vehicles");
    const auto* m = free[next++];
    task.uav_ids.push_back(m->id);
    task.initial_states.push_back(m->initial);
    auto visits = schedule_visits(scenario, m->initial.position, t.regions, t.deadlines);
    for (const auto& v : visits) last = std::max(last, v.deadline);
    task.region_visits.push_back(std::move(visits));
  }
  task.horizon = last + scenario.settings.manager.deadline_padding;
  return task;
}

Formula build_inspection_formula(const InspectionTask& task, const world::Scenario& scenario, double ts) {
  if (task.uav_ids.empty()) throw InfeasibleTaskError("task has no vehicles");
  if (task.region_visits.size() != task.uav_ids.size()) throw InfeasibleTaskError("one visit list per vehicle");
  if (!(ts > 0.0)) throw InfeasibleTaskError("Ts must be positive");
  const int last = static_cast<int>(sample_count(task.horizon, ts)) - 1;
  const double margin = scenario.settings.planner.obstacle_margin;
  const int faces = scenario.settings.planner.tower_faces;

  std::vector<Formula> parts;
  for (std::size_t u = 0; u < task.uav_ids.size(); ++u) {
    const std::string tag = uav_tag(task.uav_ids[u]);
    for (const auto& visit : task.region_visits[u]) {
      const auto* r = scenario.find_region(visit.region);
      if (!r) throw InfeasibleTaskError("unknown region '" + visit.region + "'");
      if (visit.deadline < r->dwell_time - 1e-9) {
        throw InfeasibleTaskError("deadline " + std::to_string(visit.deadline) + " s of region '" + r->id +
                                  "' is shorter than its dwell time");
      }
      const int hold = steps(r->dwell_time, ts);
      const int reach = std::max(0, steps(visit.deadline, ts) - hold);
      if (reach + hold > last) {
        throw InfeasibleTaskError("deadline of region '" + r->id + "' lies beyond the plan horizon");
      }
      parts.push_back(Formula::eventually(0, reach, Formula::always(0, hold, in_box(u, *r)),
                                          "visit:" + tag + ":" + r->id));
    }
  }
  for (std::size_t u = 0; u < task.uav_ids.size(); ++u) {
    const std::string tag = uav_tag(task.uav_ids[u]);
    for (std::size_t i = 0; i < scenario.towers.size(); ++i) {
      parts.push_back(Formula::always(0, last, outside_tower(u, scenario.towers[i], margin, faces),
                                      "avoid:" + tag + ":tower" + std::to_string(i)));
    }
    for (std::size_t i = 0; i < scenario.wires.size(); ++i) {
      parts.push_back(Formula::always(0, last, outside_wire(u, scenario.wires[i], margin),
                                      "avoid:" + tag + ":wire" + std::to_string(i)));
    }
  }
  for (std::size_t a = 0; a < task.uav_ids.size(); ++a) {
    for (std::size_t b = a + 1; b < task.uav_ids.size(); ++b) {
      parts.push_back(Formula::always(0, last, separated(a, b, task.separation_min),
                                      "sep:" + uav_tag(task.uav_ids[a]) + ":" + uav_tag(task.uav_ids[b])));
    }
  }
  if (parts.empty()) throw InfeasibleTaskError("task has no requirement: no regions, obstacles or vehicle pairs");
  return Formula::conjunction(std::move(parts), "inspection");
}

}  // namespace towerfleet::planner
