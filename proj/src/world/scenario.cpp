#include "towerfleet/world/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "towerfleet/world/geometry.hpp"

namespace towerfleet::world {

std::string to_string(UavStatus s) {
  switch (s) {
    case UavStatus::Active: return "active";
    case UavStatus::Failed: return "failed";
    case UavStatus::Landed: return "landed";
  }
  return "active";
}

UavStatus uav_status_from_string(const std::string& s) {
  if (s == "active") return UavStatus::Active;
  if (s == "failed") return UavStatus::Failed;
  if (s == "landed") return UavStatus::Landed;
  throw std::invalid_argument("unknown uav status '" + s + "'");
}

std::string to_string(MissionTask::Kind k) {
  switch (k) {
    case MissionTask::Kind::Inspect: return "inspect";
    case MissionTask::Kind::Safety: return "safety";
    case MissionTask::Kind::Idle: return "idle";
    case MissionTask::Kind::Recharge: return "recharge";
    case MissionTask::Kind::Land: return "land";
  }
  return "idle";
}

MissionTask::Kind mission_kind_from_string(const std::string& s) {
  if (s == "inspect") return MissionTask::Kind::Inspect;
  if (s == "safety") return MissionTask::Kind::Safety;
  if (s == "idle") return MissionTask::Kind::Idle;
  if (s == "recharge") return MissionTask::Kind::Recharge;
  if (s == "land") return MissionTask::Kind::Land;
  throw std::invalid_argument("unknown task kind '" + s + "'");
}

std::string to_string(OperatorCommand::Kind k) {
  switch (k) {
    case OperatorCommand::Kind::SetFormation: return "set_formation";
    case OperatorCommand::Kind::AssignInspection: return "assign_inspection";
    case OperatorCommand::Kind::InjectFailure: return "inject_failure";
    case OperatorCommand::Kind::Pause: return "pause";
    case OperatorCommand::Kind::Resume: return "resume";
    case OperatorCommand::Kind::SetSpeed: return "set_speed";
  }
  return "pause";
}

const TargetRegion* Scenario::find_region(const std::string& id) const {
  auto it = std::find_if(regions.begin(), regions.end(), [&](const auto& r) { return r.id == id; });
  return it == regions.end() ? nullptr : &*it;
}

const FleetMember* Scenario::find_uav(int id) const {
  auto it = std::find_if(fleet.begin(), fleet.end(), [&](const auto& m) { return m.id == id; });
  return it == fleet.end() ? nullptr : &*it;
}

const WorkerScript* Scenario::find_worker(const std::string& id) const {
  auto it = std::find_if(workers.begin(), workers.end(), [&](const auto& w) { return w.initial.id == id; });
  return it == workers.end() ? nullptr : &*it;
}

namespace {

class Checker {
 public:
  void require(bool ok, std::string field, std::string rule) {
    if (!ok) out_.push_back(Violation{std::move(field), std::move(rule), {}});
  }
  void finite(const Vec3& v, const std::string& field) { require(is_finite(v), field, "finite"); }
  std::vector<Violation> take() { return std::move(out_); }

 private:
  std::vector<Violation> out_;
};

std::string idx(const std::string& name, std::size_t i) { return name + "[" + std::to_string(i) + "]"; }

void check_geometry(Checker& c, const FormationGeometry& g, const std::string& field) {
  c.require(g.distance > 0.0, field + ".distance", "distance > 0");
  c.require(g.inter_uav_angle > 0.0 && g.inter_uav_angle < M_PI, field + ".inter_uav_angle",
            "0 < inter_uav_angle < pi");
}

void check_settings(Checker& c, const Settings& s) {
  const auto& m = s.mpc;
  c.require(m.shooting_points >= 2, "settings.mpc.shooting_points", "W >= 2");
  c.require(m.horizon > 0.0, "settings.mpc.horizon", "horizon > 0");
  c.require(m.d_min < m.d_max, "settings.mpc.d_min", "d_min < d_max");
  c.require(m.w_track >= 0 && m.w_track_rate >= 0 && m.w_track_accel >= 0 && m.w_effort >= 0 && m.w_jerk >= 0 &&
                m.w_visibility_h >= 0 && m.w_visibility_v >= 0 && m.w_yaw_rate >= 0,
            "settings.mpc", "weights >= 0");
  c.require(m.tolerance > 0.0, "settings.mpc.tolerance", "tolerance > 0");
  c.require(m.max_outer_iterations >= 1, "settings.mpc.max_outer_iterations", "max_outer_iterations >= 1");
  c.require(m.v_max > 0.0 && m.a_max > 0.0 && m.yaw_rate_max > 0.0, "settings.mpc", "bounds > 0");
  c.require(s.plant.lag > 0.0, "settings.plant.lag", "lag > 0");
  c.require(s.plant.a_max > 0.0 && s.plant.yaw_rate_max > 0.0, "settings.plant", "clamps > 0");
  c.require(s.tracking.kp > 0.0 && s.tracking.kv > 0.0 && s.tracking.k_heading > 0.0, "settings.tracking",
            "gains > 0");
  c.require(s.sensing.sigma_position >= 0.0 && s.sensing.sigma_velocity >= 0.0 && s.sensing.sigma_worker >= 0.0,
            "settings.sensing", "sigma >= 0");
  c.require(s.planner.ts > 0.0, "settings.planner.ts", "Ts > 0");
  c.require(s.planner.iterations >= 1 && s.planner.restarts >= 1, "settings.planner", "iterations, restarts >= 1");
  c.require(s.planner.kappa_initial > 0.0 && s.planner.kappa_max >= s.planner.kappa_initial, "settings.planner",
            "0 < kappa_initial <= kappa_max");
  c.require(s.planner.tower_faces >= 4, "settings.planner.tower_faces", "tower_faces >= 4");
  c.require(s.manager.tick_period > 0.0, "settings.manager.tick_period", "tick_period > 0");
  c.require(s.manager.reserve_fraction >= 0.0, "settings.manager.reserve_fraction", "reserve_fraction >= 0");
  c.require(s.sim.dt > 0.0, "settings.sim.dt", "dt > 0");
  for (const auto& [name, topic] : s.bus) {
    c.require(topic.rate > 0.0, "settings.bus." + name + ".rate", "rate > 0");
    c.require(topic.latency >= 0.0, "settings.bus." + name + ".latency", "latency >= 0");
    c.require(topic.drop_probability >= 0.0 && topic.drop_probability <= 1.0,
              "settings.bus." + name + ".drop_probability", "drop probability in [0, 1]");
  }
}

}  // namespace

std::map<std::string, TopicConfig> Settings::default_bus() {
  return {
      {"telemetry", TopicConfig{10.0, 0.05, 0.0, 1}},
      {"commands", TopicConfig{10.0, 0.05, 0.0, 2}},
      {"prediction", TopicConfig{10.0, 0.01, 0.0, 3}},
      {"worker", TopicConfig{100.0, 0.01, 0.0, 4}},
  };
}

std::vector<Violation> validate_scenario(const Scenario& s) {
  Checker c;
  c.require(!s.fleet.empty(), "fleet", "fleet non-empty");
  c.require(s.ts > 0.0, "ts", "Ts > 0");
  c.require(s.separation_min > 0.0, "separation_min", "separation_min > 0");
  c.require(s.v_max > 0.0, "v_max", "v_max > 0");
  c.require(s.a_max > 0.0, "a_max", "a_max > 0");

  for (std::size_t i = 0; i < s.towers.size(); ++i) {
    const auto& t = s.towers[i];
    const auto f = idx("towers", i);
    c.finite(t.center, f + ".center");
    c.require(t.radius > 0.0, f + ".radius", "radius > 0");
    c.require(t.height > 0.0, f + ".height", "height > 0");
    c.require(t.insulators.size() <= 12, f + ".insulators", "at most 12 insulators");
    for (std::size_t k = 0; k < t.insulators.size(); ++k) {
      const auto& q = t.insulators[k];
      const bool inside = std::hypot(q.x - t.center.x, q.y - t.center.y) <= 1.1 * t.radius &&
                          q.z >= t.center.z && q.z <= t.center.z + t.height;
      c.require(is_finite(q) && inside, f + idx(".insulators", k), "insulator within cylinder of radius x 1.1");
    }
  }
  for (std::size_t i = 0; i < s.wires.size(); ++i) {
    const auto& w = s.wires[i];
    const auto f = idx("wires", i);
    c.finite(w.endpoint_a, f + ".endpoint_a");
    c.finite(w.endpoint_b, f + ".endpoint_b");
    c.require(!(w.endpoint_a == w.endpoint_b), f, "endpoints distinct");
    c.require(w.clearance_radius > 0.0, f + ".clearance_radius", "clearance_radius > 0");
  }

  std::set<std::string> region_ids;
  for (std::size_t i = 0; i < s.regions.size(); ++i) {
    const auto& r = s.regions[i];
    const auto f = idx("regions", i);
    c.require(!r.id.empty() && region_ids.insert(r.id).second, f + ".id", "unique non-empty id");
    c.finite(r.center, f + ".center");
    c.finite(r.viewpoint, f + ".viewpoint");
    c.require(r.half_extents.x > 0.0 && r.half_extents.y > 0.0 && r.half_extents.z > 0.0, f + ".half_extents",
              "half_extents > 0");
    c.require(r.dwell_time >= 0.0, f + ".dwell_time", "dwell_time >= 0");
    c.require(distance_to_obstacles(r.viewpoint, s.towers, s.wires) > 0.0, f + ".viewpoint",
              "viewpoint outside every obstacle");
  }

  for (std::size_t i = 0; i < s.workers.size(); ++i) {
    const auto& w = s.workers[i];
    const auto f = idx("workers", i);
    c.require(!w.initial.id.empty(), f + ".id", "non-empty id");
    c.finite(w.initial.position, f + ".position");
    c.finite(w.initial.velocity, f + ".velocity");
    for (const auto& p : w.waypoints) c.finite(p, f + ".waypoints");
    c.require(w.speed > 0.0, f + ".speed", "speed > 0");
  }

  std::set<int> uav_ids;
  for (std::size_t i = 0; i < s.fleet.size(); ++i) {
    const auto& m = s.fleet[i];
    const auto f = idx("fleet", i);
    c.require(uav_ids.insert(m.id).second, f + ".id", "unique id");
    c.finite(m.initial.position, f + ".initial.position");
    c.finite(m.initial.velocity, f + ".initial.velocity");
    c.finite(m.initial.acceleration, f + ".initial.acceleration");
    c.require(m.initial.battery_energy >= 0.0, f + ".initial.battery_energy", "battery_energy >= 0");
    c.require(std::abs(m.initial.heading) <= M_PI, f + ".initial.heading", "|heading| <= pi");
    c.require(m.camera.fov_horizontal > 0.0 && m.camera.fov_horizontal < M_PI, f + ".camera.fov_horizontal",
              "0 < fov < pi");
    c.require(m.camera.fov_vertical > 0.0 && m.camera.fov_vertical < M_PI, f + ".camera.fov_vertical",
              "0 < fov < pi");
    c.require(m.discharge_rate > 0.0, f + ".discharge_rate", "discharge_rate > 0");
  }
  for (std::size_t i = 0; i < s.fleet.size(); ++i) {
    for (std::size_t j = i + 1; j < s.fleet.size(); ++j) {
      const double d = norm(s.fleet[i].initial.position - s.fleet[j].initial.position);
      c.require(d >= s.separation_min, idx("fleet", i) + "/" + idx("fleet", j), "initial separation");
    }
  }

  for (std::size_t i = 0; i < s.stations.size(); ++i) c.finite(s.stations[i], idx("stations", i));

  for (std::size_t i = 0; i < s.mission.size(); ++i) {
    const auto& t = s.mission[i];
    const auto f = idx("mission", i);
    c.require(t.team_size >= 1, f + ".team_size", "team_size >= 1");
    c.require(t.duration >= 0.0, f + ".duration", "duration >= 0");
    switch (t.kind) {
      case MissionTask::Kind::Inspect:
        c.require(!t.regions.empty(), f + ".regions", "inspect has >= 1 region");
        for (const auto& r : t.regions) c.require(s.find_region(r) != nullptr, f + ".regions", "region exists");
        c.require(t.deadlines.empty() || t.deadlines.size() == t.regions.size(), f + ".deadlines",
                  "one deadline per region");
        break;
      case MissionTask::Kind::Safety:
        c.require(s.find_worker(t.worker) != nullptr, f + ".worker", "worker exists");
        check_geometry(c, t.geometry, f + ".geometry");
        break;
      case MissionTask::Kind::Recharge:
        c.require(t.station >= 0 && static_cast<std::size_t>(t.station) < s.stations.size(), f + ".station",
                  "station exists");
        break;
      default:
        break;
    }
  }

  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    const auto f = idx("events", i);
    c.require(e.time >= 0.0 && std::isfinite(e.time), f + ".time", "time >= 0");
    if (e.kind == ScenarioEvent::Kind::BatteryAnomaly || e.kind == ScenarioEvent::Kind::UavFailure) {
      c.require(s.find_uav(e.uav) != nullptr, f + ".uav", "uav exists");
    }
    if (e.kind == ScenarioEvent::Kind::BatteryAnomaly) c.require(e.factor > 0.0, f + ".factor", "factor > 0");
  }

  check_settings(c, s.settings);
  return c.take();
}

}  // namespace towerfleet::world
