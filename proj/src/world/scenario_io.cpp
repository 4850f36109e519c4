#include "towerfleet/world/scenario_io.hpp"

#include <fstream>
#include <sstream>

namespace towerfleet::world {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

json capabilities_json(const CapabilitySet& caps) { return json(std::vector<std::string>(caps.begin(), caps.end())); }

CapabilitySet capabilities_from(const json& j) {
  CapabilitySet caps;
  for (const auto& c : j) caps.insert(c.get<std::string>());
  return caps;
}

json state_json(const UavState& s) {
  return json{{"position", s.position},
              {"velocity", s.velocity},
              {"acceleration", s.acceleration},
              {"heading", s.heading},
              {"heading_rate", s.heading_rate},
              {"battery_energy", s.battery_energy},
              {"capabilities", capabilities_json(s.capabilities)},
              {"status", to_string(s.status)}};
}

UavState state_from(const json& j) {
  UavState s;
  read_opt(j, "position", s.position);
  read_opt(j, "velocity", s.velocity);
  read_opt(j, "acceleration", s.acceleration);
  read_opt(j, "heading", s.heading);
  read_opt(j, "heading_rate", s.heading_rate);
  read_opt(j, "battery_energy", s.battery_energy);
  if (j.contains("capabilities")) s.capabilities = capabilities_from(j.at("capabilities"));
  if (j.contains("status")) s.status = uav_status_from_string(j.at("status").get<std::string>());
  return s;
}

json settings_json(const Settings& s) {
  const auto& p = s.planner;
  const auto& m = s.mpc;
  json bus = json::object();
  for (const auto& [name, t] : s.bus) {
    bus[name] = json{{"rate", t.rate}, {"latency", t.latency}, {"drop_probability", t.drop_probability},
                     {"stream", t.stream}};
  }
  return json{
      {"planner",
       {{"ts", p.ts}, {"obstacle_margin", p.obstacle_margin}, {"iterations", p.iterations},
        {"restarts", p.restarts}, {"kappa_initial", p.kappa_initial}, {"kappa_max", p.kappa_max},
        {"cruise_fraction", p.cruise_fraction}, {"tower_faces", p.tower_faces},
        {"stop_on_success", p.stop_on_success}}},
      {"mpc",
       {{"horizon", m.horizon}, {"shooting_points", m.shooting_points}, {"w_track", m.w_track},
        {"w_track_rate", m.w_track_rate}, {"w_track_accel", m.w_track_accel}, {"w_effort", m.w_effort},
        {"w_jerk", m.w_jerk}, {"w_visibility_h", m.w_visibility_h}, {"w_visibility_v", m.w_visibility_v},
        {"w_yaw_rate", m.w_yaw_rate}, {"d_min", m.d_min}, {"d_max", m.d_max},
        {"separation_min", m.separation_min}, {"obstacle_margin", m.obstacle_margin}, {"v_max", m.v_max},
        {"a_max", m.a_max}, {"yaw_rate_max", m.yaw_rate_max}, {"max_outer_iterations", m.max_outer_iterations},
        {"tolerance", m.tolerance}, {"replan_period", m.replan_period}}},
      {"plant",
       {{"lag", s.plant.lag}, {"a_max", s.plant.a_max}, {"yaw_rate_max", s.plant.yaw_rate_max},
        {"accel_power", s.plant.accel_power}}},
      {"tracking", {{"kp", s.tracking.kp}, {"kv", s.tracking.kv}, {"k_heading", s.tracking.k_heading}}},
      {"sensing",
       {{"sigma_position", s.sensing.sigma_position}, {"sigma_velocity", s.sensing.sigma_velocity},
        {"sigma_worker", s.sensing.sigma_worker}}},
      {"manager",
       {{"tick_period", s.manager.tick_period}, {"critical_endurance", s.manager.critical_endurance},
        {"reserve_fraction", s.manager.reserve_fraction}, {"deadline_slack", s.manager.deadline_slack},
        {"deadline_padding", s.manager.deadline_padding}}},
      {"sim",
       {{"dt", s.sim.dt}, {"telemetry_period", s.sim.telemetry_period}, {"snapshot_period", s.sim.snapshot_period},
        {"worker_filter_tau", s.sim.worker_filter_tau},
        {"safety_violation_allowance", s.sim.safety_violation_allowance},
        {"fov_transient", s.sim.fov_transient}, {"land_speed", s.sim.land_speed}}},
      {"bus", bus},
  };
}

Settings settings_from(const json& j) {
  Settings s;
  if (auto it = j.find("planner"); it != j.end()) {
    auto& p = s.planner;
    read_opt(*it, "ts", p.ts);
    read_opt(*it, "obstacle_margin", p.obstacle_margin);
    read_opt(*it, "iterations", p.iterations);
    read_opt(*it, "restarts", p.restarts);
    read_opt(*it, "kappa_initial", p.kappa_initial);
    read_opt(*it, "kappa_max", p.kappa_max);
    read_opt(*it, "cruise_fraction", p.cruise_fraction);
    read_opt(*it, "tower_faces", p.tower_faces);
    read_opt(*it, "stop_on_success", p.stop_on_success);
  }
  if (auto it = j.find("mpc"); it != j.end()) {
    auto& m = s.mpc;
    read_opt(*it, "horizon", m.horizon);
    read_opt(*it, "shooting_points", m.shooting_points);
    read_opt(*it, "w_track", m.w_track);
    read_opt(*it, "w_track_rate", m.w_track_rate);
    read_opt(*it, "w_track_accel", m.w_track_accel);
    read_opt(*it, "w_effort", m.w_effort);
    read_opt(*it, "w_jerk", m.w_jerk);
    read_opt(*it, "w_visibility_h", m.w_visibility_h);
    read_opt(*it, "w_visibility_v", m.w_visibility_v);
    read_opt(*it, "w_yaw_rate", m.w_yaw_rate);
    read_opt(*it, "d_min", m.d_min);
    read_opt(*it, "d_max", m.d_max);
    read_opt(*it, "separation_min", m.separation_min);
    read_opt(*it, "obstacle_margin", m.obstacle_margin);
    read_opt(*it, "v_max", m.v_max);
    read_opt(*it, "a_max", m.a_max);
    read_opt(*it, "yaw_rate_max", m.yaw_rate_max);
    read_opt(*it, "max_outer_iterations", m.max_outer_iterations);
    read_opt(*it, "tolerance", m.tolerance);
    read_opt(*it, "replan_period", m.replan_period);
  }
  if (auto it = j.find("plant"); it != j.end()) {
    read_opt(*it, "lag", s.plant.lag);
    read_opt(*it, "a_max", s.plant.a_max);
    read_opt(*it, "yaw_rate_max", s.plant.yaw_rate_max);
    read_opt(*it, "accel_power", s.plant.accel_power);
  }
  if (auto it = j.find("tracking"); it != j.end()) {
    read_opt(*it, "kp", s.tracking.kp);
    read_opt(*it, "kv", s.tracking.kv);
    read_opt(*it, "k_heading", s.tracking.k_heading);
  }
  if (auto it = j.find("sensing"); it != j.end()) {
    read_opt(*it, "sigma_position", s.sensing.sigma_position);
    read_opt(*it, "sigma_velocity", s.sensing.sigma_velocity);
    read_opt(*it, "sigma_worker", s.sensing.sigma_worker);
  }
  if (auto it = j.find("manager"); it != j.end()) {
    read_opt(*it, "tick_period", s.manager.tick_period);
    read_opt(*it, "critical_endurance", s.manager.critical_endurance);
    read_opt(*it, "reserve_fraction", s.manager.reserve_fraction);
    read_opt(*it, "deadline_slack", s.manager.deadline_slack);
    read_opt(*it, "deadline_padding", s.manager.deadline_padding);
  }
  if (auto it = j.find("sim"); it != j.end()) {
    read_opt(*it, "dt", s.sim.dt);
    read_opt(*it, "telemetry_period", s.sim.telemetry_period);
    read_opt(*it, "snapshot_period", s.sim.snapshot_period);
    read_opt(*it, "worker_filter_tau", s.sim.worker_filter_tau);
    read_opt(*it, "safety_violation_allowance", s.sim.safety_violation_allowance);
    read_opt(*it, "fov_transient", s.sim.fov_transient);
    read_opt(*it, "land_speed", s.sim.land_speed);
  }
  if (auto it = j.find("bus"); it != j.end()) {
    for (const auto& [name, t] : it->items()) {
      TopicConfig cfg = s.bus.count(name) ? s.bus.at(name) : TopicConfig{};
      read_opt(t, "rate", cfg.rate);
      read_opt(t, "latency", cfg.latency);
      read_opt(t, "drop_probability", cfg.drop_probability);
      read_opt(t, "stream", cfg.stream);
      s.bus[name] = cfg;
    }
  }
  return s;
}

json mission_json(const MissionTask& t) {
  json j{{"kind", to_string(t.kind)}, {"team_size", t.team_size}, {"capabilities", capabilities_json(t.capabilities)}};
  switch (t.kind) {
    case MissionTask::Kind::Inspect:
      j["regions"] = t.regions;
      j["deadlines"] = t.deadlines;
      break;
    case MissionTask::Kind::Safety:
      j["worker"] = t.worker;
      j["geometry"] = t.geometry;
      j["duration"] = t.duration;
      break;
    case MissionTask::Kind::Recharge:
      j["station"] = t.station;
      break;
    default:
      j["duration"] = t.duration;
      break;
  }
  return j;
}

MissionTask mission_from(const json& j) {
  MissionTask t;
  t.kind = mission_kind_from_string(j.at("kind").get<std::string>());
  read_opt(j, "regions", t.regions);
  read_opt(j, "deadlines", t.deadlines);
  read_opt(j, "worker", t.worker);
  read_opt(j, "geometry", t.geometry);
  read_opt(j, "team_size", t.team_size);
  read_opt(j, "duration", t.duration);
  read_opt(j, "station", t.station);
  if (j.contains("capabilities")) t.capabilities = capabilities_from(j.at("capabilities"));
  return t;
}

json event_json(const ScenarioEvent& e) {
  switch (e.kind) {
    case ScenarioEvent::Kind::BatteryAnomaly:
      return json{{"time", e.time}, {"kind", "battery_anomaly"}, {"uav", e.uav}, {"factor", e.factor}};
    case ScenarioEvent::Kind::UavFailure:
      return json{{"time", e.time}, {"kind", "uav_failure"}, {"uav", e.uav}};
    case ScenarioEvent::Kind::Operator:
      break;
  }
  return json{{"time", e.time}, {"kind", "operator"}, {"command", e.command}};
}

ScenarioEvent event_from(const json& j) {
  ScenarioEvent e;
  e.time = j.at("time").get<double>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "battery_anomaly") {
    e.kind = ScenarioEvent::Kind::BatteryAnomaly;
    e.uav = j.at("uav").get<int>();
    e.factor = j.at("factor").get<double>();
  } else if (kind == "uav_failure") {
    e.kind = ScenarioEvent::Kind::UavFailure;
    e.uav = j.at("uav").get<int>();
  } else if (kind == "operator") {
    e.kind = ScenarioEvent::Kind::Operator;
    e.command = operator_command_from_json(j.at("command"));
  } else {
    throw std::invalid_argument("unknown event kind '" + kind + "'");
  }
  return e;
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string violation_context(const std::string& text, const Violation& v) {
  std::string key = v.field.substr(0, v.field.find_first_of(".[/"));
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return {};
  return " (line " + std::to_string(line_col(text, pos).first) + ")";
}

}  // namespace

void to_json(json& j, const Vec3& v) { j = json::array({v.x, v.y, v.z}); }

void from_json(const json& j, Vec3& v) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, z]");
  v = Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(json& j, const FormationGeometry& g) {
  j = json{{"distance", g.distance}, {"azimuth_center", g.azimuth_center}, {"elevation", g.elevation},
           {"inter_uav_angle", g.inter_uav_angle}};
}

void from_json(const json& j, FormationGeometry& g) {
  read_opt(j, "distance", g.distance);
  read_opt(j, "azimuth_center", g.azimuth_center);
  read_opt(j, "elevation", g.elevation);
  read_opt(j, "inter_uav_angle", g.inter_uav_angle);
}

void to_json(json& j, const OperatorCommand& c) {
  j = json{{"type", to_string(c.kind)}};
  switch (c.kind) {
    case OperatorCommand::Kind::SetFormation:
      if (c.distance) j["distance"] = *c.distance;
      if (c.azimuth_center) j["azimuth_center"] = *c.azimuth_center;
      if (c.elevation) j["elevation"] = *c.elevation;
      if (c.inter_uav_angle) j["inter_uav_angle"] = *c.inter_uav_angle;
      break;
    case OperatorCommand::Kind::AssignInspection:
      j["regions"] = c.regions;
      if (!c.deadlines.empty()) j["deadlines"] = c.deadlines;
      if (c.uav >= 0) j["uav"] = c.uav;
      break;
    case OperatorCommand::Kind::InjectFailure:
      j["uav"] = c.uav;
      break;
    case OperatorCommand::Kind::SetSpeed:
      j["speed"] = c.speed;
      break;
    default:
      break;
  }
}

OperatorCommand operator_command_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("command must be an object");
  const auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) throw std::invalid_argument("missing string field 'type'");
  const auto type = type_it->get<std::string>();
  auto number = [&](const char* key) -> std::optional<double> {
    auto it = j.find(key);
    if (it == j.end()) return std::nullopt;
    if (!it->is_number()) throw std::invalid_argument(std::string("field '") + key + "' must be a number");
    return it->get<double>();
  };
  OperatorCommand c;
  if (type == "set_formation") {
    c.kind = OperatorCommand::Kind::SetFormation;
    c.distance = number("distance");
    c.azimuth_center = number("azimuth_center");
    c.elevation = number("elevation");
    c.inter_uav_angle = number("inter_uav_angle");
    if (!c.distance && !c.azimuth_center && !c.elevation && !c.inter_uav_angle) {
      throw std::invalid_argument("set_formation needs at least one geometry field");
    }
    if (c.distance && !(*c.distance > 0.0)) throw std::invalid_argument("distance must be > 0");
    if (c.inter_uav_angle && !(*c.inter_uav_angle > 0.0 && *c.inter_uav_angle < M_PI)) {
      throw std::invalid_argument("inter_uav_angle must lie in (0, pi)");
    }
  } else if (type == "assign_inspection") {
    c.kind = OperatorCommand::Kind::AssignInspection;
    auto it = j.find("regions");
    if (it == j.end() || !it->is_array() || it->empty()) throw std::invalid_argument("regions must be a non-empty array");
    for (const auto& r : *it) {
      if (!r.is_string()) throw std::invalid_argument("region ids must be strings");
      c.regions.push_back(r.get<std::string>());
    }
    if (auto d = j.find("deadlines"); d != j.end()) {
      if (!d->is_array() || d->size() != c.regions.size()) throw std::invalid_argument("one deadline per region");
      for (const auto& x : *d) {
        if (!x.is_number()) throw std::invalid_argument("deadlines must be numbers");
        c.deadlines.push_back(x.get<double>());
      }
    }
    if (auto u = j.find("uav"); u != j.end()) {
      if (!u->is_number_integer()) throw std::invalid_argument("uav must be an integer");
      c.uav = u->get<int>();
    }
  } else if (type == "inject_failure") {
    c.kind = OperatorCommand::Kind::InjectFailure;
    auto u = j.find("uav");
    if (u == j.end() || !u->is_number_integer()) throw std::invalid_argument("inject_failure needs integer 'uav'");
    c.uav = u->get<int>();
  } else if (type == "pause") {
    c.kind = OperatorCommand::Kind::Pause;
  } else if (type == "resume") {
    c.kind = OperatorCommand::Kind::Resume;
  } else if (type == "set_speed") {
    c.kind = OperatorCommand::Kind::SetSpeed;
    auto s = number("speed");
    if (!s || !(*s > 0.0)) throw std::invalid_argument("set_speed needs speed > 0");
    c.speed = *s;
  } else {
    throw std::invalid_argument("unknown command type '" + type + "'");
  }
  return c;
}

ScenarioValidationError::ScenarioValidationError(std::vector<Violation> violations)
    : std::runtime_error([&] {
        std::string msg = "scenario invalid:";
        for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.rule + v.context;
        return msg;
      }()),
      violations_(std::move(violations)) {}

json scenario_to_json(const Scenario& s) {
  json towers = json::array();
  for (const auto& t : s.towers) {
    towers.push_back(
        {{"center", t.center}, {"radius", t.radius}, {"height", t.height}, {"insulators", t.insulators}});
  }
  json wires = json::array();
  for (const auto& w : s.wires) {
    wires.push_back({{"endpoint_a", w.endpoint_a}, {"endpoint_b", w.endpoint_b}, {"clearance_radius", w.clearance_radius}});
  }
  json regions = json::array();
  for (const auto& r : s.regions) {
    regions.push_back({{"id", r.id}, {"center", r.center}, {"half_extents", r.half_extents},
                       {"dwell_time", r.dwell_time}, {"viewpoint", r.viewpoint}});
  }
  json workers = json::array();
  for (const auto& w : s.workers) {
    workers.push_back({{"id", w.initial.id}, {"position", w.initial.position}, {"velocity", w.initial.velocity},
                       {"waypoints", w.waypoints}, {"speed", w.speed}});
  }
  json fleet = json::array();
  for (const auto& m : s.fleet) {
    fleet.push_back({{"id", m.id},
                     {"initial", state_json(m.initial)},
                     {"camera",
                      {{"fov_horizontal", m.camera.fov_horizontal}, {"fov_vertical", m.camera.fov_vertical},
                       {"mount_pitch", m.camera.mount_pitch}}},
                     {"discharge_rate", m.discharge_rate}});
  }
  json mission = json::array();
  for (const auto& t : s.mission) mission.push_back(mission_json(t));
  json events = json::array();
  for (const auto& e : s.events) events.push_back(event_json(e));
  return json{{"name", s.name},
              {"towers", towers},
              {"wires", wires},
              {"regions", regions},
              {"workers", workers},
              {"fleet", fleet},
              {"stations", s.stations},
              {"mission", mission},
              {"limits", {{"v_max", s.v_max}, {"a_max", s.a_max}}},
              {"separation_min", s.separation_min},
              {"ts", s.ts},
              {"seed", s.seed},
              {"events", events},
              {"settings", settings_json(s.settings)}};
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  read_opt(j, "name", s.name);
  for (const auto& t : j.value("towers", json::array())) {
    Tower tower;
    tower.center = t.at("center").get<Vec3>();
    tower.radius = t.at("radius").get<double>();
    tower.height = t.at("height").get<double>();
    read_opt(t, "insulators", tower.insulators);
    s.towers.push_back(tower);
  }
  for (const auto& w : j.value("wires", json::array())) {
    s.wires.push_back(WireSegment{w.at("endpoint_a").get<Vec3>(), w.at("endpoint_b").get<Vec3>(),
                                  w.at("clearance_radius").get<double>()});
  }
  for (const auto& r : j.value("regions", json::array())) {
    TargetRegion region;
    region.id = r.at("id").get<std::string>();
    region.center = r.at("center").get<Vec3>();
    region.half_extents = r.at("half_extents").get<Vec3>();
    read_opt(r, "dwell_time", region.dwell_time);
    region.viewpoint = r.value("viewpoint", region.center);
    s.regions.push_back(region);
  }
  for (const auto& w : j.value("workers", json::array())) {
    WorkerScript script;
    script.initial.id = w.at("id").get<std::string>();
    script.initial.position = w.at("position").get<Vec3>();
    read_opt(w, "velocity", script.initial.velocity);
    read_opt(w, "waypoints", script.waypoints);
    read_opt(w, "speed", script.speed);
    s.workers.push_back(script);
  }
  for (const auto& m : j.value("fleet", json::array())) {
    FleetMember member;
    member.id = m.at("id").get<int>();
    member.initial = state_from(m.at("initial"));
    if (auto c = m.find("camera"); c != m.end()) {
      read_opt(*c, "fov_horizontal", member.camera.fov_horizontal);
      read_opt(*c, "fov_vertical", member.camera.fov_vertical);
      read_opt(*c, "mount_pitch", member.camera.mount_pitch);
    }
    read_opt(m, "discharge_rate", member.discharge_rate);
    s.fleet.push_back(member);
  }
  read_opt(j, "stations", s.stations);
  for (const auto& t : j.value("mission", json::array())) s.mission.push_back(mission_from(t));
  if (auto l = j.find("limits"); l != j.end()) {
    read_opt(*l, "v_max", s.v_max);
    read_opt(*l, "a_max", s.a_max);
  }
  read_opt(j, "separation_min", s.separation_min);
  read_opt(j, "ts", s.ts);
  read_opt(j, "seed", s.seed);
  for (const auto& e : j.value("events", json::array())) s.events.push_back(event_from(e));
  if (auto st = j.find("settings"); st != j.end()) s.settings = settings_from(*st);
  return s;
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ScenarioParseError("scenario parse error at line " + std::to_string(line) + ", column " +
                                 std::to_string(col) + ": " + e.what(),
                             line, col);
  }
  try {
    return scenario_from_json(doc);
  } catch (const json::exception& e) {
    throw ScenarioParseError(std::string("scenario field error: ") + e.what(), 0, 0);
  } catch (const std::invalid_argument& e) {
    throw ScenarioParseError(std::string("scenario field error: ") + e.what(), 0, 0);
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Scenario s = parse_scenario(text);
  auto violations = validate_scenario(s);
  if (!violations.empty()) {
    for (auto& v : violations) v.context = violation_context(text, v);
    throw ScenarioValidationError(std::move(violations));
  }
  return s;
}

std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2); }

}  // namespace towerfleet::world
