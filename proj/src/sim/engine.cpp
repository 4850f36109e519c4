#include "towerfleet/sim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "towerfleet/mpc/formation.hpp"
#include "towerfleet/stl/robustness.hpp"
#include "towerfleet/world/geometry.hpp"
#include "towerfleet/world/scenario_io.hpp"

namespace towerfleet::sim {

using world::Vec3;

namespace {

constexpr double kTouchdownHeight = 0.05;
constexpr double kUnbounded = 1e6;  // stands in for d_max while a vehicle is still approaching
constexpr std::size_t kRecentDecisions = 5;

std::int64_t periods(double period, double dt, const char* name) {
  const double ratio = period / dt;
  const double n = std::round(ratio);
  if (!(period > 0.0) || n < 1.0 || std::abs(ratio - n) > 1e-6) {
    throw ConfigurationError(std::string(name) + " period " + std::to_string(period) +
                             " s is not a positive multiple of dt = " + std::to_string(dt) + " s");
  }
  return static_cast<std::int64_t>(n);
}

nlohmann::json vec(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 sample_prediction(const PredictionMsg& m, double t) {
  if (m.positions.empty()) return {};
  const double s = std::max(0.0, (t - m.t0) / m.dt);
  const auto k = static_cast<std::size_t>(s);
  if (k + 1 >= m.positions.size()) return m.positions.back();
  const double f = s - static_cast<double>(k);
  return m.positions[k] + f * (m.positions[k + 1] - m.positions[k]);
}

}  // namespace

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Hover: return "hover";
    case Mode::Inspect: return "inspect";
    case Mode::Safety: return "safety";
    case Mode::Idle: return "idle";
    case Mode::Recharge: return "recharge";
    case Mode::Land: return "land";
    case Mode::Landed: return "landed";
  }
  return "hover";
}

SimClock SimClock::from(const world::Scenario& s) {
  const auto& sim = s.settings.sim;
  if (!(sim.dt > 0.0)) throw ConfigurationError("dt must be positive");
  SimClock c;
  c.dt = sim.dt;
  c.manager = periods(s.settings.manager.tick_period, sim.dt, "manager tick");
  c.telemetry = periods(sim.telemetry_period, sim.dt, "telemetry");
  c.snapshot = periods(sim.snapshot_period, sim.dt, "snapshot");
  c.mpc = periods(s.settings.mpc.replan_period, sim.dt, "safety controller");
  c.plan_sample = periods(s.ts, sim.dt, "plan sampling");
  return c;
}

double Metrics::fov_fraction() const {
  return fov_samples == 0 ? 1.0 : static_cast<double>(fov_inside) / static_cast<double>(fov_samples);
}

void to_json(nlohmann::json& j, const Metrics& m) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j = nlohmann::json::object();
  j["steps"] = m.steps;
  j["min_pairwise_distance"] = finite_or_null(m.min_pairwise_distance);
  j["min_obstacle_clearance"] = finite_or_null(m.min_obstacle_clearance);
  j["separation_violations"] = m.separation_violations;
  j["clearance_violations"] = m.clearance_violations;
  j["safety_violations"] = m.safety_violations();
  j["fov"] = {{"samples", m.fov_samples}, {"inside", m.fov_inside}, {"fraction", m.fov_fraction()}};
  j["max_tracking_error"] = m.max_tracking_error;
  j["mpc"] = {{"solves", m.mpc.solves},
              {"converged", m.mpc.converged},
              {"degraded", m.mpc.degraded},
              {"converged_violations", m.mpc.converged_violations},
              {"max_converged_inequality", m.mpc.max_converged_inequality},
              {"max_converged_equality", m.mpc.max_converged_equality}};
  auto& ex = j["executed_plans"] = nlohmann::json::array();
  for (const auto& e : m.executed) {
    ex.push_back({{"t0", e.t0},
                  {"uavs", e.uavs},
                  {"planned_robustness", e.planned_robustness},
                  {"executed_robustness", e.executed_robustness}});
  }
  j["region_completion"] = m.region_completion;
  auto& tc = j["task_completion"] = nlohmann::json::object();
  for (const auto& [id, t] : m.task_completion) tc[std::to_string(id)] = t;
  j["planner_failures"] = m.planner_failures;
  j["mission_complete"] = m.mission_complete;
  j["mission_complete_time"] = m.mission_complete_time >= 0.0 ? nlohmann::json(m.mission_complete_time)
                                                              : nlohmann::json(nullptr);
}

enum class Source : std::uint8_t { Hold, Plan, Mpc, Line, Descend };

struct Engine::Job {
  std::int64_t start_step = 0;
  double t0 = 0.0;
  planner::InspectionTask task;
  planner::PlanResult plan;
  std::size_t samples = 0;
  std::optional<stl::Trace> executed;
  bool intact = true;
  bool done = false;
};

struct Engine::Vehicle {
  world::FleetMember member;
  world::UavState truth;
  world::UavState estimate;
  PowerModel power;
  Rng sensing{0, 0};
  Mode mode = Mode::Hover;
  int task_id = -1;
  bool task_done = false;
  double task_start = 0.0;
  double duration = 0.0;

  Source source = Source::Hold;
  Vec3 hold_position;
  double hold_heading = 0.0;

  std::shared_ptr<Job> job;
  std::size_t job_slot = 0;
  std::vector<std::string> regions;    // still to inspect
  std::vector<std::string> completed;  // of the current task
  std::vector<double> deadlines;       // explicit, consumed by the next plan
  std::map<std::string, double> inside_since;

  int worker = -1;
  world::FormationGeometry geometry;
  int slot = 0;
  int team_size = 1;
  std::optional<mpc::MpcSolution> solution;
  double solution_time = 0.0;
  mpc::WarmStart warm;

  Vec3 line_from, line_to;
  double line_t0 = 0.0, line_total = 0.0, line_v = 0.0, line_a = 0.0;

  double descend_t0 = 0.0, descend_z0 = 0.0;
};

Engine::Engine(const world::Scenario& scenario, std::uint64_t seed)
    : scenario_(scenario),
      seed_(seed),
      clock_(SimClock::from(scenario)),
      bus_(scenario.settings.bus, seed),
      manager_(scenario) {
  if (auto v = world::validate_scenario(scenario_); !v.empty()) throw world::ScenarioValidationError(std::move(v));
  for (const char* topic : {"telemetry", "commands", "prediction", "worker"}) {
    if (!scenario_.settings.bus.count(topic)) throw ConfigurationError(std::string("bus topic '") + topic + "' missing");
  }
  telemetry_sub_ = bus_.subscribe("telemetry");
  command_sub_ = bus_.subscribe("commands");
  worker_sub_ = bus_.subscribe("worker");
  prediction_sub_ = bus_.subscribe("prediction");

  for (const auto& m : scenario_.fleet) {
    auto v = std::make_unique<Vehicle>();
    v->member = m;
    v->truth = m.initial;
    v->power = PowerModel{m.discharge_rate, scenario_.settings.plant.accel_power, 1.0};
    v->sensing = Rng(seed, stream::kSensing + static_cast<std::uint64_t>(m.id));
    v->estimate = sense(v->truth, scenario_.settings.sensing.sigma_position, scenario_.settings.sensing.sigma_velocity,
                        v->sensing);
    v->hold_position = m.initial.position;
    v->hold_heading = m.initial.heading;
    vehicles_.push_back(std::move(v));
  }
  std::sort(vehicles_.begin(), vehicles_.end(), [](const auto& a, const auto& b) { return a->member.id < b->member.id; });
  for (std::size_t i = 0; i < scenario_.workers.size(); ++i) {
    worker_paths_.emplace_back(scenario_.workers[i]);
    worker_filters_.emplace_back(clock_.dt, scenario_.settings.sim.worker_filter_tau);
    worker_rngs_.emplace_back(seed, stream::kWorker + i);
  }
  events_ = scenario_.events;
  std::stable_sort(events_.begin(), events_.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  log_.telemetry_csv = kTelemetryHeader;
}

Engine::~Engine() = default;

double Engine::stamp(std::int64_t n) const { return std::round(static_cast<double>(n) * clock_.dt * 1e6) / 1e6; }

double Engine::time() const { return stamp(step_); }

const world::UavState& Engine::truth(int uav) const {
  for (const auto& v : vehicles_) {
    if (v->member.id == uav) return v->truth;
  }
  throw std::out_of_range("unknown uav " + std::to_string(uav));
}

Mode Engine::mode(int uav) const {
  for (const auto& v : vehicles_) {
    if (v->member.id == uav) return v->mode;
  }
  throw std::out_of_range("unknown uav " + std::to_string(uav));
}

void Engine::event(nlohmann::json e) {
  nlohmann::json line = {{"t", time()}};
  line.update(e);
  log_.events.push_back(std::move(line));
}

void Engine::submit(const world::OperatorCommand& command) {
  event({{"kind", "operator"}, {"command", command}});
  manager_.enqueue(command);
}

void Engine::apply_events() {
  const double t = time();
  while (next_event_ < events_.size() && events_[next_event_].time <= t + 1e-9) {
    const auto& e = events_[next_event_++];
    using K = world::ScenarioEvent::Kind;
    if (e.kind == K::Operator) {
      submit(e.command);
      continue;
    }
    for (auto& v : vehicles_) {
      if (v->member.id != e.uav) continue;
      if (e.kind == K::BatteryAnomaly) {
        v->power.factor *= e.factor;
        event({{"kind", "battery_anomaly"}, {"uav", e.uav}, {"factor", e.factor}});
      } else {
        v->truth.status = world::UavStatus::Failed;
        if (v->mode != Mode::Land && v->mode != Mode::Landed) hold(*v, Mode::Hover);
        event({{"kind", "uav_failure"}, {"uav", e.uav}});
      }
    }
  }
}

void Engine::deliver() {
  const double t = time();
  for (auto& e : bus_.poll(telemetry_sub_, t)) manager_.observe(std::get<tasks::UavTelemetry>(e.payload));
  for (auto& e : bus_.poll(worker_sub_, t)) {
    const auto& m = std::get<WorkerMsg>(e.payload);
    worker_filters_.at(static_cast<std::size_t>(e.key)).update(m.position, m.time);
  }
  for (auto& e : bus_.poll(prediction_sub_, t)) {
    auto m = std::get<PredictionMsg>(e.payload);
    auto it = predictions_.find(m.uav);
    if (it == predictions_.end() || it->second.t0 <= m.t0) predictions_[m.uav] = std::move(m);
  }
}

void Engine::manager_tick() {
  const double t = time();
  auto r = manager_.tick(t);
  std::map<int, std::vector<tasks::Command>> bundles;
  for (const auto& c : r.commands) bundles[c.uav].push_back(c);
  for (auto& [uav, cmds] : bundles) {
    const bool sent = bus_.publish("commands", uav, cmds, t);
    for (const auto& c : cmds) log_.commands.push_back({{"t", t}, {"published", sent}, {"command", c}});
  }
  nlohmann::json d = r.decision;
  log_.decisions.push_back(d);
  if (r.decision.branch != "none") {
    nlohmann::json brief = {{"t", t}, {"branch", r.decision.branch}, {"notes", r.decision.notes}};
    auto& cmds = brief["commands"] = nlohmann::json::array();
    for (const auto& c : r.decision.commands) cmds.push_back({{"kind", tasks::to_string(c.kind)}, {"uav", c.uav}});
    recent_decisions_.push_back(std::move(brief));
  }
  if (recent_decisions_.size() > kRecentDecisions) recent_decisions_.pop_front();

  const bool complete = manager_.mission_complete();
  if (complete && !complete_logged_) {
    metrics_.mission_complete_time = t;
    event({{"kind", "mission_complete"}});
  }
  complete_logged_ = complete;
}

void Engine::hold(Vehicle& v, Mode mode) {
  if (v.job) v.job->intact = v.job->intact && v.job->done;
  v.job.reset();
  v.source = Source::Hold;
  v.hold_position = v.estimate.position;
  v.hold_heading = v.estimate.heading;
  v.mode = mode;
}

void Engine::finish_task(Vehicle& v) {
  v.task_done = true;
  if (v.task_id >= 0 && !metrics_.task_completion.count(v.task_id)) {
    metrics_.task_completion[v.task_id] = time();
    event({{"kind", "task_complete"}, {"uav", v.member.id}, {"task", v.task_id}});
  }
}

void Engine::handle(const tasks::Command& c) {
  Vehicle* found = nullptr;
  for (auto& v : vehicles_) {
    if (v->member.id == c.uav) found = v.get();
  }
  if (!found) return;
  Vehicle& v = *found;
  const double t = time();
  using K = tasks::Command::Kind;
  if (v.mode == Mode::Landed) return;
  if (v.truth.status == world::UavStatus::Failed && c.kind != K::Land) return;

  if (c.kind == K::SetFormation) {
    if (v.mode == Mode::Safety && v.task_id == c.task_id) v.geometry = c.geometry;
    return;
  }
  if (c.kind == K::Fail) {
    v.truth.status = world::UavStatus::Failed;
    hold(v, Mode::Hover);
    event({{"kind", "uav_failure"}, {"uav", v.member.id}});
    return;
  }
  if (v.task_id != c.task_id) {
    v.completed.clear();
    v.inside_since.clear();
  }
  v.task_id = c.task_id;
  v.task_done = false;
  v.task_start = t;
  if (c.kind != K::Inspect) v.regions.clear();
  switch (c.kind) {
    case K::Inspect:
      v.mode = Mode::Inspect;
      v.regions.clear();
      for (const auto& r : c.regions) {
        if (std::find(v.completed.begin(), v.completed.end(), r) == v.completed.end()) v.regions.push_back(r);
      }
      v.deadlines = c.deadlines;
      break;
    case K::Safety: {
      hold(v, Mode::Safety);
      v.source = Source::Mpc;
      v.worker = -1;
      for (std::size_t i = 0; i < scenario_.workers.size(); ++i) {
        if (scenario_.workers[i].initial.id == c.worker) v.worker = static_cast<int>(i);
      }
      v.geometry = c.geometry;
      v.slot = c.slot;
      v.team_size = c.team_size;
      v.duration = c.duration;
      v.solution.reset();
      v.warm = {};
      break;
    }
    case K::Idle:
      hold(v, Mode::Idle);
      v.duration = c.duration;
      break;
    case K::Recharge: {
      hold(v, Mode::Recharge);
      v.source = Source::Line;
      v.line_from = v.estimate.position;
      v.line_to = c.target;
      v.line_t0 = t;
      v.line_v = scenario_.settings.planner.cruise_fraction * scenario_.v_max;
      v.line_a = scenario_.a_max;
      const double d = world::norm(v.line_to - v.line_from);
      v.line_total = d <= v.line_v * v.line_v / v.line_a ? 2.0 * std::sqrt(d / v.line_a) : d / v.line_v + v.line_v / v.line_a;
      break;
    }
    case K::Land:
      hold(v, Mode::Land);
      v.source = Source::Descend;
      v.descend_t0 = t;
      v.descend_z0 = v.estimate.position.z;
      v.task_id = -1;
      break;
    case K::Fail:
    case K::SetFormation: break;
  }
}

void Engine::fail_job(const std::vector<int>& uavs, const std::string& reason) {
  metrics_.planner_failures.push_back(reason);
  event({{"kind", "planner_failure"}, {"uavs", uavs}, {"reason", reason}});
  for (auto& v : vehicles_) {
    if (std::find(uavs.begin(), uavs.end(), v->member.id) == uavs.end()) continue;
    manager_.report_failure(v->member.id, v->task_id, reason);
    v->regions.clear();
    hold(*v, Mode::Hover);
  }
}

void Engine::replan_inspection(const std::vector<int>& requested) {
  std::vector<Vehicle*> team;
  for (auto& v : vehicles_) {
    if (v->mode == Mode::Inspect && !v->task_done && !v->regions.empty() &&
        v->truth.status == world::UavStatus::Active) {
      team.push_back(v.get());
    }
  }
  if (team.empty()) return;
  planner::InspectionTask task;
  task.separation_min = scenario_.separation_min;
  std::vector<int> ids;
  for (auto* v : team) ids.push_back(v->member.id);
  double last = 0.0;
  try {
    for (auto* v : team) {
      const bool fresh = std::find(requested.begin(), requested.end(), v->member.id) != requested.end();
      auto visits = planner::schedule_visits(scenario_, v->estimate.position, v->regions,
                                             fresh ? v->deadlines : std::vector<double>{});
      for (const auto& r : visits) last = std::max(last, r.deadline);
      task.uav_ids.push_back(v->member.id);
      task.initial_states.push_back(v->estimate);
      task.region_visits.push_back(std::move(visits));
      v->deadlines.clear();
    }
    task.horizon = last + scenario_.settings.manager.deadline_padding;
    auto job = std::make_shared<Job>();
    job->plan = planner::plan_inspection(task, scenario_, scenario_.v_max, scenario_.a_max, scenario_.ts);
    if (!job->plan.success) {
      fail_job(ids, "planner-failure: " + job->plan.most_violated);
      return;
    }
    const auto headings = planner::heading_reference(task, job->plan, scenario_);
    for (std::size_t u = 0; u < job->plan.trajectories.size(); ++u) job->plan.trajectories[u].psi = headings[u];
    job->start_step = step_;
    job->t0 = time();
    job->samples = planner::sample_count(task.horizon, scenario_.ts);
    job->executed = stl::Trace(scenario_.ts, 3 * team.size());
    job->task = std::move(task);
    for (std::size_t u = 0; u < team.size(); ++u) {
      Vehicle& v = *team[u];
      if (v.job) v.job->intact = false;
      v.job = job;
      v.job_slot = u;
      v.source = Source::Plan;
    }
    event({{"kind", "plan"},
           {"uavs", ids},
           {"robustness", job->plan.robustness},
           {"horizon", job->task.horizon}});
  } catch (const planner::InfeasibleTaskError& e) {
    fail_job(ids, std::string("planner-failure: ") + e.what());
  }
}

void Engine::solve_safety(Vehicle& v) {
  const double t = time();
  const auto& params = scenario_.settings.mpc;
  if (v.worker < 0) return;
  const auto& filter = worker_filters_[static_cast<std::size_t>(v.worker)];
  const Vec3 worker_p = filter.initialized() ? filter.position(t) : worker_paths_[v.worker].at(t).position;
  const Vec3 worker_v = filter.initialized() ? filter.velocity() : Vec3{};

  mpc::MpcInput in;
  in.current = v.estimate;
  in.slot = mpc::formation_slots(worker_p, v.geometry, v.team_size).at(static_cast<std::size_t>(v.slot));
  in.worker_position = worker_p;
  in.worker_velocity = worker_v;
  in.camera = v.member.camera;
  in.towers = scenario_.towers;
  in.wires = scenario_.wires;
  const double h = params.horizon / params.shooting_points;
  for (const auto& other : vehicles_) {
    if (other.get() == &v || other->mode != Mode::Safety) continue;
    auto it = predictions_.find(other->member.id);
    if (it == predictions_.end()) continue;
    std::vector<Vec3> samples;
    for (int k = 0; k <= params.shooting_points; ++k) samples.push_back(sample_prediction(it->second, t + k * h));
    in.neighbors.push_back(std::move(samples));
  }
  world::MpcParams p = params;
  if (world::norm(v.estimate.position - worker_p) > p.d_max) p.d_max = kUnbounded;

  auto sol = mpc::solve_step(in, p, v.warm);
  const auto res = mpc::evaluate_residuals(in, p, sol);
  auto& st = metrics_.mpc;
  ++st.solves;
  if (sol.status == mpc::MpcStatus::Converged) {
    ++st.converged;
    st.max_converged_inequality = std::max(st.max_converged_inequality, res.max_inequality);
    st.max_converged_equality = std::max(st.max_converged_equality, res.max_equality);
    if (res.max_inequality > params.tolerance || res.max_equality > params.tolerance) ++st.converged_violations;
  } else {
    ++st.degraded;
  }
  PredictionMsg msg{v.member.id, t, sol.dt, {}};
  for (const auto& s : sol.predicted) msg.positions.push_back(s.position);
  bus_.publish("prediction", v.member.id, std::move(msg), t);
  v.warm = mpc::advance(sol, params.shooting_points);
  v.solution = std::move(sol);
  v.solution_time = t;
}

Reference Engine::reference(const Vehicle& v, double t) const {
  Reference r;
  r.position = v.hold_position;
  r.heading = v.hold_heading;
  switch (v.source) {
    case Source::Hold: break;
    case Source::Plan: {
      const auto& tr = v.job->plan.trajectories[v.job_slot];
      const double ts = v.job->plan.ts;
      const double tau = t - v.job->t0;
      const std::size_t last = tr.p.size() - 1;
      const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(tau / ts + 1e-9)));
      if (k >= last) {
        r.position = tr.p[last];
        r.heading = tr.psi.empty() ? v.hold_heading : tr.psi[last];
        break;
      }
      const double s = tau - static_cast<double>(k) * ts;
      r.position = tr.p[k] + s * tr.v[k] + (0.5 * s * s) * tr.a[k];
      r.velocity = tr.v[k] + s * tr.a[k];
      r.acceleration = tr.a[k];
      r.heading = tr.psi.empty() ? v.hold_heading : tr.psi[k];
      break;
    }
    case Source::Mpc: {
      if (!v.solution) {
        r.position = v.estimate.position;
        r.heading = v.estimate.heading;
        break;
      }
      const auto& sol = *v.solution;
      const double tau = t - v.solution_time;
      const std::size_t w = sol.accelerations.size();
      const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(tau / sol.dt + 1e-9)));
      if (k >= w) {
        r.position = sol.predicted.back().position;
        r.heading = sol.predicted.back().heading;
        break;
      }
      const double s = tau - static_cast<double>(k) * sol.dt;
      const auto& x = sol.predicted[k];
      r.position = x.position + s * x.velocity + (0.5 * s * s) * sol.accelerations[k];
      r.velocity = x.velocity + s * sol.accelerations[k];
      r.acceleration = sol.accelerations[k];
      r.heading = world::wrap_angle(x.heading + s * sol.heading_rates[k]);
      break;
    }
    case Source::Line: {
      const double d = world::norm(v.line_to - v.line_from);
      if (d <= 0.0) {
        r.position = v.line_to;
        break;
      }
      const Vec3 dir = (1.0 / d) * (v.line_to - v.line_from);
      const double T = v.line_total;
      const double tau = std::clamp(t - v.line_t0, 0.0, T);
      const double ta = std::min(v.line_v / v.line_a, 0.5 * T);
      const double vp = v.line_a * ta;
      double s = 0.0, sd = 0.0, sdd = 0.0;
      if (tau < ta) {
        s = 0.5 * v.line_a * tau * tau;
        sd = v.line_a * tau;
        sdd = v.line_a;
      } else if (tau < T - ta) {
        s = 0.5 * v.line_a * ta * ta + vp * (tau - ta);
        sd = vp;
      } else {
        const double rem = T - tau;
        s = d - 0.5 * v.line_a * rem * rem;
        sd = v.line_a * rem;
        sdd = tau < T ? -v.line_a : 0.0;
      }
      r.position = v.line_from + std::min(s, d) * dir;
      r.velocity = sd * dir;
      r.acceleration = sdd * dir;
      break;
    }
    case Source::Descend: {
      const double speed = scenario_.settings.sim.land_speed;
      const double z = v.descend_z0 - speed * (t - v.descend_t0);
      r.position.z = std::max(0.0, z);
      if (z > 0.0) r.velocity.z = -speed;
      break;
    }
  }
  return r;
}

void Engine::bookkeeping() {
  const double t = time();
  std::vector<std::shared_ptr<Job>> jobs;
  bool need_replan = false;
  for (auto& vp : vehicles_) {
    Vehicle& v = *vp;
    if (v.job && std::find(jobs.begin(), jobs.end(), v.job) == jobs.end()) jobs.push_back(v.job);
    switch (v.mode) {
      case Mode::Inspect: {
        if (v.truth.status != world::UavStatus::Active) break;
        std::vector<std::string> left;
        for (const auto& id : v.regions) {
          const auto* r = scenario_.find_region(id);
          bool done = false;
          if (r && world::in_region(v.truth.position, *r)) {
            auto [it, fresh] = v.inside_since.emplace(id, t);
            if (t - it->second >= r->dwell_time - 1e-9) done = true;
          } else {
            v.inside_since.erase(id);
          }
          if (done) {
            v.completed.push_back(id);
            if (!metrics_.region_completion.count(id)) metrics_.region_completion[id] = t;
            event({{"kind", "region_complete"}, {"uav", v.member.id}, {"region", id}});
          } else {
            left.push_back(id);
          }
        }
        v.regions = std::move(left);
        if (v.regions.empty()) {
          finish_task(v);
          v.mode = Mode::Hover;  // keeps following the plan to its end, then holds
        } else if (v.source != Source::Plan ||
                   (v.job && t >= v.job->t0 + v.job->task.horizon - 1e-9)) {
          need_replan = true;
        }
        break;
      }
      case Mode::Safety:
      case Mode::Idle:
        if (!v.task_done && t - v.task_start >= v.duration - 1e-9) {
          finish_task(v);
          hold(v, Mode::Hover);
        }
        break;
      case Mode::Recharge:
        if (!v.task_done && t - v.line_t0 >= v.line_total - 1e-9 &&
            world::norm(v.truth.position - v.line_to) < 0.5) {
          v.truth.battery_energy = v.member.initial.battery_energy;
          v.truth.status = world::UavStatus::Active;
          v.power.factor = 1.0;
          event({{"kind", "recharged"}, {"uav", v.member.id}});
          finish_task(v);
          hold(v, Mode::Hover);
        }
        break;
      case Mode::Land:
        if (v.truth.position.z <= kTouchdownHeight) {
          v.truth.position.z = 0.0;
          v.truth.velocity = {};
          v.truth.acceleration = {};
          v.truth.status = world::UavStatus::Landed;
          v.mode = Mode::Landed;
          event({{"kind", "landed"}, {"uav", v.member.id}});
        }
        break;
      case Mode::Hover:
      case Mode::Landed: break;
    }
  }
  if (need_replan) replan_inspection({});

  for (auto& job : jobs) {
    if (job->done) continue;
    const std::int64_t rel = step_ - job->start_step;
    if (rel % clock_.plan_sample != 0) continue;
    const auto k = static_cast<std::size_t>(rel / clock_.plan_sample);
    if (k >= job->samples) continue;
    std::vector<double> sample;
    for (int id : job->task.uav_ids) {
      const Vec3& p = truth(id).position;
      sample.insert(sample.end(), {p.x, p.y, p.z});
    }
    job->executed->push_back(sample);
    if (k + 1 == job->samples) {
      job->done = true;
      if (job->intact) {
        const auto f = planner::build_inspection_formula(job->task, scenario_, scenario_.ts);
        metrics_.executed.push_back(
            ExecutedPlan{job->t0, job->task.uav_ids, job->plan.robustness, stl::robustness(f, *job->executed)});
      }
    }
  }
}

void Engine::publish_telemetry() {
  const double t = time();
  char row[512];
  for (auto& vp : vehicles_) {
    const Vehicle& v = *vp;
    tasks::UavTelemetry tel;
    tel.id = v.member.id;
    tel.time = t;
    tel.state = v.estimate;
    tel.state.battery_energy = v.truth.battery_energy;
    tel.state.status = v.truth.status;
    tel.task_id = v.task_id;
    tel.task_done = v.task_done;
    tel.completed_regions = v.completed;
    if (v.mode == Mode::Safety || v.mode == Mode::Idle) {
      tel.progress = v.duration > 0.0 ? std::clamp((t - v.task_start) / v.duration, 0.0, 1.0) : 1.0;
    } else if (v.mode == Mode::Inspect) {
      const double total = static_cast<double>(v.completed.size() + v.regions.size());
      tel.progress = total > 0.0 ? static_cast<double>(v.completed.size()) / total : 1.0;
    } else if (v.task_done) {
      tel.progress = 1.0;
    }
    bus_.publish("telemetry", v.member.id, tel, t);

    const auto& s = v.truth;
    std::snprintf(row, sizeof(row), "%.6f,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n", t,
                  v.member.id, s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z,
                  s.acceleration.x, s.acceleration.y, s.acceleration.z, s.heading, s.battery_energy,
                  world::to_string(s.status).c_str());
    log_.telemetry_csv += row;
  }
}

nlohmann::json Engine::snapshot() const {
  const double t = time();
  nlohmann::json s = {{"t", t}, {"step", step_}};
  auto& uavs = s["uavs"] = nlohmann::json::array();
  for (const auto& vp : vehicles_) {
    const Vehicle& v = *vp;
    const double full = v.member.initial.battery_energy;
    uavs.push_back({{"id", v.member.id},
                    {"position", vec(v.truth.position)},
                    {"velocity", vec(v.truth.velocity)},
                    {"heading", v.truth.heading},
                    {"battery", v.truth.battery_energy},
                    {"battery_fraction", full > 0.0 ? v.truth.battery_energy / full : 0.0},
                    {"status", world::to_string(v.truth.status)},
                    {"mode", to_string(v.mode)},
                    {"task", v.task_id},
                    {"regions_left", v.regions},
                    {"regions_done", v.completed}});
  }
  auto& workers = s["workers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < worker_paths_.size(); ++i) {
    const auto w = worker_paths_[i].at(t);
    workers.push_back({{"id", w.id}, {"position", vec(w.position)}, {"velocity", vec(w.velocity)}});
  }
  const auto& plan = manager_.plan();
  nlohmann::json assignments = nlohmann::json::object();
  for (const auto& [id, q] : plan.assignment) {
    auto& a = assignments[std::to_string(id)] = nlohmann::json::array();
    for (const auto& task : q) a.push_back({{"id", task.id}, {"kind", world::to_string(task.kind)}});
  }
  nlohmann::json pending = nlohmann::json::array();
  for (const auto& task : plan.pending) pending.push_back(task.id);
  s["plan"] = {{"assignments", assignments}, {"pending", pending}};
  s["decisions"] = nlohmann::json(std::vector<nlohmann::json>(recent_decisions_.begin(), recent_decisions_.end()));
  s["mission_complete"] = manager_.mission_complete();
  return s;
}

void Engine::record_metrics() {
  const double t = time();
  const auto& sim = scenario_.settings.sim;
  const double allowance = sim.safety_violation_allowance;
  const double margin = std::min(scenario_.settings.planner.obstacle_margin, scenario_.settings.mpc.obstacle_margin);
  std::vector<const Vehicle*> airborne;
  for (const auto& v : vehicles_) {
    if (v->mode != Mode::Landed) airborne.push_back(v.get());
  }
  double pair = world::kNoObstacle;
  for (std::size_t i = 0; i < airborne.size(); ++i) {
    for (std::size_t j = i + 1; j < airborne.size(); ++j) {
      pair = std::min(pair, world::norm(airborne[i]->truth.position - airborne[j]->truth.position));
    }
  }
  metrics_.min_pairwise_distance = std::min(metrics_.min_pairwise_distance, pair);
  if (pair < scenario_.separation_min - allowance) ++metrics_.separation_violations;

  double clearance = world::kNoObstacle;
  for (const auto* v : airborne) {
    clearance = std::min(clearance, world::distance_to_obstacles(v->truth.position, scenario_.towers, scenario_.wires));
  }
  metrics_.min_obstacle_clearance = std::min(metrics_.min_obstacle_clearance, clearance);
  if (clearance < margin - allowance) ++metrics_.clearance_violations;

  for (const auto* v : airborne) {
    if (v->mode == Mode::Safety && v->worker >= 0 && t >= v->task_start + sim.fov_transient - 1e-9) {
      const auto w = worker_paths_[v->worker].at(t);
      ++metrics_.fov_samples;
      try {
        const auto z = mpc::perception(v->truth.position, v->truth.heading, w.position, v->member.camera);
        if (mpc::in_field_of_view(z, v->member.camera)) ++metrics_.fov_inside;
      } catch (const mpc::DegenerateBearingError&) {
      }
    }
    if (v->source == Source::Plan && v->job && t <= v->job->t0 + v->job->task.horizon + 1e-9) {
      const Reference r = reference(*v, t);
      metrics_.max_tracking_error = std::max(metrics_.max_tracking_error, world::norm(v->truth.position - r.position));
    }
  }
}

void Engine::advance_vehicles() {
  const double t = time();
  const auto& s = scenario_.settings;
  for (auto& vp : vehicles_) {
    Vehicle& v = *vp;
    if (v.mode == Mode::Landed) continue;
    const auto cmd = track(reference(v, t), v.estimate, s.tracking, s.plant);
    const auto status = v.truth.status;
    v.truth = plant_step(v.truth, cmd, s.plant, v.power, clock_.dt);
    if (status == world::UavStatus::Failed) v.truth.status = status;
    if (v.truth.status == world::UavStatus::Failed && status == world::UavStatus::Active) {
      event({{"kind", "battery_depleted"}, {"uav", v.member.id}});
      if (v.mode != Mode::Land) hold(v, Mode::Hover);
    }
    v.estimate = sense(v.truth, s.sensing.sigma_position, s.sensing.sigma_velocity, v.sensing);
  }
}

void Engine::step() {
  const double t = time();
  apply_events();
  deliver();
  if (step_ % clock_.manager == 0) manager_tick();

  std::vector<int> inspect;
  for (auto& e : bus_.poll(command_sub_, t)) {
    for (const auto& c : std::get<std::vector<tasks::Command>>(e.payload)) {
      handle(c);
      if (c.kind == tasks::Command::Kind::Inspect) inspect.push_back(c.uav);
    }
  }
  if (!inspect.empty()) replan_inspection(inspect);

  for (auto& v : vehicles_) {
    if (v->mode == Mode::Safety && v->truth.status == world::UavStatus::Active &&
        (!v->solution || step_ % clock_.mpc == 0)) {
      solve_safety(*v);
    }
  }

  bookkeeping();
  for (std::size_t i = 0; i < worker_paths_.size(); ++i) {
    const double sw = scenario_.settings.sensing.sigma_worker;
    auto& rng = worker_rngs_[i];
    const Vec3 p = worker_paths_[i].at(t).position;
    const Vec3 z = p + Vec3{sw * rng.normal(), sw * rng.normal(), sw * rng.normal()};
    bus_.publish("worker", static_cast<int>(i), WorkerMsg{scenario_.workers[i].initial.id, t, z}, t);
  }
  if (step_ % clock_.telemetry == 0) publish_telemetry();
  if (step_ % clock_.snapshot == 0) log_.snapshots.push_back(snapshot());
  record_metrics();
  advance_vehicles();
  ++step_;
  metrics_.steps = step_;
}

void Engine::run_until(double duration) {
  const auto total = static_cast<std::int64_t>(std::llround(duration / clock_.dt));
  while (step_ < total) step();
}

MissionLog Engine::log() const {
  MissionLog out = log_;
  Metrics m = metrics_;
  m.mission_complete = manager_.mission_complete() && m.planner_failures.empty();
  if (!m.mission_complete) m.mission_complete_time = -1.0;
  out.metrics = m;
  out.metrics["manager_failures"] = manager_.failures();
  auto& topics = out.bus_stats["topics"] = nlohmann::json::object();
  for (const auto& [name, st] : bus_.stats()) topics[name] = st;
  return out;
}

MissionLog run(const world::Scenario& scenario, double duration, std::uint64_t seed) {
  Engine engine(scenario, seed);
  engine.run_until(duration);
  return engine.log();
}

}  // namespace towerfleet::sim
