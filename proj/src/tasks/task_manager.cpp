#include "towerfleet/tasks/task_manager.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "towerfleet/mpc/formation.hpp"
#include "towerfleet/world/scenario_io.hpp"

namespace towerfleet::tasks {

using world::Vec3;

std::string to_string(Command::Kind k) {
  switch (k) {
    case Command::Kind::Inspect: return "inspect";
    case Command::Kind::Safety: return "safety";
    case Command::Kind::Idle: return "idle";
    case Command::Kind::Recharge: return "recharge";
    case Command::Kind::Land: return "land";
    case Command::Kind::Fail: return "fail";
    case Command::Kind::SetFormation: return "set_formation";
  }
  return "idle";
}

void to_json(nlohmann::json& j, const Command& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)}, {"uav", c.uav}, {"task", c.task_id}};
  switch (c.kind) {
    case Command::Kind::Inspect:
      j["regions"] = c.regions;
      j["deadlines"] = c.deadlines;
      break;
    case Command::Kind::Safety:
      j["worker"] = c.worker;
      j["slot"] = c.slot;
      j["team_size"] = c.team_size;
      j["duration"] = c.duration;
      [[fallthrough]];
    case Command::Kind::SetFormation:
      j["geometry"] = c.geometry;
      break;
    case Command::Kind::Idle: j["duration"] = c.duration; break;
    case Command::Kind::Recharge:
      j["station"] = c.station;
      j["target"] = c.target;
      break;
    case Command::Kind::Land:
    case Command::Kind::Fail: break;
  }
}

void to_json(nlohmann::json& j, const Decision& d) {
  j = nlohmann::json{{"t", d.time}, {"branch", d.branch}, {"commands", d.commands}};
  auto& a = j["assignments"] = nlohmann::json::object();
  for (const auto& [id, tasks] : d.assignments) a[std::to_string(id)] = tasks;
  auto& m = j["margins"] = nlohmann::json::object();
  for (const auto& [id, v] : d.margins) m[std::to_string(id)] = v;
  auto& e = j["endurance"] = nlohmann::json::object();
  for (const auto& [id, v] : d.endurance) e[std::to_string(id)] = v;
  j["pending"] = d.pending;
  j["notes"] = d.notes;
}

TaskManager::TaskManager(const world::Scenario& scenario)
    : scenario_(scenario),
      alloc_{scenario.v_max, scenario.a_max, scenario.settings.manager.reserve_fraction},
      critical_(scenario.settings.manager.critical_endurance) {
  for (const auto& m : scenario_.fleet) {
    Vehicle v;
    v.id = m.id;
    v.capabilities = m.initial.capabilities;
    v.nominal_rate = m.discharge_rate;
    v.rate = m.discharge_rate;
    v.endurance = estimate_endurance(m.initial, m.discharge_rate);
    vehicles_[m.id] = v;
  }
  for (const auto& m : scenario_.mission) {
    const int copies = m.kind == TaskKind::Safety ? std::max(1, m.team_size) : 1;
    for (int slot = 0; slot < copies; ++slot) plan_.pending.push_back(make_task(m, slot));
  }
}

Task TaskManager::make_task(const world::MissionTask& m, int slot) {
  Task t;
  t.id = next_task_id_++;
  t.kind = m.kind;
  t.regions = m.regions;
  t.deadlines = m.deadlines;
  t.worker = m.worker;
  t.geometry = m.geometry;
  t.slot = slot;
  t.team_size = std::max(1, m.team_size);
  t.station = m.station;
  t.capabilities = m.capabilities;
  t.duration = m.duration;
  switch (m.kind) {
    case TaskKind::Inspect:
      if (t.capabilities.empty()) t.capabilities = {world::kInspectionCamera};
      refresh_inspect(t);
      break;
    case TaskKind::Safety: {
      if (t.capabilities.empty()) t.capabilities = {world::kSafetyCamera};
      const auto* w = scenario_.find_worker(m.worker);
      const Vec3 at = w ? w->initial.position : Vec3{};
      t.start = t.finish = mpc::formation_slots(at, m.geometry, t.team_size)[slot].position;
      break;
    }
    case TaskKind::Recharge:
      if (m.station >= 0 && m.station < static_cast<int>(scenario_.stations.size())) {
        t.start = t.finish = scenario_.stations[m.station];
      }
      break;
    case TaskKind::Idle:
    case TaskKind::Land: t.located = false; break;
  }
  return t;
}

void TaskManager::refresh_inspect(Task& t) const {
  t.duration = 0.0;
  bool first = true;
  Vec3 at;
  for (const auto& id : t.regions) {
    const auto* r = scenario_.find_region(id);
    if (!r) continue;
    if (first) {
      t.start = r->viewpoint;
      first = false;
    } else {
      t.duration += travel_time(at, r->viewpoint, alloc_.v_max, alloc_.a_max);
    }
    t.duration += r->dwell_time;
    at = r->viewpoint;
  }
  t.finish = first ? t.start : at;
}

void TaskManager::observe(const UavTelemetry& tel) {
  auto it = vehicles_.find(tel.id);
  if (it == vehicles_.end()) return;
  auto& v = it->second;
  if (v.have_telemetry && tel.time <= v.last.time) return;  // stale or duplicate
  v.last = tel;
  v.have_telemetry = true;
}

void TaskManager::enqueue(const world::OperatorCommand& command) { operator_queue_.push_back(command); }

void TaskManager::report_failure(int uav, int task_id, const std::string& reason) {
  failures_.push_back("uav" + std::to_string(uav) + " task " + std::to_string(task_id) + ": " + reason);
  auto it = plan_.assignment.find(uav);
  if (it == plan_.assignment.end()) return;
  auto& q = it->second;
  q.erase(std::remove_if(q.begin(), q.end(), [&](const Task& t) { return t.id == task_id; }), q.end());
  vehicles_[uav].dispatched = -1;
  if (q.empty()) plan_.assignment.erase(it);
}

double TaskManager::remaining_work(int uav) const {
  const auto vit = vehicles_.find(uav);
  const auto qit = plan_.assignment.find(uav);
  if (vit == vehicles_.end() || qit == plan_.assignment.end()) return 0.0;
  const auto& v = vit->second;
  Vec3 at = v.last.state.position;
  double total = 0.0;
  bool front = true;
  for (const auto& t : qit->second) {
    if (t.kind == TaskKind::Inspect) {
      for (const auto& id : t.regions) {
        const auto* r = scenario_.find_region(id);
        if (!r) continue;
        total += travel_time(at, r->viewpoint, alloc_.v_max, alloc_.a_max) + r->dwell_time;
        at = r->viewpoint;
      }
    } else {
      if (t.located) total += travel_time(at, t.start, alloc_.v_max, alloc_.a_max);
      const bool running = front && v.dispatched == t.id && v.last.task_id == t.id;
      total += t.duration * (running ? std::clamp(1.0 - v.last.progress, 0.0, 1.0) : 1.0);
      if (t.located) at = t.finish;
    }
    front = false;
  }
  return total;
}

std::vector<Candidate> TaskManager::candidates(const std::set<int>& exclude) const {
  std::vector<Candidate> out;
  for (const auto& [id, v] : vehicles_) {
    if (v.grounded || !v.have_telemetry || exclude.count(id)) continue;
    if (v.last.state.status != world::UavStatus::Active) continue;
    Candidate c;
    c.id = id;
    c.capabilities = v.capabilities;
    c.endurance = v.endurance;
    c.position = v.last.state.position;
    const auto q = plan_.assignment.find(id);
    if (q != plan_.assignment.end() && !q->second.empty()) {
      const auto& back = q->second.back();
      if (back.located) c.position = back.finish;
      c.committed = remaining_work(id);
    }
    out.push_back(c);
  }
  return out;
}

std::vector<Task> TaskManager::assign(std::vector<Task> pool, const std::set<int>& exclude, Decision& d) {
  while (!pool.empty()) {
    const auto cands = candidates(exclude);
    if (cands.empty()) break;
    const auto a = allocate(pool, cands, alloc_);
    if (a.assigned == 0) break;
    std::vector<Task> rest;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const int uav = a.assignee[i];
      if (uav < 0) {
        rest.push_back(std::move(pool[i]));
        continue;
      }
      auto& q = plan_.assignment[uav];
      auto& v = vehicles_[uav];
      Task& t = pool[i];
      // Extra regions for a vehicle already inspecting join its current visit list; it is re-planned.
      if (t.kind == TaskKind::Inspect && !q.empty() && q.back().kind == TaskKind::Inspect) {
        auto& cur = q.back();
        cur.regions.insert(cur.regions.end(), t.regions.begin(), t.regions.end());
        cur.deadlines.clear();
        refresh_inspect(cur);
        if (q.size() == 1) v.dispatched = -1;
        d.notes.push_back("task " + std::to_string(t.id) + " merged into task " + std::to_string(cur.id) + " on uav" +
                          std::to_string(uav));
      } else {
        d.notes.push_back("task " + std::to_string(t.id) + " -> uav" + std::to_string(uav));
        q.push_back(std::move(t));
      }
    }
    pool = std::move(rest);
  }
  return pool;
}

Command TaskManager::command_for(int uav, const Task& t) const {
  Command c;
  c.uav = uav;
  c.task_id = t.id;
  switch (t.kind) {
    case TaskKind::Inspect:
      c.kind = Command::Kind::Inspect;
      c.regions = t.regions;
      c.deadlines = t.deadlines;
      break;
    case TaskKind::Safety:
      c.kind = Command::Kind::Safety;
      c.worker = t.worker;
      c.geometry = t.geometry;
      c.slot = t.slot;
      c.team_size = t.team_size;
      c.duration = t.duration;
      break;
    case TaskKind::Idle:
      c.kind = Command::Kind::Idle;
      c.duration = t.duration;
      break;
    case TaskKind::Recharge:
      c.kind = Command::Kind::Recharge;
      c.station = t.station;
      c.target = t.start;
      break;
    case TaskKind::Land: c.kind = Command::Kind::Land; break;
  }
  return c;
}

std::vector<Command> TaskManager::dispatch_fronts(Decision& d) {
  std::vector<Command> out;
  for (auto& [id, q] : plan_.assignment) {
    auto& v = vehicles_[id];
    if (q.empty() || v.grounded || v.dispatched == q.front().id) continue;
    v.dispatched = q.front().id;
    out.push_back(command_for(id, q.front()));
    d.notes.push_back("dispatch task " + std::to_string(q.front().id) + " to uav" + std::to_string(id));
  }
  return out;
}

void TaskManager::update_margins() {
  plan_.margins.clear();
  for (const auto& [id, v] : vehicles_) {
    if (v.grounded || !v.have_telemetry) continue;
    plan_.margins[id] = v.endurance - (1.0 + alloc_.reserve_fraction) * remaining_work(id);
  }
}

bool TaskManager::mission_complete() const {
  if (!failures_.empty() || !plan_.pending.empty() || !orphans_.empty()) return false;
  for (const auto& [id, q] : plan_.assignment) {
    if (!q.empty()) return false;
  }
  return true;
}

TickResult TaskManager::tick(double time) {
  TickResult out;
  Decision& d = out.decision;
  d.time = time;

  // Monitoring: progress, completions and endurance from the latest telemetry.
  for (auto& [id, v] : vehicles_) {
    if (!v.have_telemetry) continue;
    const auto& tel = v.last;
    const double energy = tel.state.battery_energy;
    if (v.prev_time >= 0.0 && tel.time > v.prev_time) {
      v.rate = std::max(v.nominal_rate, (v.prev_energy - energy) / (tel.time - v.prev_time));
    }
    if (v.prev_time < 0.0 || tel.time > v.prev_time) {
      v.prev_energy = energy;
      v.prev_time = tel.time;
    }
    v.endurance = estimate_endurance(tel.state, v.rate);
    d.endurance[id] = v.endurance;

    auto qit = plan_.assignment.find(id);
    if (qit == plan_.assignment.end() || qit->second.empty()) continue;
    auto& front = qit->second.front();
    if (tel.task_id != front.id || v.dispatched != front.id) continue;
    if (front.kind == TaskKind::Inspect && !tel.completed_regions.empty()) {
      std::vector<std::string> left;
      for (const auto& r : front.regions) {
        if (std::find(tel.completed_regions.begin(), tel.completed_regions.end(), r) == tel.completed_regions.end()) {
          left.push_back(r);
        }
      }
      if (left.size() != front.regions.size()) {
        front.regions = left;
        front.deadlines.clear();
        refresh_inspect(front);
      }
    }
    if (tel.task_done || (front.kind == TaskKind::Inspect && front.regions.empty())) {
      d.notes.push_back("task " + std::to_string(front.id) + " complete on uav" + std::to_string(id));
      qit->second.pop_front();
      v.dispatched = -1;
      if (qit->second.empty()) plan_.assignment.erase(qit);
    }
  }
  update_margins();

  // Emergency.
  for (auto& [id, v] : vehicles_) {
    if (v.grounded || !v.have_telemetry) continue;
    const auto status = v.last.state.status;
    if (status == world::UavStatus::Landed) continue;
    if (status != world::UavStatus::Failed && v.endurance >= critical_) continue;
    v.grounded = true;
    Command c;
    c.kind = Command::Kind::Land;
    c.uav = id;
    out.commands.push_back(c);
    d.notes.push_back(status == world::UavStatus::Failed
                          ? "uav" + std::to_string(id) + " failed"
                          : "uav" + std::to_string(id) + " endurance " + std::to_string(v.endurance) + " s below critical");
    auto qit = plan_.assignment.find(id);
    if (qit != plan_.assignment.end()) {
      for (auto& t : qit->second) {
        if (t.kind == TaskKind::Inspect && t.regions.empty()) continue;
        orphans_.push_back(std::move(t));
      }
      plan_.assignment.erase(qit);
    }
  }
  if (!out.commands.empty()) {
    d.branch = "emergency";
  } else {
    std::set<int> short_of_energy;
    for (const auto& [id, m] : plan_.margins) {
      if (m < 0.0 && plan_.assignment.count(id)) short_of_energy.insert(id);
    }
    if (!orphans_.empty() || !short_of_energy.empty()) {
      d.branch = "feasibility";
      std::vector<Task> pool = std::move(orphans_);
      orphans_.clear();
      for (int id : short_of_energy) {
        for (auto& t : plan_.assignment[id]) pool.push_back(std::move(t));
        plan_.assignment.erase(id);
        vehicles_[id].dispatched = -1;
        d.notes.push_back("uav" + std::to_string(id) + " margin " + std::to_string(plan_.margins[id]) + " s, work released");
      }
      for (const auto& t : pool) d.notes.push_back("reassign task " + std::to_string(t.id));
      auto rest = assign(std::move(pool), short_of_energy, d);
      for (auto& t : rest) plan_.pending.push_back(std::move(t));
      // Vehicles that gave up their work head for the nearest station, or land when there is none.
      for (int id : short_of_energy) {
        const auto& v = vehicles_[id];
        int best = -1;
        double best_t = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < scenario_.stations.size(); ++s) {
          const double tt = travel_time(v.last.state.position, scenario_.stations[s], alloc_.v_max, alloc_.a_max);
          if (tt < best_t) {
            best_t = tt;
            best = static_cast<int>(s);
          }
        }
        if (best >= 0 && v.endurance >= (1.0 + alloc_.reserve_fraction) * best_t) {
          world::MissionTask m;
          m.kind = TaskKind::Recharge;
          m.station = best;
          Task t = make_task(m, 0);
          plan_.assignment[id].push_back(t);
        } else {
          vehicles_[id].grounded = true;
          Command c;
          c.kind = Command::Kind::Land;
          c.uav = id;
          out.commands.push_back(c);
        }
      }
      auto sent = dispatch_fronts(d);
      out.commands.insert(out.commands.end(), sent.begin(), sent.end());
    } else {
      auto sent = dispatch_fronts(d);
      bool allocated = false;
      if (!plan_.pending.empty()) {
        const std::size_t before = plan_.pending.size();
        plan_.pending = assign(std::move(plan_.pending), {}, d);
        auto more = dispatch_fronts(d);
        sent.insert(sent.end(), more.begin(), more.end());
        if (plan_.pending.size() != before) {
          allocated = true;
          plan_.created = time;
        }
      }
      if (!sent.empty() || allocated) {
        d.branch = "dispatch";
        out.commands = std::move(sent);
      } else if (!operator_queue_.empty()) {
        d.branch = "operator";
        while (!operator_queue_.empty()) {
          const auto oc = operator_queue_.front();
          operator_queue_.pop_front();
          using K = world::OperatorCommand::Kind;
          switch (oc.kind) {
            case K::SetFormation: {
              for (auto& [id, q] : plan_.assignment) {
                for (auto& t : q) {
                  if (t.kind != TaskKind::Safety) continue;
                  if (oc.distance) t.geometry.distance = *oc.distance;
                  if (oc.azimuth_center) t.geometry.azimuth_center = *oc.azimuth_center;
                  if (oc.elevation) t.geometry.elevation = *oc.elevation;
                  if (oc.inter_uav_angle) t.geometry.inter_uav_angle = *oc.inter_uav_angle;
                }
                if (!q.empty() && q.front().kind == TaskKind::Safety && vehicles_[id].dispatched == q.front().id) {
                  Command c = command_for(id, q.front());
                  c.kind = Command::Kind::SetFormation;
                  out.commands.push_back(c);
                }
              }
              d.notes.push_back("formation updated");
              break;
            }
            case K::AssignInspection: {
              world::MissionTask m;
              m.kind = TaskKind::Inspect;
              m.regions = oc.regions;
              m.deadlines = oc.deadlines;
              Task t = make_task(m, 0);
              const auto v = vehicles_.find(oc.uav);
              if (v != vehicles_.end() && !v->second.grounded &&
                  v->second.capabilities.count(world::kInspectionCamera)) {
                d.notes.push_back("operator task " + std::to_string(t.id) + " -> uav" + std::to_string(oc.uav));
                plan_.assignment[oc.uav].push_back(std::move(t));
              } else {
                d.notes.push_back("operator task " + std::to_string(t.id) + " pending");
                plan_.pending.push_back(std::move(t));
              }
              break;
            }
            case K::InjectFailure: {
              Command c;
              c.kind = Command::Kind::Fail;
              c.uav = oc.uav;
              out.commands.push_back(c);
              d.notes.push_back("operator failure injection on uav" + std::to_string(oc.uav));
              break;
            }
            case K::Pause:
            case K::Resume:
            case K::SetSpeed: d.notes.push_back("pacing command " + world::to_string(oc.kind)); break;
          }
        }
      } else {
        d.branch = "none";
      }
    }
  }

  update_margins();
  for (const auto& [id, q] : plan_.assignment) {
    auto& ids = d.assignments[id];
    for (const auto& t : q) ids.push_back(t.id);
  }
  d.margins = plan_.margins;
  for (const auto& t : plan_.pending) d.pending.push_back(t.id);
  d.commands = out.commands;
  return out;
}

}  // namespace towerfleet::tasks
