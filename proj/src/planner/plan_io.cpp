#include "towerfleet/planner/plan_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace towerfleet::planner {

std::string trajectory_csv(const Trajectory& tr, double ts) {
  std::string out = "t,px,py,pz,vx,vy,vz,ax,ay,az,psi\n";
  char line[512];
  for (std::size_t k = 0; k < tr.p.size(); ++k) {
    const auto& p = tr.p[k];
    const auto& v = tr.v[k];
    const auto& a = tr.a[k];
    const double psi = k < tr.psi.size() ? tr.psi[k] : 0.0;
    std::snprintf(line, sizeof line, "%.3f,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  k * ts, p.x, p.y, p.z, v.x, v.y, v.z, a.x, a.y, a.z, psi);
    out += line;
  }
  return out;
}

nlohmann::json plan_diagnostics_json(const PlanResult& plan) {
  nlohmann::json uavs = nlohmann::json::array();
  for (const auto& t : plan.trajectories) uavs.push_back(t.uav_id);
  return {{"ts", plan.ts},
          {"uavs", uavs},
          {"samples", plan.trajectories.empty() ? 0 : plan.trajectories.front().p.size()},
          {"robustness", plan.robustness},
          {"success", plan.success},
          {"most_violated", plan.most_violated},
          {"most_violated_robustness", plan.most_violated_robustness},
          {"iterations", plan.diagnostics.iterations},
          {"restarts", plan.diagnostics.restarts},
          {"best_restart", plan.diagnostics.best_restart},
          {"smooth_objective", plan.diagnostics.smooth_objective},
          {"final_kappa", plan.diagnostics.final_kappa}};
}

void write_plan(const PlanResult& plan, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : plan.trajectories) {
    std::ofstream out(dir / ("plan_uav" + std::to_string(t.uav_id) + ".csv"));
    if (!out) throw std::runtime_error("cannot write plan into " + dir.string());
    out << trajectory_csv(t, plan.ts);
  }
  std::ofstream out(dir / "plan.json");
  out << plan_diagnostics_json(plan).dump(2) << "\n";
}

}  // namespace towerfleet::planner
