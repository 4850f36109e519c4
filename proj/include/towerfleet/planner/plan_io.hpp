#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "towerfleet/planner/inspection.hpp"

namespace towerfleet::planner {

/// One row per sample: t,px,py,pz,vx,vy,vz,ax,ay,az,psi
std::string trajectory_csv(const Trajectory& tr, double ts);

nlohmann::json plan_diagnostics_json(const PlanResult& plan);

/// Writes plan_uav<id>.csv for every vehicle and plan.json into `dir`.
void write_plan(const PlanResult& plan, const std::filesystem::path& dir);

}  // namespace towerfleet::planner
