#include "towerfleet/sim/mission_log.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace towerfleet::sim {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_lines(const fs::path& path, const std::vector<nlohmann::json>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& j : lines) out << j.dump() << '\n';
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<nlohmann::json> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace

void MissionLog::write(const fs::path& dir) const {
  fs::create_directories(dir);
  write_text(dir / "telemetry.csv", telemetry_csv);
  write_lines(dir / "commands.jsonl", commands);
  write_lines(dir / "decisions.jsonl", decisions);
  write_lines(dir / "events.jsonl", events);
  write_lines(dir / "snapshots.jsonl", snapshots);
  write_text(dir / "bus_stats.json", bus_stats.dump(2) + "\n");
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
}

void to_json(nlohmann::json& j, const Outcome& o) {
  j = nlohmann::json{{"code", o.code}, {"reason", o.reason}, {"detail", o.detail}};
}

Outcome assess(const MissionLog& log) {
  const auto& m = log.metrics;
  const auto& failures = m.value("planner_failures", nlohmann::json::array());
  if (!failures.empty()) {
    const std::string first = failures.front().get<std::string>();
    const std::string prefix = "planner-failure: ";
    return {1, "planner-failure", first.rfind(prefix, 0) == 0 ? first.substr(prefix.size()) : first};
  }
  const auto violations = m.value("safety_violations", std::int64_t{0});
  if (violations > 0) {
    return {1, "safety-violation",
            std::to_string(m.value("separation_violations", 0)) + " separation and " +
                std::to_string(m.value("clearance_violations", 0)) + " clearance steps"};
  }
  if (!m.value("mission_complete", false)) return {1, "mission-incomplete", ""};
  return {0, "ok", ""};
}

MissionLog read_mission_log(const fs::path& dir) {
  MissionLog log;
  log.telemetry_csv = read_text(dir / "telemetry.csv");
  log.commands = read_lines(dir / "commands.jsonl");
  log.decisions = read_lines(dir / "decisions.jsonl");
  log.events = read_lines(dir / "events.jsonl");
  log.snapshots = read_lines(dir / "snapshots.jsonl");
  log.bus_stats = nlohmann::json::parse(read_text(dir / "bus_stats.json"));
  log.metrics = nlohmann::json::parse(read_text(dir / "metrics.json"));
  return log;
}

}  // namespace towerfleet::sim
