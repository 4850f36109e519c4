#include "towerfleet/gateway/protocol.hpp"

#include <algorithm>

#include "towerfleet/world/scenario_io.hpp"

namespace towerfleet::gateway {

using nlohmann::json;

json scenario_message(std::uint64_t seq, const world::Scenario& scenario) {
  return json{{"type", "scenario"}, {"seq", seq}, {"data", world::scenario_to_json(scenario)}};
}

json snapshot_message(std::uint64_t seq, const json& snapshot) {
  return json{{"type", "snapshot"}, {"seq", seq}, {"data", snapshot}};
}

json ack_message(std::uint64_t seq, std::int64_t ref, bool accepted, const std::string& reason) {
  return json{{"type", "ack"}, {"seq", seq}, {"ref", ref}, {"status", accepted ? "accepted" : "rejected"},
              {"reason", reason}};
}

std::variant<ClientCommand, Rejection> parse_client(const std::string& text, const world::Scenario& scenario) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    return Rejection{-1, std::string("schema violation: ") + e.what()};
  }
  if (!j.is_object()) return Rejection{-1, "schema violation: message must be an object"};
  std::int64_t ref = -1;
  auto seq = j.find("seq");
  if (seq == j.end() || !seq->is_number_integer()) return Rejection{-1, "schema violation: missing integer 'seq'"};
  ref = seq->get<std::int64_t>();
  auto type = j.find("type");
  if (type == j.end() || *type != "command") return Rejection{ref, "schema violation: 'type' must be \"command\""};
  auto body = j.find("command");
  if (body == j.end()) return Rejection{ref, "schema violation: missing 'command'"};
  ClientCommand out{ref, {}};
  try {
    out.command = world::operator_command_from_json(*body);
  } catch (const std::exception& e) {
    return Rejection{ref, std::string("schema violation: ") + e.what()};
  }
  const auto& c = out.command;
  using K = world::OperatorCommand::Kind;
  if ((c.kind == K::InjectFailure || (c.kind == K::AssignInspection && c.uav >= 0)) && !scenario.find_uav(c.uav)) {
    return Rejection{ref, "invalid: unknown uav " + std::to_string(c.uav)};
  }
  for (const auto& r : c.regions) {
    if (!scenario.find_region(r)) return Rejection{ref, "invalid: unknown region '" + r + "'"};
  }
  if (c.kind == K::SetSpeed && !(c.speed > 0.0)) return Rejection{ref, "invalid: speed must be positive"};
  return out;
}

}  // namespace towerfleet::gateway
