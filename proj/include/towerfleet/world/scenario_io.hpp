#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "towerfleet/world/scenario.hpp"

namespace towerfleet::world {

/// Malformed JSON or a field of the wrong type. `line`/`column` are 1-based, 0 when unknown.
class ScenarioParseError : public std::runtime_error {
 public:
  ScenarioParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed document whose content breaks scenario invariants.
class ScenarioValidationError : public std::runtime_error {
 public:
  explicit ScenarioValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

void to_json(nlohmann::json& j, const Vec3& v);
void from_json(const nlohmann::json& j, Vec3& v);
void to_json(nlohmann::json& j, const FormationGeometry& g);
void from_json(const nlohmann::json& j, FormationGeometry& g);
void to_json(nlohmann::json& j, const OperatorCommand& c);
/// Strict: unknown command types and ill-typed fields throw std::invalid_argument.
OperatorCommand operator_command_from_json(const nlohmann::json& j);

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

/// Parses without validating.
Scenario parse_scenario(const std::string& text);
/// Reads, parses, and validates; throws ScenarioParseError or ScenarioValidationError.
Scenario load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& s);

}  // namespace towerfleet::world
