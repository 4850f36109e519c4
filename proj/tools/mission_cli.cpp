// towerfleet: scenario runner and operator gateway.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "towerfleet/gateway/runner.hpp"
#include "towerfleet/sim/engine.hpp"
#include "towerfleet/world/scenario_io.hpp"

namespace {

int report(const towerfleet::sim::Outcome& o) {
  std::cout << nlohmann::json(o).dump() << std::endl;
  return o.code;
}

}  // namespace

int main(int argc, char** argv) {
  namespace sim = towerfleet::sim;
  CLI::App app{"Multi-UAV power-tower mission simulator"};
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  double duration = 300.0;
  std::optional<int> serve_port;
  double speed = 1.0;
  std::string out = "mission_log";
  bool verbose = false;
  app.add_option("--scenario", scenario_path, "scenario JSON file")->required();
  app.add_option("--seed", seed, "RNG seed (default: the scenario's)");
  app.add_option("--duration", duration, "simulated seconds")->check(CLI::PositiveNumber);
  app.add_option("--serve", serve_port, "serve the operator gateway on this port")
      ->expected(0, 1)
      ->default_str("8765")
      ->check(CLI::Range(1, 65535));
  app.add_option("--speed", speed, "wall-clock pacing multiplier in serve mode")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "MissionLog output directory");
  app.add_flag("--verbose", verbose, "print progress to stderr");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  // `--serve` without a value.
  if (!serve_port && app.count("--serve") > 0) serve_port = 8765;

  towerfleet::world::Scenario scenario;
  try {
    scenario = towerfleet::world::load_scenario(scenario_path);
  } catch (const towerfleet::world::ScenarioParseError& e) {
    return report({2, "configuration-error",
                   scenario_path + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.what()});
  } catch (const towerfleet::world::ScenarioValidationError& e) {
    std::string detail;
    for (const auto& v : e.violations()) {
      detail += (detail.empty() ? "" : "; ") + v.field + ": " + v.rule + (v.context.empty() ? "" : " (" + v.context + ")");
    }
    return report({2, "configuration-error", detail});
  } catch (const std::exception& e) {
    return report({2, "configuration-error", e.what()});
  }

  try {
    const std::uint64_t s = seed.value_or(scenario.seed);
    sim::MissionLog log;
    if (serve_port) {
      towerfleet::gateway::RunnerConfig cfg;
      cfg.port = static_cast<unsigned short>(*serve_port);
      cfg.speed = speed;
      cfg.duration = duration;
      cfg.verbose = verbose;
      auto served = towerfleet::gateway::serve(scenario, s, cfg);
      log = std::move(served.log);
      std::filesystem::create_directories(out);
      std::ofstream(std::filesystem::path(out) / "gateway_stats.json") << nlohmann::json(served.stats).dump(2) << "\n";
    } else {
      sim::Engine engine(scenario, s);
      const auto total = static_cast<std::int64_t>(std::llround(duration / engine.clock().dt));
      while (engine.step_index() < total) {
        engine.step();
        if (verbose && engine.step_index() % 1000 == 0) std::fprintf(stderr, "t = %.1f s\n", engine.time());
      }
      log = engine.log();
    }
    log.write(out);
    return report(sim::assess(log));
  } catch (const towerfleet::gateway::PortError& e) {
    return report({2, "configuration-error", e.what()});
  } catch (const sim::ConfigurationError& e) {
    return report({2, "configuration-error", e.what()});
  } catch (const std::exception& e) {
    return report({1, "runtime-error", e.what()});
  }
}
