#pragma once

#include <functional>

#include "towerfleet/gateway/gateway.hpp"
#include "towerfleet/sim/engine.hpp"

namespace towerfleet::gateway {

struct RunnerConfig {
  unsigned short port = 8765;
  double speed = 1.0;        // simulated seconds per wall-clock second
  double duration = 300.0;   // simulated seconds
  bool verbose = false;
};

struct ServeResult {
  sim::MissionLog log;
  GatewayStats stats;
};

/**
 * @brief Paces an engine against the wall clock while a Server streams it.
 *
 * Before every step the accepted operator commands are submitted to the engine, so a command
 * that arrives before step n is logged and handled exactly like a scenario event at n dt.
 * Pause, resume and speed commands also change the pacing here.
 */
class Runner {
 public:
  Runner(sim::Engine& engine, Server& server, double speed);

  /// One pacing iteration: apply commands, then step unless paused. Returns false once `total_steps` ran.
  bool tick(std::int64_t total_steps);
  bool paused() const { return paused_; }
  double speed() const { return speed_; }

 private:
  void rebase();

  sim::Engine& engine_;
  Server& server_;
  double speed_;
  bool paused_ = false;
  std::size_t published_ = 0;
  std::chrono::steady_clock::time_point wall_origin_;
  double sim_origin_ = 0.0;
};

/// Runs `scenario` paced for `config.duration` simulated seconds with a gateway on `config.port`.
ServeResult serve(const world::Scenario& scenario, std::uint64_t seed, const RunnerConfig& config);

}  // namespace towerfleet::gateway
