#include "towerfleet/gateway/runner.hpp"

#include <chrono>
#include <cstdio>
#include <thread>

namespace towerfleet::gateway {

namespace {

constexpr auto kPausePoll = std::chrono::milliseconds(20);

}  // namespace

Runner::Runner(sim::Engine& engine, Server& server, double speed) : engine_(engine), server_(server), speed_(speed) {
  rebase();
}

void Runner::rebase() {
  wall_origin_ = std::chrono::steady_clock::now();
  sim_origin_ = engine_.time();
}

bool Runner::tick(std::int64_t total_steps) {
  if (engine_.step_index() >= total_steps) return false;
  using K = world::OperatorCommand::Kind;
  for (const auto& c : server_.take_commands()) {
    engine_.submit(c.command);
    if (c.command.kind == K::Pause) paused_ = true;
    if (c.command.kind == K::Resume && paused_) {
      paused_ = false;
      rebase();
    }
    if (c.command.kind == K::SetSpeed) {
      speed_ = c.command.speed;
      rebase();
    }
  }
  if (paused_) {
    std::this_thread::sleep_for(kPausePoll);
    return true;
  }
  const auto due = wall_origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>((engine_.time() - sim_origin_) / speed_));
  std::this_thread::sleep_until(due);
  engine_.step();
  while (published_ < engine_.snapshot_count()) server_.publish(engine_.snapshot_at(published_++));
  return engine_.step_index() < total_steps;
}

ServeResult serve(const world::Scenario& scenario, std::uint64_t seed, const RunnerConfig& config) {
  sim::Engine engine(scenario, seed);
  Server server(scenario, config.port);
  if (config.verbose) std::fprintf(stderr, "gateway listening on port %u\n", static_cast<unsigned>(server.port()));
  Runner runner(engine, server, config.speed);
  const auto total = static_cast<std::int64_t>(std::llround(config.duration / engine.clock().dt));
  while (runner.tick(total)) {
    if (config.verbose && engine.step_index() % 1000 == 0) std::fprintf(stderr, "t = %.1f s\n", engine.time());
  }
  return ServeResult{engine.log(), server.stats()};
}

}  // namespace towerfleet::gateway
