#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "towerfleet/gateway/protocol.hpp"

namespace towerfleet::gateway {

class PortError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GatewayStats {
  std::uint64_t snapshots_published = 0;  // handed to the gateway by the stepping loop
  std::uint64_t snapshots_dropped = 0;    // oldest dropped from the full outbound queue
  std::uint64_t client_drops = 0;         // skipped for a client whose send queue was full
  std::uint64_t commands_accepted = 0;
  std::uint64_t commands_rejected = 0;
  std::uint64_t connections = 0;
};

void to_json(nlohmann::json& j, const GatewayStats& s);

/**
 * @brief WebSocket endpoint for operator consoles.
 *
 * All socket work runs on one internal I/O thread. The stepping loop talks to it only through
 * publish() and take_commands(), both backed by bounded queues, so it never waits on a client.
 * Commands are checked and acknowledged on arrival; accepted ones wait in the inbound queue.
 */
class Server {
 public:
  /// Port 0 binds an ephemeral port. Throws PortError when the port cannot be bound.
  Server(const world::Scenario& scenario, unsigned short port, std::size_t snapshot_capacity = 16,
         std::size_t command_capacity = 256);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  void publish(nlohmann::json snapshot);
  std::vector<ClientCommand> take_commands();
  GatewayStats stats() const;
  std::size_t clients() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace towerfleet::gateway
