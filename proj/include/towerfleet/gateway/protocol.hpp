#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "towerfleet/world/scenario.hpp"

namespace towerfleet::gateway {

// Wire format: one JSON object per WebSocket text frame, each with "type" and "seq".
// Server seq counts every message sent on a connection, starting at 1.
//
//   server -> client
//     {"type": "scenario", "seq": n, "data": <scenario document>}          first message
//     {"type": "snapshot", "seq": n, "data": <engine snapshot>}            every snapshot period
//     {"type": "ack", "seq": n, "ref": <client seq>, "status": "accepted" | "rejected", "reason": "..."}
//   client -> server
//     {"type": "command", "seq": k, "command": {"type": "set_formation", "distance": 8, ...}}

nlohmann::json scenario_message(std::uint64_t seq, const world::Scenario& scenario);
nlohmann::json snapshot_message(std::uint64_t seq, const nlohmann::json& snapshot);
nlohmann::json ack_message(std::uint64_t seq, std::int64_t ref, bool accepted, const std::string& reason);

struct ClientCommand {
  std::int64_t seq = 0;
  world::OperatorCommand command;
};

struct Rejection {
  std::int64_t ref = -1;  // client seq when it could be read
  std::string reason;     // "schema violation: ..." or "invalid: ..."
};

/**
 * @brief Parses and checks one client frame.
 *
 * Malformed JSON or a payload outside the schema gives a schema violation; references to
 * vehicles or regions the scenario does not have give "invalid".
 */
std::variant<ClientCommand, Rejection> parse_client(const std::string& text, const world::Scenario& scenario);

/// Mutex-guarded FIFO that never blocks the producer: a full queue drops its oldest entry.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// Returns true when an old entry was dropped to make room.
  bool push(T value) {
    std::lock_guard lock(mutex_);
    bool dropped = false;
    if (items_.size() >= capacity_) {
      items_.pop_front();
      ++dropped_;
      dropped = true;
    }
    items_.push_back(std::move(value));
    return dropped;
  }

  /// Refuses instead of dropping; for queues whose entries were already acknowledged.
  bool try_push(T value) {
    std::lock_guard lock(mutex_);
    if (items_.size() >= capacity_) return false;
    items_.push_back(std::move(value));
    return true;
  }

  std::vector<T> drain() {
    std::lock_guard lock(mutex_);
    std::vector<T> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
    items_.clear();
    return out;
  }

  std::uint64_t dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::deque<T> items_;
  std::uint64_t dropped_ = 0;
};

}  // namespace towerfleet::gateway
