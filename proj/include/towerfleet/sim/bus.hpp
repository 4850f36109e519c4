#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "towerfleet/sim/rng.hpp"
#include "towerfleet/tasks/task_manager.hpp"
#include "towerfleet/world/settings.hpp"

namespace towerfleet::sim {

/// Predicted positions of one vehicle, samples t0 + k dt.
struct PredictionMsg {
  int uav = 0;
  double t0 = 0.0;
  double dt = 0.1;
  std::vector<world::Vec3> positions;

  bool operator==(const PredictionMsg&) const = default;
};

/// Noisy position fix of a worker.
struct WorkerMsg {
  std::string id;
  double time = 0.0;
  world::Vec3 position;

  bool operator==(const WorkerMsg&) const = default;
};

using Payload = std::variant<tasks::UavTelemetry, std::vector<tasks::Command>, PredictionMsg, WorkerMsg>;

struct Envelope {
  std::string topic;
  int key = 0;               // rate-limiting key, usually the vehicle id
  std::uint64_t seq = 0;     // per topic, over accepted publishes
  double publish_time = 0.0;
  double deliver_time = 0.0;
  Payload payload;
};

struct TopicStats {
  std::uint64_t published = 0;
  std::uint64_t rate_violations = 0;  // rejected for exceeding the topic rate
  std::uint64_t dropped = 0;          // lost to the drop draw
  std::uint64_t delivered = 0;        // to at least the queue, counted once per message
  std::uint64_t early = 0;            // delivered before publish + latency; must stay 0
  std::uint64_t reordered = 0;        // delivered out of publish order; must stay 0

  bool operator==(const TopicStats&) const = default;
};

void to_json(nlohmann::json& j, const TopicStats& s);

class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief Rate/latency/drop transport between simulated components.
 *
 * Publishes faster than the topic rate (per key) are rejected and counted. Accepted messages
 * survive a Bernoulli drop draw from the topic's own stream and are delivered to every subscriber
 * exactly at publish + latency, in publish order.
 */
class Bus {
 public:
  Bus(const std::map<std::string, world::TopicConfig>& topics, std::uint64_t seed);

  /// Returns a subscriber handle for `topic`.
  int subscribe(const std::string& topic);

  /// Returns false when the message was rejected by the rate limit or dropped.
  bool publish(const std::string& topic, int key, Payload payload, double time);

  /// Messages due at or before `time`, oldest first.
  std::vector<Envelope> poll(int subscriber, double time);

  const std::map<std::string, TopicStats>& stats() const { return stats_; }

 private:
  struct Topic {
    world::TopicConfig config;
    Rng rng;
    std::map<int, double> last_accept;
    std::uint64_t next_seq = 0;
    std::vector<int> subscribers;
  };
  struct Subscriber {
    std::string topic;
    std::deque<Envelope> queue;
    std::uint64_t last_seq = 0;
    bool any = false;
  };

  Topic& topic(const std::string& name);

  std::map<std::string, Topic> topics_;
  std::vector<Subscriber> subscribers_;
  std::map<std::string, TopicStats> stats_;
};

}  // namespace towerfleet::sim
