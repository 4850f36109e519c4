#include "towerfleet/sim/bus.hpp"

namespace towerfleet::sim {

namespace {

constexpr double kTimeTolerance = 1e-9;

}  // namespace

void to_json(nlohmann::json& j, const TopicStats& s) {
  j = nlohmann::json{{"published", s.published}, {"rate_violations", s.rate_violations}, {"dropped", s.dropped},
                     {"delivered", s.delivered}, {"early", s.early},                     {"reordered", s.reordered}};
}

Bus::Bus(const std::map<std::string, world::TopicConfig>& topics, std::uint64_t seed) {
  for (const auto& [name, cfg] : topics) {
    if (!(cfg.rate > 0.0)) throw ConfigurationError("topic '" + name + "': rate must be positive");
    if (!(cfg.latency >= 0.0)) throw ConfigurationError("topic '" + name + "': latency must be non-negative");
    if (!(cfg.drop_probability >= 0.0 && cfg.drop_probability <= 1.0)) {
      throw ConfigurationError("topic '" + name + "': drop probability outside [0, 1]");
    }
    topics_.emplace(name, Topic{cfg, Rng(seed, stream::kBus + cfg.stream), {}, 0, {}});
    stats_[name];
  }
}

Bus::Topic& Bus::topic(const std::string& name) {
  auto it = topics_.find(name);
  if (it == topics_.end()) throw ConfigurationError("unknown bus topic '" + name + "'");
  return it->second;
}

int Bus::subscribe(const std::string& name) {
  topic(name).subscribers.push_back(static_cast<int>(subscribers_.size()));
  subscribers_.push_back(Subscriber{name, {}, 0, false});
  return static_cast<int>(subscribers_.size()) - 1;
}

bool Bus::publish(const std::string& name, int key, Payload payload, double time) {
  Topic& t = topic(name);
  TopicStats& st = stats_[name];
  ++st.published;
  auto last = t.last_accept.find(key);
  if (last != t.last_accept.end() && time - last->second < 1.0 / t.config.rate - kTimeTolerance) {
    ++st.rate_violations;
    return false;
  }
  t.last_accept[key] = time;
  const std::uint64_t seq = t.next_seq++;
  // Always draw so the stream position depends only on the accepted-message count.
  const double u = t.rng.uniform();
  if (u < t.config.drop_probability) {
    ++st.dropped;
    return false;
  }
  ++st.delivered;
  Envelope e{name, key, seq, time, time + t.config.latency, std::move(payload)};
  for (int s : t.subscribers) subscribers_[s].queue.push_back(e);
  return true;
}

std::vector<Envelope> Bus::poll(int subscriber, double time) {
  Subscriber& s = subscribers_.at(subscriber);
  TopicStats& st = stats_[s.topic];
  const double latency = topic(s.topic).config.latency;
  std::vector<Envelope> out;
  while (!s.queue.empty() && s.queue.front().deliver_time <= time + kTimeTolerance) {
    Envelope e = std::move(s.queue.front());
    s.queue.pop_front();
    if (time < e.publish_time + latency - kTimeTolerance) ++st.early;
    if (s.any && e.seq <= s.last_seq) ++st.reordered;
    s.last_seq = e.seq;
    s.any = true;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace towerfleet::sim
