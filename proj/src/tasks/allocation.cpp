#include "towerfleet/tasks/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace towerfleet::tasks {

namespace {

constexpr std::size_t kExhaustiveLimit = 6;
constexpr double kTieTolerance = 1e-9;

struct Search {
  const std::vector<std::vector<double>>& cost;  // [task][candidate], +inf when infeasible
  std::vector<int> current, best;
  std::vector<bool> used;
  int best_count = -1;
  double best_total = std::numeric_limits<double>::infinity();

  void run(std::size_t t, int count, double total) {
    if (t == cost.size()) {
      if (count > best_count || (count == best_count && total < best_total - kTieTolerance)) {
        best_count = count;
        best_total = total;
        best = current;
      }
      return;
    }
    // Even assigning every remaining task cannot beat the incumbent count.
    if (count + static_cast<int>(cost.size() - t) < best_count) return;
    for (std::size_t c = 0; c < used.size(); ++c) {
      if (used[c] || !std::isfinite(cost[t][c])) continue;
      used[c] = true;
      current[t] = static_cast<int>(c);
      run(t + 1, count + 1, total + cost[t][c]);
      used[c] = false;
    }
    current[t] = -1;
    run(t + 1, count, total);
  }
};

}  // namespace

double estimate_endurance(const world::UavState& state, double discharge_rate) {
  if (!(discharge_rate > 0.0)) throw std::invalid_argument("discharge rate must be positive");
  return std::max(0.0, state.battery_energy) / discharge_rate;
}

double travel_time(const world::Vec3& from, const world::Vec3& to, double v_max, double a_max) {
  const double d = world::norm(to - from);
  if (d <= 0.0) return 0.0;
  if (d <= v_max * v_max / a_max) return 2.0 * std::sqrt(d / a_max);
  return d / v_max + v_max / a_max;
}

double travel_to(const Candidate& c, const Task& t, const AllocationParams& p) {
  return t.located ? travel_time(c.position, t.start, p.v_max, p.a_max) : 0.0;
}

bool feasible(const Candidate& c, const Task& t, const AllocationParams& p) {
  if (!std::includes(c.capabilities.begin(), c.capabilities.end(), t.capabilities.begin(), t.capabilities.end())) {
    return false;
  }
  return c.endurance >= (1.0 + p.reserve_fraction) * (c.committed + travel_to(c, t, p) + t.duration);
}

Allocation allocate(const std::vector<Task>& tasks, const std::vector<Candidate>& candidates,
                    const AllocationParams& params) {
  if (candidates.empty()) throw NoActiveVehicleError("no active vehicle to allocate to");
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return candidates[a].id < candidates[b].id; });

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cost(tasks.size(), std::vector<double>(order.size(), inf));
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t c = 0; c < order.size(); ++c) {
      const auto& cand = candidates[order[c]];
      if (feasible(cand, tasks[t], params)) cost[t][c] = travel_to(cand, tasks[t], params);
    }
  }

  Allocation out;
  out.assignee.assign(tasks.size(), -1);
  std::vector<int> pick(tasks.size(), -1);
  if (tasks.size() <= kExhaustiveLimit && order.size() <= kExhaustiveLimit) {
    Search s{cost, std::vector<int>(tasks.size(), -1), {}, std::vector<bool>(order.size(), false)};
    s.run(0, 0, 0.0);
    pick = s.best;
  } else {
    std::vector<bool> task_done(tasks.size(), false), used(order.size(), false);
    while (true) {
      double best = inf;
      std::size_t bt = 0, bc = 0;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (task_done[t]) continue;
        for (std::size_t c = 0; c < order.size(); ++c) {
          if (!used[c] && cost[t][c] < best) {
            best = cost[t][c];
            bt = t;
            bc = c;
          }
        }
      }
      if (!std::isfinite(best)) break;
      task_done[bt] = true;
      used[bc] = true;
      pick[bt] = static_cast<int>(bc);
    }
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (pick[t] < 0) continue;
    out.assignee[t] = candidates[order[pick[t]]].id;
    out.total_travel += cost[t][pick[t]];
    ++out.assigned;
  }
  return out;
}

}  // namespace towerfleet::tasks
