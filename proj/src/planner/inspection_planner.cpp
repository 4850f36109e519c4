#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "towerfleet/planner/dynamics.hpp"
#include "towerfleet/planner/inspection.hpp"
#include "towerfleet/stl/robustness.hpp"
#include "towerfleet/world/geometry.hpp"

namespace towerfleet::planner {

using world::Vec3;

namespace {

constexpr double kTrackKp = 1.0;
constexpr double kTrackKv = 1.8;
constexpr double kSettle = 1.5;        // s of extra hold at each viewpoint in the initial guess
constexpr double kDetourLift = 1.5;    // m above tower top + margin for over-the-top detours
constexpr double kHeadingSpeed = 0.1;  // m/s below which the velocity azimuth is held

struct RefKnot {
  Vec3 p;
  double t = 0.0;
};

/// Piecewise-linear reference through the viewpoints with holds, timed at the cruise speed.
std::vector<RefKnot> reference_path(const Vec3& start, const std::vector<const world::TargetRegion*>& regions,
                                    const world::Scenario& sc, double cruise) {
  const double margin = sc.settings.planner.obstacle_margin;
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& t : sc.towers) top = std::max(top, t.center.z + t.height + margin + kDetourLift);

  auto clear = [&](const Vec3& a, const Vec3& b) {
    for (int i = 0; i <= 50; ++i) {
      const Vec3 p = a + (i / 50.0) * (b - a);
      if (world::distance_to_obstacles(p, sc.towers, sc.wires) < margin + 0.5) return false;
    }
    return true;
  };

  std::vector<RefKnot> knots{{start, 0.0}};
  auto go = [&](const Vec3& to) {
    const RefKnot& from = knots.back();
    knots.push_back({to, from.t + world::norm(to - from.p) / cruise});
  };
  for (const auto* r : regions) {
    const Vec3 from = knots.back().p;
    const Vec3 to = r->viewpoint;
    if (!clear(from, to) && std::isfinite(top)) {
      go(Vec3{from.x, from.y, std::max(from.z, top)});
      go(Vec3{to.x, to.y, std::max(to.z, top)});
    }
    go(to);
    knots.push_back({to, knots.back().t + r->dwell_time + kSettle});
  }
  return knots;
}

void sample_reference(const std::vector<RefKnot>& knots, double t, Vec3& r, Vec3& rd) {
  if (t >= knots.back().t) {
    r = knots.back().p;
    rd = Vec3{};
    return;
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (t < knots[i].t) {
      const double span = knots[i].t - knots[i - 1].t;
      const double s = span > 0.0 ? (t - knots[i - 1].t) / span : 1.0;
      r = knots[i - 1].p + s * (knots[i].p - knots[i - 1].p);
      rd = span > 0.0 ? (knots[i].p - knots[i - 1].p) / span : Vec3{};
      return;
    }
  }
}

/// Closed-loop tracking of the reference, projected onto the bounds as it goes.
void initial_controls(const std::vector<RefKnot>& knots, const world::UavState& s0, std::size_t slot,
                      std::size_t samples, double ts, double v_max, double a_max, std::vector<double>& a) {
  Vec3 p = s0.position;
  Vec3 v = s0.velocity;
  for (std::size_t k = 0; k + 1 < samples; ++k) {
    Vec3 r, rd;
    sample_reference(knots, k * ts, r, rd);
    const Vec3 cmd = kTrackKp * (r - p) + kTrackKv * (rd - v);
    Vec3 ak;
    for (int j = 0; j < 3; ++j) {
      const double vj = world::axis(v, j);
      const double lo = std::max(-a_max, (-v_max - vj) / ts);
      const double hi = std::min(a_max, (v_max - vj) / ts);
      world::axis(ak, j) = lo <= hi ? std::clamp(world::axis(cmd, j), lo, hi) : (vj > 0.0 ? -a_max : a_max);
    }
    p = p + ts * v + (0.5 * ts * ts) * ak;
    v = v + ts * ak;
    a[(slot * (samples - 1) + k) * 3 + 0] = ak.x;
    a[(slot * (samples - 1) + k) * 3 + 1] = ak.y;
    a[(slot * (samples - 1) + k) * 3 + 2] = ak.z;
  }
}

/// 53-bit uniform in [0, 1) and Box-Muller normals; identical on every platform for a given seed.
struct Noise {
  explicit Noise(std::uint64_t seed) : gen(seed) {}
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  std::mt19937_64 gen;
};

/// Low-frequency perturbation: piecewise constant over blocks of one second.
void perturb(std::vector<double>& a, std::size_t vehicles, std::size_t samples, double ts, double sigma,
             std::uint64_t seed) {
  Noise noise(seed);
  const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / ts)));
  for (std::size_t u = 0; u < vehicles; ++u) {
    for (std::size_t k0 = 0; k0 + 1 < samples; k0 += block) {
      const double d[3] = {sigma * noise.normal(), sigma * noise.normal(), sigma * noise.normal()};
      for (std::size_t k = k0; k < std::min(k0 + block, samples - 1); ++k) {
        for (int j = 0; j < 3; ++j) a[(u * (samples - 1) + k) * 3 + j] += d[j];
      }
    }
  }
}

struct Problem {
  const stl::Formula* formula;
  std::vector<Vec3> p0;
  std::vector<Vec3> v0;
  std::size_t samples;
  double ts;
  double v_max;
  double a_max;

  stl::Trace trace(const std::vector<double>& a) const {
    auto r = rollout(p0, v0, a, samples, ts);
    return stl::Trace(ts, 3 * p0.size(), std::move(r.positions));
  }
};

struct Candidate {
  std::vector<double> a;
  double robustness = -std::numeric_limits<double>::infinity();
  double kappa = 0.0;
  int restart = 0;
};

/// Projected gradient ascent on the smoothed robustness with kappa doubling at each stall.
int ascend(const Problem& pb, std::vector<double> a, double kappa, double kappa_max, int iterations, int restart,
           Candidate& best) {
  auto consider = [&](const std::vector<double>& x, const stl::Trace& tr, double kap) {
    const double rho = stl::robustness(*pb.formula, tr, 0);
    if (rho > best.robustness) best = Candidate{x, rho, kap, restart};
  };

  stl::Trace tr = pb.trace(a);
  consider(a, tr, kappa);
  auto vg = stl::smooth_robustness_gradient(*pb.formula, tr, 0, kappa);
  double f = vg.value;
  std::vector<double> g = control_gradient(vg.gradient, pb.p0.size(), pb.samples, pb.ts);
  double step = 0.5;
  int it = 0;
  while (it < iterations) {
    ++it;
    double gmax = 0.0;
    for (double x : g) gmax = std::max(gmax, std::abs(x));
    bool moved = false;
    double gain = 0.0;
    if (gmax > 0.0) {
      for (int tries = 0; tries < 30 && step > 1e-7; ++tries) {
        std::vector<double> trial(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) trial[i] = a[i] + step * g[i] / gmax;
        project_controls(pb.v0, trial, pb.samples, pb.ts, pb.v_max, pb.a_max);
        stl::Trace ttr = pb.trace(trial);
        const double ft = stl::smooth_robustness(*pb.formula, ttr, 0, kappa);
        if (ft > f) {
          gain = ft - f;
          a = std::move(trial);
          tr = std::move(ttr);
          consider(a, tr, kappa);
          step = std::min(step * 1.5, pb.a_max);
          moved = true;
          break;
        }
        step *= 0.5;
      }
    }
    const bool stalled = !moved || gain < 1e-7 * std::max(1.0, std::abs(f));
    if (stalled) {
      if (kappa >= kappa_max) break;
      kappa = std::min(2.0 * kappa, kappa_max);
      step = 0.5;
    }
    vg = stl::smooth_robustness_gradient(*pb.formula, tr, 0, kappa);
    f = vg.value;
    g = control_gradient(vg.gradient, pb.p0.size(), pb.samples, pb.ts);
  }
  return it;
}

InspectionTask permuted(const InspectionTask& t, const std::vector<std::size_t>& order) {
  InspectionTask out;
  out.horizon = t.horizon;
  out.separation_min = t.separation_min;
  for (std::size_t i : order) {
    out.uav_ids.push_back(t.uav_ids[i]);
    out.region_visits.push_back(t.region_visits[i]);
    out.initial_states.push_back(t.initial_states[i]);
  }
  return out;
}

}  // namespace

PlanResult plan_inspection(const InspectionTask& task_in, const world::Scenario& scenario, double v_max, double a_max,
                           double ts) {
  if (!(v_max > 0.0) || !(a_max > 0.0)) throw std::invalid_argument("v_max and a_max must be positive");
  if (!(ts > 0.0)) throw std::invalid_argument("Ts must be positive");
  InspectionTask task = task_in;
  if (task.initial_states.empty()) {
    for (int id : task.uav_ids) {
      const auto* m = scenario.find_uav(id);
      if (!m) throw InfeasibleTaskError("unknown vehicle " + std::to_string(id));
      task.initial_states.push_back(m->initial);
    }
  }
  if (task.initial_states.size() != task.uav_ids.size()) throw InfeasibleTaskError("one initial state per vehicle");

  // Plan in ascending id order so that the result does not depend on how the task lists vehicles.
  std::vector<std::size_t> order(task.uav_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return task.uav_ids[a] < task.uav_ids[b]; });
  const InspectionTask sorted = permuted(task, order);
  const stl::Formula formula = build_inspection_formula(sorted, scenario, ts);

  const auto& ps = scenario.settings.planner;
  const std::size_t q = sorted.uav_ids.size();
  const std::size_t n = sample_count(sorted.horizon, ts);
  Problem pb{&formula, {}, {}, n, ts, v_max, a_max};
  for (const auto& s : sorted.initial_states) {
    pb.p0.push_back(s.position);
    pb.v0.push_back(s.velocity);
  }

  std::vector<double> guess(q * (n - 1) * 3, 0.0);
  for (std::size_t u = 0; u < q; ++u) {
    std::vector<const world::TargetRegion*> regions;
    for (const auto& v : sorted.region_visits[u]) regions.push_back(scenario.find_region(v.region));
    const auto knots = reference_path(pb.p0[u], regions, scenario, ps.cruise_fraction * v_max);
    initial_controls(knots, sorted.initial_states[u], u, n, ts, v_max, a_max, guess);
  }

  Candidate best;
  PlanDiagnostics diag;
  for (int r = 0; r < ps.restarts; ++r) {
    std::vector<double> a = guess;
    if (r > 0) {
      perturb(a, q, n, ts, 0.3 * a_max, scenario.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(r));
      project_controls(pb.v0, a, n, ts, v_max, a_max);
    }
    const double kappa = std::min(ps.kappa_initial * std::pow(2.0, r), ps.kappa_max);
    diag.iterations += ascend(pb, std::move(a), kappa, ps.kappa_max, ps.iterations, r, best);
    diag.restarts = r + 1;
    if (ps.stop_on_success && best.robustness > 0.0) break;
  }

  const auto roll = rollout(pb.p0, pb.v0, best.a, n, ts);
  PlanResult result;
  result.ts = ts;
  result.trajectories.resize(q);
  for (std::size_t s = 0; s < q; ++s) {
    const std::size_t u = order[s];
    Trajectory& tr = result.trajectories[u];
    tr.uav_id = sorted.uav_ids[s];
    for (std::size_t k = 0; k < n; ++k) {
      const double* p = roll.positions.data() + k * q * 3 + 3 * s;
      const double* v = roll.velocities.data() + k * q * 3 + 3 * s;
      tr.p.push_back(Vec3{p[0], p[1], p[2]});
      tr.v.push_back(Vec3{v[0], v[1], v[2]});
      if (k + 1 < n) {
        const double* a = best.a.data() + (s * (n - 1) + k) * 3;
        tr.a.push_back(Vec3{a[0], a[1], a[2]});
      } else {
        tr.a.push_back(Vec3{});
      }
    }
  }

  const stl::Formula reported = build_inspection_formula(task, scenario, ts);
  std::vector<double> data(n * q * 3);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t u = 0; u < q; ++u) {
      const Vec3& p = result.trajectories[u].p[k];
      data[k * q * 3 + 3 * u + 0] = p.x;
      data[k * q * 3 + 3 * u + 1] = p.y;
      data[k * q * 3 + 3 * u + 2] = p.z;
    }
  }
  const stl::Trace trace(ts, 3 * q, std::move(data));
  result.robustness = stl::robustness(reported, trace, 0);
  result.success = result.robustness > 0.0;
  result.most_violated_robustness = std::numeric_limits<double>::infinity();
  for (const auto& part : reported.children()) {
    const double rho = stl::robustness(part, trace, 0);
    if (rho < result.most_violated_robustness) {
      result.most_violated_robustness = rho;
      result.most_violated = part.label();
    }
  }
  diag.best_restart = best.restart;
  diag.final_kappa = best.kappa;
  diag.smooth_objective = stl::smooth_robustness(reported, trace, 0, best.kappa);
  result.diagnostics = diag;

  const auto psi = heading_reference(task, result, scenario);
  for (std::size_t u = 0; u < q; ++u) result.trajectories[u].psi = psi[u];
  return result;
}

std::vector<std::vector<double>> heading_reference(const InspectionTask& task, const PlanResult& plan,
                                                   const world::Scenario& scenario) {
  std::vector<std::vector<double>> out;
  for (std::size_t u = 0; u < plan.trajectories.size(); ++u) {
    const Trajectory& tr = plan.trajectories[u];
    const std::size_t n = tr.p.size();
    std::vector<double> psi(n, 0.0);
    std::vector<bool> fixed(n, false);

    const std::vector<RegionVisit> none;
    const auto& visits = u < task.region_visits.size() ? task.region_visits[u] : none;
    for (const auto& visit : visits) {
      const auto* r = scenario.find_region(visit.region);
      if (!r) continue;
      const int hold = static_cast<int>(std::lround(r->dwell_time / plan.ts));
      const int reach = std::max(0, static_cast<int>(std::lround(visit.deadline / plan.ts)) - hold);
      auto inside = [&](std::size_t k) {
        const Vec3 d = tr.p[k] - r->center;
        return std::min({r->half_extents.x - std::abs(d.x), r->half_extents.y - std::abs(d.y),
                         r->half_extents.z - std::abs(d.z)});
      };
      // First step whose dwell window is fully inside the box, else the best one.
      std::size_t start = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k <= reach && static_cast<std::size_t>(k + hold) < n; ++k) {
        double w = std::numeric_limits<double>::infinity();
        for (int j = 0; j <= hold; ++j) w = std::min(w, inside(static_cast<std::size_t>(k + j)));
        if (w > best) {
          best = w;
          start = static_cast<std::size_t>(k);
        }
        if (w > 0.0) break;
      }
      const double az = std::atan2(r->center.y - r->viewpoint.y, r->center.x - r->viewpoint.x);
      for (std::size_t k = start; k <= start + static_cast<std::size_t>(hold) && k < n; ++k) {
        psi[k] = az;
        fixed[k] = true;
      }
    }

    double held = 0.0;
    if (u < task.initial_states.size()) {
      held = task.initial_states[u].heading;
    } else if (const auto* m = scenario.find_uav(tr.uav_id)) {
      held = m->initial.heading;
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (fixed[k]) {
        held = psi[k];
        continue;
      }
      if (world::horizontal_norm(tr.v[k]) >= kHeadingSpeed) held = std::atan2(tr.v[k].y, tr.v[k].x);
      psi[k] = held;
    }
    out.push_back(std::move(psi));
  }
  return out;
}

}  // namespace towerfleet::planner
