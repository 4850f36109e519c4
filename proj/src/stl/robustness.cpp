#include "towerfleet/stl/robustness.hpp"

#include <algorithm>
#include <cmath>

namespace towerfleet::stl {

namespace {

enum class Mode { Exact, Smooth };

struct Semantics {
  Mode mode = Mode::Exact;
  double kappa = 1.0;
};

/// Values of one node over a contiguous step range, with the children needed to backpropagate.
struct TapeNode {
  std::size_t k0 = 0;
  std::vector<double> values;
  std::vector<TapeNode> children;
};

double combine_min(const double* a, std::size_t n, std::ptrdiff_t stride, const Semantics& s) {
  double m = a[0];
  for (std::size_t i = 1; i < n; ++i) m = std::min(m, a[i * stride]);
  if (s.mode == Mode::Exact || n == 1) return m;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(-s.kappa * (a[i * stride] - m));
  return m - std::log(sum) / s.kappa;
}

double combine_max(const double* a, std::size_t n, std::ptrdiff_t stride, const Semantics& s) {
  double m = a[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, a[i * stride]);
  if (s.mode == Mode::Exact || n == 1) return m;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(s.kappa * (a[i * stride] - m));
  return m + std::log(sum) / s.kappa;
}

/// Softmin/softmax weights of the operands; they sum to one.
void soft_weights(const double* a, std::size_t n, std::ptrdiff_t stride, bool is_min, double kappa, double* w) {
  const double sign = is_min ? -1.0 : 1.0;
  double m = sign * a[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, sign * a[i * stride]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(kappa * (sign * a[i * stride] - m));
    sum += w[i];
  }
  for (std::size_t i = 0; i < n; ++i) w[i] /= sum;
}

void forward(const Formula& f, const Trace& trace, std::size_t k0, std::size_t k1, const Semantics& sem,
             TapeNode& node, bool keep_tape) {
  const std::size_t count = k1 - k0 + 1;
  node.k0 = k0;
  node.values.assign(count, 0.0);
  switch (f.op()) {
    case Op::Predicate: {
      if (k1 >= trace.size()) {
        throw EvaluationError("predicate '" + describe(f) + "' evaluated past the end of the trace", describe(f));
      }
      if (f.pred().max_index() >= trace.dimension()) {
        throw EvaluationError("predicate '" + describe(f) + "' references a missing signal dimension", describe(f));
      }
      for (std::size_t i = 0; i < count; ++i) node.values[i] = f.pred().evaluate(trace.sample(k0 + i));
      return;
    }
    case Op::And:
    case Op::Or: {
      const auto& kids = f.children();
      std::vector<TapeNode> tapes(kids.size());
      for (std::size_t c = 0; c < kids.size(); ++c) forward(kids[c], trace, k0, k1, sem, tapes[c], keep_tape);
      std::vector<double> column(kids.size());
      for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < kids.size(); ++c) column[c] = tapes[c].values[i];
        node.values[i] = f.op() == Op::And ? combine_min(column.data(), column.size(), 1, sem)
                                           : combine_max(column.data(), column.size(), 1, sem);
      }
      if (keep_tape) node.children = std::move(tapes);
      return;
    }
    case Op::Globally:
    case Op::Eventually: {
      const std::size_t lo = static_cast<std::size_t>(f.lo());
      const std::size_t hi = static_cast<std::size_t>(f.hi());
      if (k1 + hi >= trace.size()) {
        throw EvaluationError("temporal window of '" + describe(f) + "' does not fit inside the trace", describe(f));
      }
      TapeNode child;
      forward(f.children().front(), trace, k0 + lo, k1 + hi, sem, child, keep_tape);
      const std::size_t width = hi - lo + 1;
      for (std::size_t i = 0; i < count; ++i) {
        const double* window = child.values.data() + i;
        node.values[i] = f.op() == Op::Globally ? combine_min(window, width, 1, sem) : combine_max(window, width, 1, sem);
      }
      if (keep_tape) node.children.push_back(std::move(child));
      return;
    }
  }
}

void backward(const Formula& f, const TapeNode& node, const std::vector<double>& adj, const Trace& trace,
              double kappa, std::vector<double>& grad) {
  const std::size_t count = node.values.size();
  switch (f.op()) {
    case Op::Predicate: {
      const std::size_t dim = trace.dimension();
      for (std::size_t i = 0; i < count; ++i) {
        if (adj[i] == 0.0) continue;
        double* g = grad.data() + (node.k0 + i) * dim;
        for (const auto& t : f.pred().terms) g[t.index] += adj[i] * t.coeff;
      }
      return;
    }
    case Op::And:
    case Op::Or: {
      const auto& kids = f.children();
      std::vector<std::vector<double>> child_adj(kids.size(), std::vector<double>(count, 0.0));
      std::vector<double> column(kids.size());
      std::vector<double> w(kids.size());
      for (std::size_t i = 0; i < count; ++i) {
        if (adj[i] == 0.0) continue;
        for (std::size_t c = 0; c < kids.size(); ++c) column[c] = node.children[c].values[i];
        soft_weights(column.data(), column.size(), 1, f.op() == Op::And, kappa, w.data());
        for (std::size_t c = 0; c < kids.size(); ++c) child_adj[c][i] = adj[i] * w[c];
      }
      for (std::size_t c = 0; c < kids.size(); ++c) backward(kids[c], node.children[c], child_adj[c], trace, kappa, grad);
      return;
    }
    case Op::Globally:
    case Op::Eventually: {
      const auto& child = node.children.front();
      const std::size_t width = static_cast<std::size_t>(f.hi() - f.lo() + 1);
      std::vector<double> child_adj(child.values.size(), 0.0);
      std::vector<double> w(width);
      for (std::size_t i = 0; i < count; ++i) {
        if (adj[i] == 0.0) continue;
        soft_weights(child.values.data() + i, width, 1, f.op() == Op::Globally, kappa, w.data());
        for (std::size_t j = 0; j < width; ++j) child_adj[i + j] += adj[i] * w[j];
      }
      backward(f.children().front(), child, child_adj, trace, kappa, grad);
      return;
    }
  }
}

void require_kappa(double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("smoothing sharpness kappa must be positive");
}

}  // namespace

double robustness(const Formula& formula, const Trace& trace, std::size_t k) {
  TapeNode node;
  forward(formula, trace, k, k, Semantics{}, node, false);
  return node.values.front();
}

std::vector<double> robustness_signal(const Formula& formula, const Trace& trace, std::size_t k_first,
                                      std::size_t k_last) {
  if (k_last < k_first) throw std::invalid_argument("empty step range");
  TapeNode node;
  forward(formula, trace, k_first, k_last, Semantics{}, node, false);
  return node.values;
}

double smooth_robustness(const Formula& formula, const Trace& trace, std::size_t k, double kappa) {
  require_kappa(kappa);
  TapeNode node;
  forward(formula, trace, k, k, Semantics{Mode::Smooth, kappa}, node, false);
  return node.values.front();
}

SmoothValueAndGradient smooth_robustness_gradient(const Formula& formula, const Trace& trace, std::size_t k,
                                                  double kappa) {
  require_kappa(kappa);
  TapeNode node;
  forward(formula, trace, k, k, Semantics{Mode::Smooth, kappa}, node, true);
  SmoothValueAndGradient out;
  out.value = node.values.front();
  out.gradient.assign(trace.data().size(), 0.0);
  backward(formula, node, std::vector<double>{1.0}, trace, kappa, out.gradient);
  return out;
}

double soft_min(std::span<const double> values, double kappa) {
  require_kappa(kappa);
  if (values.empty()) throw std::invalid_argument("soft_min of an empty set");
  return combine_min(values.data(), values.size(), 1, Semantics{Mode::Smooth, kappa});
}

double soft_max(std::span<const double> values, double kappa) {
  require_kappa(kappa);
  if (values.empty()) throw std::invalid_argument("soft_max of an empty set");
  return combine_max(values.data(), values.size(), 1, Semantics{Mode::Smooth, kappa});
}

}  // namespace towerfleet::stl
